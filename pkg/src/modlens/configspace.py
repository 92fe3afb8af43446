"""Parameter spaces for modular algorithm families.

A space declares named parameters (categorical, integer, or ordinal
numeric grids), optional activation conditions, and cross-parameter
constraints.  Spaces are loaded from / saved to a small declarative TOML
dialect so new algorithm families need no code change.

Expression grammar (conditions and constraints)::

    clause     :=  name OP value
    condition  :=  clause ("&&" clause)*     # conjunction only
    constraint :=  name OP (name | value)
    OP         :=  "==" | "!=" | "<=" | ">=" | "<" | ">"

Values are int/float literals or bare strings.  A clause over an
inactive parameter evaluates to false; a constraint touching an
inactive parameter holds vacuously.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

INACTIVE = "not-applicable"

KINDS = ("categorical", "integer", "ordinal")

_OPS = ("==", "!=", "<=", ">=", "<", ">")


class SpaceError(ValueError):
    """Raised for malformed spaces, expressions, or configurations."""


def _parse_value(token: str):
    token = token.strip()
    if len(token) >= 2 and token[0] == token[-1] and token[0] in "'\"":
        return token[1:-1]
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    return token


def _parse_clause(text: str) -> tuple[str, str, object]:
    for op in _OPS:  # two-char ops listed first
        if op in text:
            lhs, rhs = text.split(op, 1)
            return lhs.strip(), op, _parse_value(rhs)
    raise SpaceError(f"no comparison operator in clause {text!r}")


def _compare(a, b, op: str) -> bool:
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    try:
        if op == "<=":
            return a <= b
        if op == ">=":
            return a >= b
        if op == "<":
            return a < b
        return a > b
    except TypeError as exc:
        raise SpaceError(f"cannot order {a!r} and {b!r}") from exc


@dataclass(frozen=True)
class Clause:
    param: str
    op: str
    value: object

    def holds(self, values: dict) -> bool:
        got = values.get(self.param, INACTIVE)
        if got == INACTIVE:
            return False
        return _compare(got, self.value, self.op)

    def text(self) -> str:
        return f"{self.param} {self.op} {_fmt_value(self.value)}"


@dataclass(frozen=True)
class Constraint:
    lhs: str
    op: str
    rhs: object  # parameter name or literal
    rhs_is_param: bool

    def holds(self, values: dict) -> bool:
        a = values.get(self.lhs, INACTIVE)
        b = values.get(self.rhs, INACTIVE) if self.rhs_is_param else self.rhs
        if a == INACTIVE or b == INACTIVE:
            return True
        return _compare(a, b, self.op)

    def text(self) -> str:
        rhs = self.rhs if self.rhs_is_param else _fmt_value(self.rhs)
        return f"{self.lhs} {self.op} {rhs}"


def _fmt_value(v) -> str:
    if isinstance(v, str):
        return v
    return repr(v)


@dataclass(frozen=True)
class ParameterSpec:
    """One parameter: finite ordered domain plus optional activation rule."""

    name: str
    kind: str
    domain: tuple
    default: object
    condition: tuple[Clause, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpaceError(f"{self.name}: unknown kind {self.kind!r}")
        if not self.domain:
            raise SpaceError(f"{self.name}: empty domain")
        if len(set(map(_fmt_value, self.domain))) != len(self.domain):
            raise SpaceError(f"{self.name}: duplicate domain values")
        if self.default not in self.domain:
            raise SpaceError(f"{self.name}: default {self.default!r} not in domain")

    def active(self, values: dict) -> bool:
        return all(c.holds(values) for c in self.condition)

    def sorted_domain(self) -> list:
        """Domain in encoding order: alphabetic for categoricals, as-is otherwise."""
        if self.kind == "categorical":
            return sorted(self.domain, key=str)
        return list(self.domain)


@dataclass(frozen=True)
class ConfigurationSpace:
    family: str
    params: tuple[ParameterSpec, ...]
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self):
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise SpaceError("duplicate parameter names")
        declared = set(names)
        for p in self.params:
            for c in p.condition:
                if c.param not in declared:
                    raise SpaceError(
                        f"{p.name}: condition references unknown parameter {c.param!r}"
                    )
        for c in self.constraints:
            if c.lhs not in declared:
                raise SpaceError(f"constraint references unknown parameter {c.lhs!r}")
            if c.rhs_is_param and c.rhs not in declared:
                raise SpaceError(f"constraint references unknown parameter {c.rhs!r}")
        self.topo_order()  # raises on cycles

    def __getitem__(self, name: str) -> ParameterSpec:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def topo_order(self) -> list[ParameterSpec]:
        """Parameters ordered so conditions only look at earlier entries."""
        by_name = {p.name: p for p in self.params}
        state: dict[str, int] = {}
        order: list[ParameterSpec] = []

        def visit(name: str) -> None:
            if state.get(name) == 2:
                return
            if state.get(name) == 1:
                raise SpaceError(f"cyclic condition graph at parameter {name!r}")
            state[name] = 1
            for c in by_name[name].condition:
                visit(c.param)
            state[name] = 2
            order.append(by_name[name])

        for p in self.params:
            visit(p.name)
        return order


@dataclass(frozen=True)
class Configuration:
    family: str
    values: dict = field(hash=False)

    @property
    def config_id(self) -> str:
        return config_id(self)

    def __getitem__(self, name: str):
        return self.values[name]


def config_id(config: Configuration) -> str:
    """Stable 16-hex content hash of the canonical form."""
    parts = [config.family]
    for name in sorted(config.values):
        parts.append(f"{name}={_fmt_value(config.values[name])}")
    digest = hashlib.sha256("\x1f".join(parts).encode()).hexdigest()
    return digest[:16]


# ---------------------------------------------------------------------------
# operations


def validate(config: Configuration, space: ConfigurationSpace) -> list[str]:
    """Empty list iff the configuration satisfies every invariant."""
    violations = []
    if config.family != space.family:
        violations.append(f"family {config.family!r} != {space.family!r}")
    known = set(space.names())
    for name in config.values:
        if name not in known:
            violations.append(f"unknown parameter {name!r}")
    for p in space.params:
        if p.name not in config.values:
            violations.append(f"missing parameter {p.name!r}")
            continue
        v = config.values[p.name]
        if p.active(config.values):
            if v == INACTIVE or v not in p.domain:
                violations.append(f"{p.name}: value {v!r} not in domain")
        elif v != INACTIVE:
            violations.append(f"{p.name}: inactive parameter must be {INACTIVE!r}")
    for c in space.constraints:
        if not c.holds(config.values):
            violations.append(f"constraint violated: {c.text()}")
    return violations


def enumerate_grid(space: ConfigurationSpace) -> list[Configuration]:
    """Full conditional grid, filtered by constraints, in deterministic order.

    Order is lexicographic over declared parameter order with each
    parameter ranked by domain position (inactive ranks first).
    """
    topo = space.topo_order()
    results: list[dict] = []

    def expand(i: int, values: dict) -> None:
        if i == len(topo):
            if all(c.holds(values) for c in space.constraints):
                results.append(dict(values))
            return
        p = topo[i]
        if p.active(values):
            for v in p.domain:
                values[p.name] = v
                expand(i + 1, values)
            del values[p.name]
        else:
            values[p.name] = INACTIVE
            expand(i + 1, values)
            del values[p.name]

    expand(0, {})

    index = {
        p.name: {v: k for k, v in enumerate(p.domain)} for p in space.params
    }

    def rank(values: dict) -> tuple:
        return tuple(
            -1 if values[p.name] == INACTIVE else index[p.name][values[p.name]]
            for p in space.params
        )

    results.sort(key=rank)
    return [Configuration(space.family, v) for v in results]


def sample_random(
    space: ConfigurationSpace, n: int, seed: int, max_tries: int = 10_000
) -> list[Configuration]:
    """n constraint-satisfying configurations, deterministic given seed.

    Rejection-samples the conditional product; raises after ``max_tries``
    failed draws per configuration when constraints starve the space.
    """
    if n < 1:
        raise SpaceError("n must be >= 1")
    rng = np.random.default_rng(seed)
    topo = space.topo_order()
    out = []
    for _ in range(n):
        for _attempt in range(max_tries):
            values: dict = {}
            for p in topo:
                if p.active(values):
                    values[p.name] = p.domain[int(rng.integers(len(p.domain)))]
                else:
                    values[p.name] = INACTIVE
            if all(c.holds(values) for c in space.constraints):
                out.append(Configuration(space.family, values))
                break
        else:
            raise SpaceError(
                f"no constraint-satisfying configuration found in {max_tries} tries"
            )
    return out


def encode(config: Configuration, space: ConfigurationSpace) -> np.ndarray:
    """Numeric feature vector, one slot per parameter in declared order.

    Categoricals map to their index in the alphabetically sorted domain,
    numerics pass through, inactive parameters map to -1.
    """
    vec = np.empty(len(space.params))
    for j, p in enumerate(space.params):
        v = config.values.get(p.name, INACTIVE)
        if v == INACTIVE:
            vec[j] = -1.0
            continue
        if p.kind == "categorical":
            try:
                vec[j] = float(p.sorted_domain().index(v))
            except ValueError:
                raise SpaceError(f"{p.name}: value {v!r} not in domain") from None
        else:
            if v not in p.domain:
                raise SpaceError(f"{p.name}: value {v!r} not in domain")
            vec[j] = float(v)
    return vec


def decode(vec: np.ndarray, space: ConfigurationSpace) -> Configuration:
    """Inverse table lookup of :func:`encode`."""
    if len(vec) != len(space.params):
        raise SpaceError(f"expected {len(space.params)} slots, got {len(vec)}")
    values = {}
    for j, p in enumerate(space.params):
        x = float(vec[j])
        if x == -1.0 and p.kind == "categorical":
            values[p.name] = INACTIVE
            continue
        if p.kind == "categorical":
            dom = p.sorted_domain()
            k = int(round(x))
            if not 0 <= k < len(dom):
                raise SpaceError(f"{p.name}: code {x} out of range")
            values[p.name] = dom[k]
        else:
            if x == -1.0 and -1.0 not in [float(v) for v in p.domain]:
                values[p.name] = INACTIVE
                continue
            hits = [v for v in p.domain if abs(float(v) - x) <= 1e-12]
            if not hits:
                raise SpaceError(f"{p.name}: value {x} not in domain")
            values[p.name] = hits[0]
    return Configuration(space.family, values)


# ---------------------------------------------------------------------------
# TOML I/O


def space_from_dict(doc: dict) -> ConfigurationSpace:
    try:
        family = doc["family"]
        raw_params = doc["param"]
    except KeyError as exc:
        raise SpaceError(f"space file missing key {exc}") from exc
    params = []
    for rp in raw_params:
        condition = ()
        if "condition" in rp:
            condition = tuple(
                Clause(*_parse_clause(part)) for part in rp["condition"].split("&&")
            )
        try:
            params.append(
                ParameterSpec(
                    name=rp["name"],
                    kind=rp["kind"],
                    domain=tuple(rp["domain"]),
                    default=rp["default"],
                    condition=condition,
                )
            )
        except KeyError as exc:
            raise SpaceError(f"parameter block missing key {exc}") from exc
    constraints = []
    names = {p.name for p in params}
    for text in doc.get("constraints", ()):
        lhs, op, rhs = _parse_clause(text)
        rhs_is_param = isinstance(rhs, str) and rhs in names
        constraints.append(Constraint(lhs, op, rhs, rhs_is_param))
    return ConfigurationSpace(family, tuple(params), tuple(constraints))


def load_space(path) -> ConfigurationSpace:
    with open(path, "rb") as fh:
        return space_from_dict(tomllib.load(fh))


def _toml_scalar(v) -> str:
    if isinstance(v, bool):  # bools are stored as categorical strings instead
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return repr(v)


def dump_space(space: ConfigurationSpace) -> str:
    """Serialize back to the TOML dialect; round-trips losslessly."""
    lines = [f'family = "{space.family}"']
    if space.constraints:
        items = ", ".join(_toml_scalar(c.text()) for c in space.constraints)
        lines.append(f"constraints = [{items}]")
    for p in space.params:
        lines.append("")
        lines.append("[[param]]")
        lines.append(f'name = "{p.name}"')
        lines.append(f'kind = "{p.kind}"')
        lines.append("domain = [" + ", ".join(_toml_scalar(v) for v in p.domain) + "]")
        lines.append(f"default = {_toml_scalar(p.default)}")
        if p.condition:
            cond = " && ".join(c.text() for c in p.condition)
            lines.append(f'condition = "{cond}"')
    return "\n".join(lines) + "\n"


def builtin_space_path(family: str):
    """Path of a space file shipped with the package (modcma, modde)."""
    from importlib.resources import files

    res = files("modlens") / "spaces" / f"{family}.toml"
    if not res.is_file():
        raise SpaceError(f"no builtin space named {family!r}")
    return res


def load_builtin_space(family: str) -> ConfigurationSpace:
    return space_from_dict(tomllib.loads(builtin_space_path(family).read_text()))
