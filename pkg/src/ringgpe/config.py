"""Run configuration: INI-style text, validation, serialization, presets.

The format is flat: [section] headers, one key = value per line, full-line
comments starting with # or ;. Sections cover the mesh, the physics, the
ground-state flow, the split-step integrator, vortex detection, the mode
decomposition, the convergence harnesses, and output. Unknown sections or
keys, malformed lines, type errors and range violations all raise
ConfigError carrying the offending line number.

serialize_config() writes every key back explicitly, floats via repr (exact
for doubles), so parse -> serialize -> parse is the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .dynamics import SplitStepConfig
from .errors import ConfigError
from .ground_state import GradientFlowConfig
from .mesh import MeshParams
from .potentials import PotentialParams
from .vortex import DetectionParams

__all__ = [
    "RunConfig",
    "parse_config",
    "serialize_config",
    "PRESET_NAMES",
    "preset_text",
    "preset_config",
]

INITIAL_GROUND_STATE = "ground-state"
INITIAL_UNSTABLE = "unstable"


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters for one run; sub-configs reuse the solver types."""

    mesh: MeshParams
    bc: str
    potential: PotentialParams
    gamma: float
    flow: GradientFlowConfig
    split: SplitStepConfig
    initial: str
    detect: DetectionParams
    modes_p_max: int
    modes_l_max: int
    modes_n: int
    space_h: tuple[float, ...]
    space_beta_max: int
    time_k_min: int
    time_k_max: int
    time_t_max: float
    out_dir: str
    write_vtk: bool


# ---------------------------------------------------------------------------
# schema


def _to_float(raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"expected a number, got {raw!r}") from None
    if not math.isfinite(value):
        raise ValueError("value must be finite")
    return value


def _to_int(raw: str) -> int:
    try:
        return int(raw, 10)
    except ValueError:
        raise ValueError(f"expected an integer, got {raw!r}") from None


def _to_bool(raw: str) -> bool:
    if raw == "true":
        return True
    if raw == "false":
        return False
    raise ValueError(f"expected true or false, got {raw!r}")


def _to_str(raw: str) -> str:
    if not raw:
        raise ValueError("value must not be empty")
    return raw


def _to_choice(*options: str) -> Callable[[str], str]:
    def convert(raw: str) -> str:
        if raw not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {raw!r}")
        return raw

    return convert


def _to_float_list(raw: str) -> tuple[float, ...]:
    parts = [p.strip() for p in raw.split(",")]
    if any(not p for p in parts):
        raise ValueError(f"expected comma-separated numbers, got {raw!r}")
    return tuple(_to_float(p) for p in parts)


def _positive(v) -> str | None:
    return None if v > 0 else "must be positive"


def _nonnegative(v) -> str | None:
    return None if v >= 0 else "must be >= 0"


def _at_least(bound: int) -> Callable[[int], str | None]:
    return lambda v: None if v >= bound else f"must be at least {bound}"


def _unit_range(v) -> str | None:
    return None if 0.0 <= v <= 1.0 else "must lie in [0, 1]"


def _all_positive(values) -> str | None:
    return None if all(v > 0 for v in values) else "entries must be positive"


_REQUIRED = object()


@dataclass(frozen=True)
class _Key:
    convert: Callable[[str], object]
    default: object = _REQUIRED
    check: Callable[[object], str | None] | None = None


_SCHEMA: dict[str, dict[str, _Key]] = {
    "mesh": {
        "r_min": _Key(_to_float, check=_positive),
        "r_max": _Key(_to_float, check=_positive),
        "h": _Key(_to_float, check=_positive),
        "n_circles": _Key(_to_int, default=None, check=_at_least(2)),
        "n_points": _Key(_to_int, default=None, check=_at_least(3)),
        "match_paper_counts": _Key(_to_bool, default=False),
    },
    "physics": {
        "bc": _Key(_to_choice("dirichlet", "neumann"), default="dirichlet"),
        "m": _Key(_to_float, default=10.0, check=_positive),
        "V0": _Key(_to_float, default=100.0, check=_nonnegative),
        "gamma": _Key(_to_float, default=100.0, check=_nonnegative),
        "V_p": _Key(_to_float, default=0.0, check=_unit_range),
        "n_theta": _Key(_to_int, default=0, check=_nonnegative),
        "omega": _Key(_to_float, default=0.0),
    },
    "flow": {
        "kappa0": _Key(_to_float, default=1e-2, check=_positive),
        "epsilon": _Key(_to_float, default=5e-3, check=_positive),
        "max_iters": _Key(_to_int, default=50000, check=_at_least(1)),
    },
    "split": {
        "tau": _Key(_to_float, default=1e-3, check=_positive),
        "t_max": _Key(_to_float, default=1.0, check=_positive),
        "snapshot_stride": _Key(_to_int, default=0, check=_nonnegative),
        "fuse": _Key(_to_bool, default=True),
        "initial": _Key(_to_choice(INITIAL_GROUND_STATE, INITIAL_UNSTABLE),
                        default=INITIAL_GROUND_STATE),
    },
    "detect": {
        "tol1": _Key(_to_float, default=0.1, check=_positive),
        "tol2": _Key(_to_float, default=0.05, check=_positive),
        "lambda_max": _Key(_to_int, default=10, check=_at_least(1)),
        "delta": _Key(_to_float, default=0.1, check=_positive),
        "vort_threshold": _Key(_to_float, default=50.0, check=_positive),
    },
    "modes": {
        "p_max": _Key(_to_int, default=3, check=_nonnegative),
        "l_max": _Key(_to_int, default=80, check=_nonnegative),
        "n": _Key(_to_int, default=500, check=_at_least(2)),
    },
    "harness": {
        "space_h": _Key(_to_float_list, default=(0.1, 0.05, 0.025),
                        check=_all_positive),
        "space_beta_max": _Key(_to_int, default=3, check=_at_least(1)),
        "time_k_min": _Key(_to_int, default=5, check=_at_least(2)),
        "time_k_max": _Key(_to_int, default=10, check=_at_least(2)),
        "time_t_max": _Key(_to_float, default=0.1, check=_positive),
    },
    "output": {
        "dir": _Key(_to_str, default="out"),
        "vtk": _Key(_to_bool, default=True),
    },
}


# ---------------------------------------------------------------------------
# parsing


def _read_sections(text: str):
    """Split raw text into {section: {key: (raw value, line number)}}."""
    values: dict[str, dict[str, tuple[str, int]]] = {}
    section_lines: dict[str, int] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: malformed section header {line!r}")
            name = line[1:-1].strip()
            if name not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{name}]")
            current = name
            values.setdefault(name, {})
            section_lines.setdefault(name, lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside of any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA[current]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{current}]")
        if key in values[current]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in [{current}]")
        values[current][key] = (value, lineno)
    return values, section_lines


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises ConfigError with a line number on bad input."""
    values, section_lines = _read_sections(text)
    resolved: dict[tuple[str, str], object] = {}
    for section, keys in _SCHEMA.items():
        seen = values.get(section, {})
        for key, spec in keys.items():
            if key in seen:
                raw, lineno = seen[key]
                try:
                    value = spec.convert(raw)
                except ValueError as exc:
                    raise ConfigError(f"line {lineno}: [{section}] {key}: {exc}") from None
                if spec.check is not None and value is not None:
                    problem = spec.check(value)
                    if problem:
                        raise ConfigError(f"line {lineno}: [{section}] {key} {problem}")
                resolved[section, key] = value
            elif spec.default is _REQUIRED:
                raise ConfigError(f"[{section}] is missing required key {key!r}")
            else:
                resolved[section, key] = spec.default
    return _build(resolved, section_lines)


def _build(v: dict, section_lines: dict[str, int]) -> RunConfig:
    def fail(section: str, exc) -> ConfigError:
        line = section_lines.get(section)
        where = f"line {line}: " if line is not None else ""
        return ConfigError(f"{where}[{section}]: {exc}")

    try:
        mesh = MeshParams(
            r_min=v["mesh", "r_min"], r_max=v["mesh", "r_max"], h=v["mesh", "h"],
            n_circles=v["mesh", "n_circles"], n_points=v["mesh", "n_points"],
            match_paper_counts=v["mesh", "match_paper_counts"])
    except ValueError as exc:
        raise fail("mesh", exc) from None
    try:
        potential = PotentialParams(
            m=v["physics", "m"], V0=v["physics", "V0"], V_p=v["physics", "V_p"],
            n_theta=v["physics", "n_theta"], omega=v["physics", "omega"])
    except ValueError as exc:
        raise fail("physics", exc) from None
    try:
        flow = GradientFlowConfig(
            kappa0=v["flow", "kappa0"], epsilon=v["flow", "epsilon"],
            max_iters=v["flow", "max_iters"])
    except ValueError as exc:
        raise fail("flow", exc) from None
    try:
        split = SplitStepConfig(
            tau=v["split", "tau"], t_max=v["split", "t_max"],
            snapshot_stride=v["split", "snapshot_stride"],
            fuse_half_steps=v["split", "fuse"])
        split.n_steps  # noqa: B018 -- tau must divide t_max
    except ValueError as exc:
        raise fail("split", exc) from None
    try:
        detect = DetectionParams(
            tol1=v["detect", "tol1"], tol2=v["detect", "tol2"],
            lambda_max=v["detect", "lambda_max"], delta=v["detect", "delta"],
            vort_threshold=v["detect", "vort_threshold"])
    except ValueError as exc:
        raise fail("detect", exc) from None
    if v["harness", "time_k_min"] > v["harness", "time_k_max"]:
        raise fail("harness", "time_k_min exceeds time_k_max")

    return RunConfig(
        mesh=mesh,
        bc=v["physics", "bc"],
        potential=potential,
        gamma=v["physics", "gamma"],
        flow=flow,
        split=split,
        initial=v["split", "initial"],
        detect=detect,
        modes_p_max=v["modes", "p_max"],
        modes_l_max=v["modes", "l_max"],
        modes_n=v["modes", "n"],
        space_h=v["harness", "space_h"],
        space_beta_max=v["harness", "space_beta_max"],
        time_k_min=v["harness", "time_k_min"],
        time_k_max=v["harness", "time_k_max"],
        time_t_max=v["harness", "time_t_max"],
        out_dir=v["output", "dir"],
        write_vtk=v["output", "vtk"],
    )


# ---------------------------------------------------------------------------
# serialization


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(x)) for x in value)
    return str(value)


def serialize_config(config: RunConfig) -> str:
    """Canonical text with every key explicit; parses back to an equal config."""
    lines: list[str] = []

    def section(name: str):
        if lines:
            lines.append("")
        lines.append(f"[{name}]")

    def key(name: str, value):
        lines.append(f"{name} = {_format_value(value)}")

    section("mesh")
    key("r_min", config.mesh.r_min)
    key("r_max", config.mesh.r_max)
    key("h", config.mesh.h)
    if config.mesh.n_circles is not None:
        key("n_circles", config.mesh.n_circles)
    if config.mesh.n_points is not None:
        key("n_points", config.mesh.n_points)
    key("match_paper_counts", config.mesh.match_paper_counts)

    section("physics")
    key("bc", config.bc)
    key("m", config.potential.m)
    key("V0", config.potential.V0)
    key("gamma", config.gamma)
    key("V_p", config.potential.V_p)
    key("n_theta", config.potential.n_theta)
    key("omega", config.potential.omega)

    section("flow")
    key("kappa0", config.flow.kappa0)
    key("epsilon", config.flow.epsilon)
    key("max_iters", config.flow.max_iters)

    section("split")
    key("tau", config.split.tau)
    key("t_max", config.split.t_max)
    key("snapshot_stride", config.split.snapshot_stride)
    key("fuse", config.split.fuse_half_steps)
    key("initial", config.initial)

    section("detect")
    key("tol1", config.detect.tol1)
    key("tol2", config.detect.tol2)
    key("lambda_max", config.detect.lambda_max)
    key("delta", config.detect.delta)
    key("vort_threshold", config.detect.vort_threshold)

    section("modes")
    key("p_max", config.modes_p_max)
    key("l_max", config.modes_l_max)
    key("n", config.modes_n)

    section("harness")
    key("space_h", config.space_h)
    key("space_beta_max", config.space_beta_max)
    key("time_k_min", config.time_k_min)
    key("time_k_max", config.time_k_max)
    key("time_t_max", config.time_t_max)

    section("output")
    key("dir", config.out_dir)
    key("vtk", config.write_vtk)

    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# presets

_OMEGA_STIR = repr(10.0 * math.pi / 3.0)

_PAPER62 = f"""\
# Stirred ring: trapped ground state driven by a rotating 6-lobe
# perturbation (angular speed 10*pi/3) over t in [0, 3], 5000 steps.
[mesh]
r_min = 0.6
r_max = 1.4
h = 0.02
n_circles = 41
n_points = 486
match_paper_counts = true

[physics]
bc = dirichlet
m = 10.0
V0 = 100.0
gamma = 100.0
V_p = 0.05
n_theta = 6
omega = {_OMEGA_STIR}

[flow]
kappa0 = 0.01
epsilon = 0.005
max_iters = 50000

[split]
tau = 0.0006
t_max = 3.0
snapshot_stride = 500
fuse = true
initial = ground-state

[detect]
tol1 = 0.1
tol2 = 0.05
lambda_max = 10
delta = 0.1
vort_threshold = 50.0

[modes]
p_max = 3
l_max = 80
n = 500

[harness]
space_h = 0.1, 0.05, 0.025
space_beta_max = 3
time_k_min = 5
time_k_max = 10
time_t_max = 0.1

[output]
dir = out
vtk = true
"""

_UNSTABLE_DIRICHLET = """\
# Sign-flipped ground state released in the static trap: the phase jump
# nucleates vortices at the outer edge, then radiates sound waves.
[mesh]
r_min = 0.6
r_max = 1.4
h = 0.02
n_circles = 41
n_points = 486
match_paper_counts = true

[physics]
bc = dirichlet
m = 10.0
V0 = 100.0
gamma = 100.0
V_p = 0.0
n_theta = 0
omega = 0.0

[flow]
kappa0 = 0.01
epsilon = 0.005
max_iters = 50000

[split]
tau = 0.0006
t_max = 3.0
snapshot_stride = 500
fuse = true
initial = unstable

[detect]
tol1 = 0.1
tol2 = 0.05
lambda_max = 10
delta = 0.1
vort_threshold = 50.0

[modes]
p_max = 3
l_max = 80
n = 500

[harness]
space_h = 0.1, 0.05, 0.025
space_beta_max = 3
time_k_min = 5
time_k_max = 10
time_t_max = 0.1

[output]
dir = out
vtk = true
"""

_UNSTABLE_NEUMANN = """\
# Free ring with reflecting walls: the sign-flipped constant ground state
# develops a snake instability that breaks into vortex-antivortex pairs.
[mesh]
r_min = 0.6
r_max = 1.4
h = 0.02
n_circles = 41
n_points = 486
match_paper_counts = true

[physics]
bc = neumann
m = 10.0
V0 = 0.0
gamma = 100.0
V_p = 0.0
n_theta = 0
omega = 0.0

[flow]
kappa0 = 0.01
epsilon = 0.005
max_iters = 50000

[split]
tau = 0.0006
t_max = 3.0
snapshot_stride = 500
fuse = true
initial = unstable

[detect]
tol1 = 0.1
tol2 = 0.05
lambda_max = 10
delta = 0.1
vort_threshold = 50.0

[modes]
p_max = 3
l_max = 80
n = 500

[harness]
space_h = 0.1, 0.05, 0.025
space_beta_max = 3
time_k_min = 5
time_k_max = 10
time_t_max = 0.1

[output]
dir = out
vtk = true
"""

_PRESETS = {
    "paper62": _PAPER62,
    "unstable-dirichlet": _UNSTABLE_DIRICHLET,
    "unstable-neumann": _UNSTABLE_NEUMANN,
}

PRESET_NAMES = tuple(sorted(_PRESETS))


def preset_text(name: str) -> str:
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    return _PRESETS[name]


def preset_config(name: str) -> RunConfig:
    return parse_config(preset_text(name))
