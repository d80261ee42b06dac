"""Run configuration: flat key = value files, axis-aligned region predicates.

Region syntax (axes x1, x2, x3; primitives joined by ';' form a union):
    plane AXIS VALUE
    box X1MIN X1MAX X2MIN X2MAX X3MIN X3MAX
A membership tolerance of 1e-9 absorbs floating round-off of lattice
coordinates.  The non-penetration region value "auto" defers to the built-in
contact bands of the pincer benchmark.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_TOL = 1e-9
_AXES = {"x1": 0, "x2": 1, "x3": 2}


@dataclass(frozen=True)
class Box:
    bounds: tuple  # (x1min, x1max, x2min, x2max, x3min, x3max)

    def contains(self, points: np.ndarray) -> np.ndarray:
        b = self.bounds
        ok = np.ones(len(points), dtype=bool)
        for axis in range(3):
            ok &= (points[:, axis] > b[2 * axis] - _TOL) & (points[:, axis] < b[2 * axis + 1] + _TOL)
        return ok


@dataclass(frozen=True)
class Plane:
    axis: int
    value: float

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.abs(points[:, self.axis] - self.value) < _TOL


@dataclass(frozen=True)
class Region:
    """Union of axis-aligned primitives, callable as a point-mask predicate."""

    primitives: tuple

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        mask = np.zeros(len(points), dtype=bool)
        for prim in self.primitives:
            mask |= prim.contains(points)
        return mask


def parse_region(text: str) -> Region:
    prims = []
    for part in text.split(";"):
        words = part.split()
        if not words:
            continue
        kind = words[0].lower()
        if kind == "plane":
            if len(words) != 3 or words[1] not in _AXES:
                raise ConfigError(f"bad plane spec {part!r}; want 'plane x1 0.0'")
            prims.append(Plane(axis=_AXES[words[1]], value=float(words[2])))
        elif kind == "box":
            if len(words) != 7:
                raise ConfigError(f"bad box spec {part!r}; want 'box x1min x1max x2min x2max x3min x3max'")
            prims.append(Box(bounds=tuple(float(w) for w in words[1:])))
        else:
            raise ConfigError(f"unknown region primitive {kind!r}")
    if not prims:
        raise ConfigError(f"empty region {text!r}")
    return Region(primitives=tuple(prims))


def format_region(region: Region) -> str:
    parts = []
    for prim in region.primitives:
        if isinstance(prim, Plane):
            axis = {v: k for k, v in _AXES.items()}[prim.axis]
            parts.append(f"plane {axis} {prim.value!r}")
        else:
            parts.append("box " + " ".join(repr(v) for v in prim.bounds))
    return "; ".join(parts)


# Contact bands of the pincer benchmark: the facing surfaces of both arm
# tips (x1 >= 3), each extended by the adjacent half-height side strips.
# Expressed as box unions so the tip-face interior stays excluded.
DEFAULT_NP_REGION = ("box 3 6 0 0.5 2.5 2.5; box 3 6 0 0 2.5 2.75; box 3 6 0.5 0.5 2.5 2.75; "
                     "box 3 6 0 0.5 0.5 0.5; box 3 6 0 0 0.25 0.5; box 3 6 0.5 0.5 0.25 0.5")


@dataclass
class RunConfig:
    """Benchmark parameters; the defaults reproduce the pincer setup."""

    level: int = 1
    youngs_modulus: float = 2e8
    poisson_ratio: float = 0.3
    g_load: float = 4e5
    load_profile: str = "tips"
    beta: float = 2.1
    s_factor: float = 3.0
    r_factor: float = 2.0
    kernel_width: float = 0.01
    weight_factor: float = 0.001
    dirichlet_region: str = "plane x1 0.0"
    np_region: str = "auto"
    initial_mode: str = "elastic"
    initial_file: str = ""
    gtol: float = 1e-6
    max_iter: int = 500
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    barrier_floor: float = 0.2
    rho: float = 1.0
    sigma_lower: float = 0.5
    sigma_upper: float = 2.0
    gap_threshold: float = 0.0  # 0 means h/2 at run time
    out_dir: str = ""
    threads: int = 0

    def __post_init__(self):
        if self.initial_mode not in ("elastic", "symmetric", "asymmetric", "file"):
            raise ConfigError(f"unknown initial mode {self.initial_mode!r}")
        if self.initial_mode == "file" and not self.initial_file:
            raise ConfigError("initial.mode = file requires initial.file")

    @property
    def penalty_weight(self) -> float:
        return self.weight_factor * self.youngs_modulus

    def resolved_np_region(self) -> Region:
        text = DEFAULT_NP_REGION if self.np_region == "auto" else self.np_region
        return parse_region(text)

    def resolved_dirichlet_region(self) -> Region:
        return parse_region(self.dirichlet_region)


_KEYMAP = {
    "mesh.level": ("level", int),
    "material.youngs_modulus": ("youngs_modulus", float),
    "material.poisson_ratio": ("poisson_ratio", float),
    "load.g_load": ("g_load", float),
    "load.profile": ("load_profile", str),
    "penalty.beta": ("beta", float),
    "penalty.s_factor": ("s_factor", float),
    "penalty.r_factor": ("r_factor", float),
    "penalty.kernel_width": ("kernel_width", float),
    "penalty.weight_factor": ("weight_factor", float),
    "regions.dirichlet": ("dirichlet_region", str),
    "regions.nonpenetration": ("np_region", str),
    "initial.mode": ("initial_mode", str),
    "initial.file": ("initial_file", str),
    "optimizer.gtol": ("gtol", float),
    "optimizer.max_iter": ("max_iter", int),
    "optimizer.wolfe_c1": ("wolfe_c1", float),
    "optimizer.wolfe_c2": ("wolfe_c2", float),
    "optimizer.barrier_floor": ("barrier_floor", float),
    "validate.rho": ("rho", float),
    "validate.sigma_lower": ("sigma_lower", float),
    "validate.sigma_upper": ("sigma_upper", float),
    "validate.gap_threshold": ("gap_threshold", float),
    "output.dir": ("out_dir", str),
    "run.threads": ("threads", int),
}

_FIELDMAP = {fieldname: (key, conv) for key, (fieldname, conv) in _KEYMAP.items()}


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _KEYMAP:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        fieldname, conv = _KEYMAP[key]
        try:
            values[fieldname] = conv(val.strip())
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return RunConfig(**values)


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        key, conv = _FIELDMAP[f.name]
        value = getattr(cfg, f.name)
        lines.append(f"{key} = {value!r}" if conv is float else f"{key} = {value}")
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    with open(path) as f:
        return parse_config(f.read())
