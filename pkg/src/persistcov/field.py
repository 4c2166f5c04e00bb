"""Grid-backed scalar fields, information decay and the error index.

Fields are stored as 2-D arrays of shape ``(ny, nx)``; row ``j`` holds the
cells with centre ``y = oy + (j + 0.5) * dy``. Flattening is row-major, so
``x`` varies fastest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GridMismatchError


@dataclass(frozen=True)
class GridSpec:
    origin: tuple[float, float]
    width: float
    height: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid needs nx, ny >= 1, got {self.nx}x{self.ny}")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("grid width and height must be positive")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def from_cell_size(cls, origin, width, height, cell_size) -> "GridSpec":
        nx = int(round(width / cell_size))
        ny = int(round(height / cell_size))
        return cls(tuple(origin), float(width), float(height), nx, ny)

    @property
    def dx(self) -> float:
        return self.width / self.nx

    @property
    def dy(self) -> float:
        return self.height / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @cached_property
    def xs(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.nx) + 0.5) * self.dx

    @cached_property
    def ys(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.ny) + 0.5) * self.dy

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates as two ``(ny, nx)`` arrays."""
        return np.meshgrid(self.xs, self.ys)

    def window(self, cx: float, cy: float, radius: float) -> tuple[slice, slice]:
        """Row/column slices of the cells whose centres may lie within
        ``radius`` of ``(cx, cy)``. May be empty."""
        i0 = math.ceil((cx - radius - self.origin[0]) / self.dx - 0.5)
        i1 = math.floor((cx + radius - self.origin[0]) / self.dx - 0.5)
        j0 = math.ceil((cy - radius - self.origin[1]) / self.dy - 0.5)
        j1 = math.floor((cy + radius - self.origin[1]) / self.dy - 0.5)
        i0, j0 = max(i0, 0), max(j0, 0)
        i1, j1 = min(i1, self.nx - 1), min(j1, self.ny - 1)
        return slice(j0, max(j1 + 1, j0)), slice(i0, max(i1 + 1, i0))

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)


@dataclass
class ScalarField:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.spec.shape:
            if self.values.ndim == 1 and self.values.size == self.spec.nx * self.spec.ny:
                self.values = self.values.reshape(self.spec.shape)
            else:
                raise ValueError(
                    f"values of shape {self.values.shape} do not fit grid {self.spec.shape}"
                )

    @classmethod
    def zeros(cls, spec: GridSpec) -> "ScalarField":
        return cls(spec, np.zeros(spec.shape))

    @classmethod
    def full(cls, spec: GridSpec, value: float) -> "ScalarField":
        return cls(spec, np.full(spec.shape, float(value)))

    def copy(self) -> "ScalarField":
        return ScalarField(self.spec, self.values.copy())

    def integral(self) -> float:
        return float(np.sum(self.values)) * self.spec.cell_area


@dataclass(frozen=True)
class PenaltySpec:
    p: int = 2

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise ValueError(f"penalty exponent must be an integer >= 2, got {self.p}")


def check_compatible(*fields: ScalarField) -> GridSpec:
    spec = fields[0].spec
    for f in fields[1:]:
        if f.spec != spec:
            raise GridMismatchError(f"grid {f.spec} differs from {spec}")
    return spec


def decay_coefficients(delta: float, dt: float) -> tuple[float, float]:
    """Return ``(a, b)`` such that one exact step with frozen input ``d`` is
    ``I' = a * I + b * d``."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if delta > 0:
        raise ValueError(f"decay rate must be <= 0, got {delta}")
    if delta == 0:
        return 1.0, float(dt)
    return math.exp(delta * dt), math.expm1(delta * dt) / delta


def decay_accumulate(I: ScalarField, d: ScalarField, delta: float, dt: float) -> ScalarField:
    check_compatible(I, d)
    a, b = decay_coefficients(delta, dt)
    return ScalarField(I.spec, a * I.values + b * d.values)


def tdf_persistent(I: ScalarField, C_star: float) -> ScalarField:
    if not C_star > 0:
        raise ValueError(f"C* must be positive, got {C_star}")
    return ScalarField(I.spec, np.maximum(0.0, C_star - I.values))


def tef(d_star: ScalarField, d: ScalarField) -> ScalarField:
    check_compatible(d_star, d)
    return ScalarField(d_star.spec, d_star.values - d.values)


def penalty(e, penalty: PenaltySpec):
    return np.maximum(0.0, e) ** penalty.p


def penalty_derivative(e, penalty: PenaltySpec):
    return penalty.p * np.maximum(0.0, e) ** (penalty.p - 1)


def error_index(e: ScalarField, sigma: ScalarField, penalty_spec: PenaltySpec) -> float:
    check_compatible(e, sigma)
    return float(np.sum(penalty(e.values, penalty_spec) * sigma.values)) * e.spec.cell_area


def error_index_bound(sigma: ScalarField, C_star: float, penalty_spec: PenaltySpec) -> float:
    """Upper bound on the error index when the task field is capped at C*."""
    return float(penalty(C_star, penalty_spec)) * sigma.integral()


# -- dump format -----------------------------------------------------------

def format_field(name: str, field: ScalarField) -> str:
    s = field.spec
    header = f"field {name} {s.nx} {s.ny} {s.origin[0]!r} {s.origin[1]!r} {s.width!r} {s.height!r}"
    rows = (" ".join(repr(float(v)) for v in row) for row in field.values)
    return header + "\n" + "\n".join(rows) + "\n"


def write_field(path, name: str, field: ScalarField) -> None:
    Path(path).write_text(format_field(name, field))


def parse_field(text: str) -> tuple[str, ScalarField]:
    tokens = text.split()
    if len(tokens) < 8 or tokens[0] != "field":
        raise ValueError("not a field dump: missing 'field' header")
    name = tokens[1]
    nx, ny = int(tokens[2]), int(tokens[3])
    ox, oy, w, h = (float(t) for t in tokens[4:8])
    body = tokens[8:]
    if len(body) != nx * ny:
        raise ValueError(f"field '{name}': expected {nx * ny} values, found {len(body)}")
    spec = GridSpec((ox, oy), w, h, nx, ny)
    return name, ScalarField(spec, np.array([float(v) for v in body]).reshape(ny, nx))


def read_field(path) -> tuple[str, ScalarField]:
    return parse_field(Path(path).read_text())
