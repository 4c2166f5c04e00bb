"""Agent descriptor functions (ADFs).

Two parametric families are supported: an anisotropic Gaussian oriented by
the agent heading, and the same Gaussian multiplied by a two-sigmoid field
of view mask. Values and pose-gradients are evaluated in closed form and
vectorised over query points.

Unbounded ADFs are truncated to a disc of radius :func:`support_radius`
around the agent position. Values and gradients outside that disc are zero,
so the support of the gradient never exceeds the support of the value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .field import GridSpec, ScalarField


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    return math.pi - (math.pi - theta) % (2.0 * math.pi)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        for v in (self.x, self.y, self.theta):
            if not math.isfinite(v):
                raise ValueError(f"non-finite pose {self.x, self.y, self.theta}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Gaussian:
    A: float
    sigma2: tuple[float, float]
    kind = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "sigma2", tuple(float(s) for s in self.sigma2))
        if not self.A > 0:
            raise ValueError("ADF amplitude A must be positive")
        if len(self.sigma2) != 2 or min(self.sigma2) <= 0:
            raise ValueError("sigma2 needs two positive entries")


@dataclass(frozen=True)
class GaussianFov(Gaussian):
    k: float = 2.0
    phi: float = math.pi / 2
    kind = "gaussian_fov"

    def __post_init__(self):
        super().__post_init__()
        if not self.k > 0:
            raise ValueError("FOV slope k must be positive")
        if not 0 < self.phi < 2 * math.pi:
            raise ValueError("FOV angle phi must lie in (0, 2*pi)")


DescriptorSpec = Union[Gaussian, GaussianFov]


@dataclass(frozen=True)
class SupportSpec:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("support threshold epsilon must be positive")

    @classmethod
    def default_for(cls, spec: DescriptorSpec) -> "SupportSpec":
        return cls(1e-2 * spec.A)


def spec_to_dict(spec: DescriptorSpec) -> dict:
    out = {"kind": spec.kind, "A": spec.A, "sigma2": list(spec.sigma2)}
    if isinstance(spec, GaussianFov):
        out["k"] = spec.k
        out["phi"] = spec.phi
    return out


def spec_from_dict(data: dict) -> DescriptorSpec:
    kind = data.get("kind")
    if kind == "gaussian":
        return Gaussian(float(data["A"]), tuple(data["sigma2"]))
    if kind == "gaussian_fov":
        return GaussianFov(float(data["A"]), tuple(data["sigma2"]), float(data["k"]), float(data["phi"]))
    raise ValueError(f"unknown descriptor kind {kind!r}")


def support_radius(spec: DescriptorSpec, support: SupportSpec) -> float:
    # the FOV mask is <= 1, so the Gaussian radius bounds both families
    if support.epsilon >= spec.A:
        raise ValueError(f"epsilon {support.epsilon} >= A {spec.A}: empty support")
    return math.sqrt(2.0 * max(spec.sigma2) * math.log(spec.A / support.epsilon))


def _sigmoid(a):
    # 1 / (1 + exp(-a)) without overflow for large negative a
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def evaluate(spec: DescriptorSpec, pose: Pose, qx, qy, gradient: bool = False):
    """Unclipped ADF value (and optionally pose-gradient) at query points.

    ``qx``, ``qy`` are broadcastable arrays. Returns ``d`` or ``(d, g)`` with
    ``g`` of shape ``(3,) + d.shape`` holding d/dx, d/dy, d/dtheta.
    """
    dx = np.asarray(qx, dtype=float) - pose.x
    dy = np.asarray(qy, dtype=float) - pose.y
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    s1, s2 = spec.sigma2
    w1 = c * dx + s * dy
    w2 = -s * dx + c * dy
    d = spec.A * np.exp(-0.5 * (w1 * w1 / s1 + w2 * w2 / s2))

    if gradient:
        a1, a2 = w1 / s1, w2 / s2
        gx = d * (c * a1 - s * a2)
        gy = d * (s * a1 + c * a2)
        gt = -d * w1 * w2 * (1.0 / s1 - 1.0 / s2)

    if isinstance(spec, GaussianFov):
        psi = pose.theta - math.pi / 2
        cp, sp = math.cos(psi), math.sin(psi)
        r1 = dx * cp + dy * sp
        r2 = -dx * sp + dy * cp
        ch, sh = math.cos(spec.phi / 2), math.sin(spec.phi / 2)
        fr = _sigmoid(spec.k * (r1 * ch + r2 * sh))
        fl = _sigmoid(spec.k * (-r1 * ch + r2 * sh))
        fov = fr * fl
        if gradient:
            # d r1 / d(x, y, theta) = (-cp, -sp, r2); d r2 = (sp, -cp, -r1)
            kr = spec.k * fr * (1.0 - fr)
            kl = spec.k * fl * (1.0 - fl)
            dfr = (kr * (-cp * ch + sp * sh), kr * (-sp * ch - cp * sh), kr * (r2 * ch - r1 * sh))
            dfl = (kl * (cp * ch + sp * sh), kl * (sp * ch - cp * sh), kl * (-r2 * ch - r1 * sh))
            gx = gx * fov + d * (dfr[0] * fl + fr * dfl[0])
            gy = gy * fov + d * (dfr[1] * fl + fr * dfl[1])
            gt = gt * fov + d * (dfr[2] * fl + fr * dfl[2])
        d = d * fov

    if gradient:
        return d, np.stack(np.broadcast_arrays(gx, gy, gt))
    return d


def _inside(pose: Pose, q, support: Optional[SupportSpec], spec: DescriptorSpec) -> bool:
    if support is None:
        return True
    r = support_radius(spec, support)
    return math.hypot(q[0] - pose.x, q[1] - pose.y) <= r


def adf_value(spec: DescriptorSpec, pose: Pose, q, support: Optional[SupportSpec] = None) -> float:
    """ADF value at point ``q``; zero outside the support disc when
    ``support`` is given."""
    if not _inside(pose, q, support, spec):
        return 0.0
    return float(evaluate(spec, pose, q[0], q[1]))


def adf_pose_gradient(spec: DescriptorSpec, pose: Pose, q, support: Optional[SupportSpec] = None) -> np.ndarray:
    if not _inside(pose, q, support, spec):
        return np.zeros(3)
    _, g = evaluate(spec, pose, q[0], q[1], gradient=True)
    return np.asarray(g, dtype=float).reshape(3)


@dataclass
class Patch:
    """ADF samples on the grid cells inside an agent's support disc.

    ``values`` and ``grad`` cover the rectangular window ``(rows, cols)``;
    cells of the window outside the disc hold zeros.
    """

    rows: slice
    cols: slice
    values: np.ndarray
    inside: np.ndarray
    grad: Optional[np.ndarray] = None


def adf_patch(spec: DescriptorSpec, pose: Pose, support: SupportSpec, grid: GridSpec,
              gradient: bool = True) -> Patch:
    r = support_radius(spec, support)
    rows, cols = grid.window(pose.x, pose.y, r)
    qx = grid.xs[cols][None, :]
    qy = grid.ys[rows][:, None]
    inside = (qx - pose.x) ** 2 + (qy - pose.y) ** 2 <= r * r
    if gradient:
        d, g = evaluate(spec, pose, qx, qy, gradient=True)
        d = np.where(inside, d, 0.0)
        g = np.where(inside[None], g, 0.0)
        return Patch(rows, cols, d, inside, g)
    d = np.where(inside, evaluate(spec, pose, qx, qy), 0.0)
    return Patch(rows, cols, d, inside)


def rasterize_adf(spec: DescriptorSpec, pose: Pose, support: SupportSpec, target: ScalarField,
                  accumulate: bool = True) -> ScalarField:
    """Sample the ADF on ``target``'s cells inside the support disc.

    With ``accumulate`` the samples are added, otherwise they overwrite the
    covered cells. Cells outside the disc are untouched. Returns a new field.
    """
    patch = adf_patch(spec, pose, support, target.spec, gradient=False)
    out = target.copy()
    view = out.values[patch.rows, patch.cols]
    m = patch.inside
    if accumulate:
        view[m] += patch.values[m]
    else:
        view[m] = patch.values[m]
    return out


def ctdf(agents, grid: GridSpec) -> ScalarField:
    """Sum of the rasterised ADFs of ``(spec, pose, support)`` triples."""
    out = ScalarField.zeros(grid)
    for spec, pose, support in agents:
        out = rasterize_adf(spec, pose, support, out)
    return out
