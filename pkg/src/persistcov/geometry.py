"""Convex obstacles, safety distances and the avoidance potential.

The potential between two bodies at distance ``x`` is

    l(x) = min(0, (x^2 - R^2) / (x^2 - r^2))^2

which vanishes beyond the detection range ``R`` and blows up as ``x``
approaches the safety threshold ``r``. Distances at or below ``r`` raise
:class:`CollisionError`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CollisionError


@dataclass(frozen=True)
class ConvexObstacle:
    vertices: tuple

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise ValueError("an obstacle needs at least 3 vertices")
        n = len(verts)
        for i in range(n):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % n]
            cx, cy = verts[(i + 2) % n]
            if (bx - ax) * (cy - by) - (by - ay) * (cx - bx) <= 0:
                raise ValueError(f"obstacle {verts} is not strictly convex and counter-clockwise")
        object.__setattr__(self, "vertices", verts)

    @classmethod
    def rectangle(cls, x0, y0, x1, y1) -> "ConvexObstacle":
        return cls(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))

    def contains(self, p) -> bool:
        """True for points inside or on the boundary."""
        px, py = p
        n = len(self.vertices)
        for i in range(n):
            ax, ay = self.vertices[i]
            bx, by = self.vertices[(i + 1) % n]
            if (bx - ax) * (py - ay) - (by - ay) * (px - ax) < 0:
                return False
        return True


@dataclass(frozen=True)
class SafetyParams:
    r: float
    R: float

    def __post_init__(self):
        if not 0 < self.r < self.R:
            raise ValueError(f"need 0 < r < R, got r={self.r}, R={self.R}")


def virtual_walls(origin, width: float, height: float, thickness: float = 1.0) -> list[ConvexObstacle]:
    """Four rectangles flush with the outside of the area boundary."""
    x0, y0 = origin
    x1, y1 = x0 + width, y0 + height
    t = thickness
    return [
        ConvexObstacle.rectangle(x0 - t, y0 - t, x0, y1 + t),
        ConvexObstacle.rectangle(x1, y0 - t, x1 + t, y1 + t),
        ConvexObstacle.rectangle(x0, y0 - t, x1, y0),
        ConvexObstacle.rectangle(x0, y1, x1, y1 + t),
    ]


def _closest(obstacle: ConvexObstacle, px: float, py: float) -> tuple[float, float, float]:
    best = (math.inf, 0.0, 0.0)
    verts = obstacle.vertices
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        t = ((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)
        t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
        cx, cy = ax + t * ex, ay + t * ey
        d2 = (px - cx) ** 2 + (py - cy) ** 2
        if d2 < best[0]:
            best = (d2, cx, cy)
    return best


def closest_point(obstacle: ConvexObstacle, p) -> np.ndarray:
    if obstacle.contains(p):
        raise CollisionError(f"point {tuple(p)} lies inside or on obstacle {obstacle.vertices}")
    _, cx, cy = _closest(obstacle, float(p[0]), float(p[1]))
    return np.array([cx, cy])


def obstacle_distance(obstacle: ConvexObstacle, p) -> float:
    return float(np.linalg.norm(np.asarray(p, dtype=float) - closest_point(obstacle, p)))


def avoidance_l(x: float, sp: SafetyParams) -> float:
    if x <= sp.r:
        raise CollisionError(f"distance {x} <= safety threshold {sp.r}")
    if x >= sp.R:
        return 0.0
    ratio = (x * x - sp.R ** 2) / (x * x - sp.r ** 2)
    return ratio * ratio


def avoidance_dl(x: float, sp: SafetyParams) -> float:
    if x <= sp.r:
        raise CollisionError(f"distance {x} <= safety threshold {sp.r}")
    if x > sp.R:
        return 0.0
    r2, R2, x2 = sp.r ** 2, sp.R ** 2, x * x
    return 4.0 * (R2 - r2) * (x2 - R2) * x / (x2 - r2) ** 3


def _positions(poses) -> np.ndarray:
    return np.array([[p.x, p.y] for p in poses], dtype=float).reshape(-1, 2)


@dataclass
class AvoidanceTerms:
    """Everything the avoidance layer computes for one configuration."""

    gradients: np.ndarray  # (N, 3) d v / d p_i
    value: float  # v(p), ordered pairs counted twice
    min_agent: float
    min_obstacle: float


def avoidance_terms(poses, obstacles: Sequence[ConvexObstacle], sp: SafetyParams,
                    check: bool = True) -> AvoidanceTerms:
    """Gradient of the avoidance function for every agent, plus the function
    value and the minimum distances. Raises on any distance <= r when
    ``check`` is set."""
    pos = _positions(poses)
    n = len(pos)
    grads = np.zeros((n, 3))
    value = 0.0
    min_agent = math.inf
    min_obs = math.inf
    for i in range(n):
        xi, yi = pos[i]
        for j in range(i + 1, n):
            dx, dy = xi - pos[j, 0], yi - pos[j, 1]
            rho = math.hypot(dx, dy)
            min_agent = min(min_agent, rho)
            if rho > sp.R:
                continue
            if rho <= sp.r:
                if check:
                    raise CollisionError(f"agents {i} and {j} at distance {rho} <= r = {sp.r}")
                continue
            value += 2.0 * avoidance_l(rho, sp)
            g = 2.0 * avoidance_dl(rho, sp) / rho
            grads[i, 0] += g * dx
            grads[i, 1] += g * dy
            grads[j, 0] -= g * dx
            grads[j, 1] -= g * dy
        for k, obs in enumerate(obstacles):
            if obs.contains((xi, yi)):
                if check:
                    raise CollisionError(f"agent {i} is inside obstacle {k}")
                min_obs = 0.0
                continue
            d2, cx, cy = _closest(obs, xi, yi)
            rho = math.sqrt(d2)
            min_obs = min(min_obs, rho)
            if rho > sp.R:
                continue
            if rho <= sp.r:
                if check:
                    raise CollisionError(f"agent {i} at distance {rho} from obstacle {k} <= r = {sp.r}")
                continue
            value += avoidance_l(rho, sp)
            g = avoidance_dl(rho, sp) / rho
            grads[i, 0] += g * (xi - cx)
            grads[i, 1] += g * (yi - cy)
    return AvoidanceTerms(grads, value, min_agent, min_obs)


def avoidance_gradient(i: int, poses, obstacles: Sequence[ConvexObstacle], sp: SafetyParams) -> np.ndarray:
    return avoidance_terms(poses, obstacles, sp).gradients[i].copy()


def avoidance_value(poses, obstacles: Sequence[ConvexObstacle], sp: SafetyParams) -> float:
    return avoidance_terms(poses, obstacles, sp).value


def min_distances(poses, obstacles: Sequence[ConvexObstacle]) -> tuple[float, float]:
    pos = _positions(poses)
    min_agent = math.inf
    for i in range(len(pos)):
        for j in range(i + 1, len(pos)):
            min_agent = min(min_agent, math.hypot(*(pos[i] - pos[j])))
    min_obs = math.inf
    for p in pos:
        for obs in obstacles:
            if obs.contains(p):
                min_obs = 0.0
            else:
                min_obs = min(min_obs, math.sqrt(_closest(obs, p[0], p[1])[0]))
    return min_agent, min_obs
