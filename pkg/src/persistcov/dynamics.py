"""Vehicle models in pseudo-velocity form.

Each model integrates

    x' = G(x) v,    v' = u

where ``v`` is the pseudo-velocity and ``u`` the pseudo-acceleration. The
torque-level input that realises a given ``u`` on the constrained plant is
available through :func:`torque_from_pseudo_accel` for diagnostics only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .descriptor import Pose, wrap_angle


@dataclass(frozen=True)
class DoubleIntegrator:
    mass: float = 1.0
    kind = "double_integrator"
    nx = 2
    nv = 2

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")


@dataclass(frozen=True)
class DynamicUnicycle:
    mass: float = 1.0
    inertia: float = 1.0
    kind = "dynamic_unicycle"
    nx = 3
    nv = 2

    def __post_init__(self):
        if not (self.mass > 0 and self.inertia > 0):
            raise ValueError("mass and inertia must be positive")


AgentModel = Union[DoubleIntegrator, DynamicUnicycle]


@dataclass(eq=False)
class AgentState:
    x: np.ndarray
    v: np.ndarray = field(default=None)

    def __post_init__(self):
        self.x = np.array(self.x, dtype=float)
        self.v = np.zeros(2) if self.v is None else np.array(self.v, dtype=float)
        if len(self.x) == 3:
            self.x[2] = wrap_angle(self.x[2])
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v))):
            raise ValueError("non-finite agent state")

    def copy(self) -> "AgentState":
        return AgentState(self.x.copy(), self.v.copy())

    def __eq__(self, other):
        if not isinstance(other, AgentState):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.v, other.v)


def model_to_dict(model: AgentModel) -> dict:
    if isinstance(model, DynamicUnicycle):
        return {"kind": model.kind, "mass": model.mass, "inertia": model.inertia}
    return {"kind": model.kind, "mass": model.mass}


def model_from_dict(data: dict) -> AgentModel:
    kind = data.get("kind")
    if kind == "double_integrator":
        return DoubleIntegrator(float(data.get("mass", 1.0)))
    if kind == "dynamic_unicycle":
        return DynamicUnicycle(float(data.get("mass", 1.0)), float(data.get("inertia", 1.0)))
    raise ValueError(f"unknown model kind {kind!r}")


def pose_map(model: AgentModel, state: AgentState) -> Pose:
    if isinstance(model, DynamicUnicycle):
        return Pose(state.x[0], state.x[1], state.x[2])
    return Pose(state.x[0], state.x[1], 0.0)


def pose_jacobian(model: AgentModel, state: AgentState) -> np.ndarray:
    """d pose / d x, shape ``(3, dim x)``."""
    if isinstance(model, DynamicUnicycle):
        return np.eye(3)
    return np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])


def g_matrix(model: AgentModel, state: AgentState) -> np.ndarray:
    if isinstance(model, DynamicUnicycle):
        th = state.x[2]
        return np.array([[math.cos(th), 0.0], [math.sin(th), 0.0], [0.0, 1.0]])
    return np.eye(2)


def constraint_matrix(model: AgentModel, state: AgentState) -> np.ndarray:
    """Pfaffian constraint matrix A(x); ``A.T @ x_dot = 0``. Empty for the
    unconstrained double integrator."""
    if isinstance(model, DynamicUnicycle):
        th = state.x[2]
        return np.array([[math.sin(th)], [-math.cos(th)], [0.0]])
    return np.zeros((2, 0))


def _xdot(model: AgentModel, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    if isinstance(model, DynamicUnicycle):
        return np.array([v[0] * math.cos(x[2]), v[0] * math.sin(x[2]), v[1]])
    return v.copy()


def step(model: AgentModel, state: AgentState, u, dt: float) -> AgentState:
    """One RK4 step with ``u`` held constant over ``dt``."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    u = np.asarray(u, dtype=float)
    if u.shape != state.v.shape:
        raise ValueError(f"input has shape {u.shape}, expected {state.v.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite control input")
    x0, v0 = state.x, state.v
    h = 0.5 * dt
    k1 = _xdot(model, x0, v0)
    v1 = v0 + h * u
    k2 = _xdot(model, x0 + h * k1, v1)
    k3 = _xdot(model, x0 + h * k2, v1)
    v2 = v0 + dt * u
    k4 = _xdot(model, x0 + dt * k3, v2)
    x = x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    # v' = u is constant over the step, so RK4 is exact for v
    return AgentState(x, v2)


# -- torque-level diagnostics ----------------------------------------------

def _inertia_matrix(model: AgentModel) -> np.ndarray:
    if isinstance(model, DynamicUnicycle):
        return np.diag([model.mass, model.mass, model.inertia])
    return model.mass * np.eye(2)


def _input_matrix(model: AgentModel, state: AgentState) -> np.ndarray:
    # unicycle: forward force along the heading and a yaw torque
    return g_matrix(model, state)


def _g_dot(model: AgentModel, state: AgentState) -> np.ndarray:
    if isinstance(model, DynamicUnicycle):
        th, w = state.x[2], state.v[1]
        return np.array([[-math.sin(th) * w, 0.0], [math.cos(th) * w, 0.0], [0.0, 0.0]])
    return np.zeros((2, 2))


def reduced_inertia(model: AgentModel, state: AgentState) -> np.ndarray:
    G = g_matrix(model, state)
    return G.T @ _inertia_matrix(model) @ G


def reduced_bias(model: AgentModel, state: AgentState) -> np.ndarray:
    # both models carry no Coriolis or potential terms, so c(x, G v) = 0
    G = g_matrix(model, state)
    return G.T @ (_inertia_matrix(model) @ _g_dot(model, state) @ state.v)


def torque_from_pseudo_accel(model: AgentModel, state: AgentState, u) -> np.ndarray:
    G = g_matrix(model, state)
    GD = G.T @ _input_matrix(model, state)
    if abs(np.linalg.det(GD)) < 1e-12:
        raise np.linalg.LinAlgError("G^T D is singular")
    rhs = reduced_inertia(model, state) @ np.asarray(u, dtype=float) + reduced_bias(model, state)
    return np.linalg.solve(GD, rhs)
