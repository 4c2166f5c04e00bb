"""Coverage gradient, the composed control law and the Lyapunov diagnostic."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descriptor import DescriptorSpec, Patch, Pose, SupportSpec, adf_patch
from .dynamics import AgentModel, AgentState, g_matrix, pose_jacobian
from .field import PenaltySpec, ScalarField, check_compatible, penalty_derivative


@dataclass(frozen=True)
class ControlGains:
    beta: float
    gamma: float
    mu: float

    def __post_init__(self):
        if not (self.beta > 0 and self.gamma > 0 and self.mu > 0):
            raise ValueError("control gains beta, gamma, mu must be positive")


def patch_coverage_gradient(patch: Patch, e_window: np.ndarray, sigma_window: np.ndarray,
                            penalty: PenaltySpec, cell_area: float) -> np.ndarray:
    """Coverage gradient from precomputed ADF samples.

    ``e_window`` and ``sigma_window`` are the error and weight fields cut to
    the patch window.
    """
    w = penalty_derivative(e_window, penalty) * sigma_window * patch.inside
    return -cell_area * np.einsum("kij,ij->k", patch.grad, w)


def coverage_gradient(spec: DescriptorSpec, pose: Pose, support: SupportSpec, tef: ScalarField,
                      sigma: ScalarField, penalty: PenaltySpec) -> np.ndarray:
    """d(error index)/d(pose) for one agent, integrating only over the cells
    inside its support disc."""
    grid = check_compatible(tef, sigma)
    patch = adf_patch(spec, pose, support, grid)
    return patch_coverage_gradient(
        patch, tef.values[patch.rows, patch.cols], sigma.values[patch.rows, patch.cols],
        penalty, grid.cell_area,
    )


def control_input(model: AgentModel, state: AgentState, gains: ControlGains,
                  coverage_grad, avoidance_grad) -> np.ndarray:
    M = g_matrix(model, state).T @ pose_jacobian(model, state).T
    return (-gains.beta * (M @ np.asarray(coverage_grad, dtype=float))
            - gains.gamma * (M @ np.asarray(avoidance_grad, dtype=float))
            - gains.mu * state.v)


def lyapunov_value(xi: float, v_avoid: float, velocities, gains: ControlGains) -> float:
    kinetic = sum(float(np.dot(v, v)) for v in velocities)
    return xi + gains.gamma / gains.beta * v_avoid + kinetic / (2.0 * gains.beta)
