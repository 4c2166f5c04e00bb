"""Decentralized estimation of the information field.

Between update instants every agent propagates its estimate with its own
coverage only, so the estimate never exceeds the true field. At an update
instant neighbours trade snapshots and run two corrections:

1. inside its own footprint an agent adds every neighbour's positive
   excess over the decayed previous snapshot; outside it takes the largest
   value any neighbour reports;
2. the max in step 1 misses overlapping neighbour footprints, so agents
   also trade the part of their footprint that a neighbour also covered and
   add back everything except the largest contribution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .descriptor import Patch
from .field import ScalarField, check_compatible, decay_coefficients

OVERLAP_TOL = 1e-12


@dataclass
class EstimatorState:
    I_hat: ScalarField
    d_tilde: ScalarField
    last_snapshot: Optional[ScalarField]
    t_last: float = 0.0

    @classmethod
    def initial(cls, I0: ScalarField, t0: float = 0.0) -> "EstimatorState":
        return cls(I0.copy(), ScalarField.zeros(I0.spec), I0.copy(), t0)

    def copy(self) -> "EstimatorState":
        snap = None if self.last_snapshot is None else self.last_snapshot.copy()
        return EstimatorState(self.I_hat.copy(), self.d_tilde.copy(), snap, self.t_last)


@dataclass(frozen=True)
class UpdateMessage:
    sender: int
    I_hat_snapshot: ScalarField
    d_tilde_o: Optional[ScalarField] = None


def propagate(est: EstimatorState, own_adf_raster: ScalarField, delta: float, dt: float) -> EstimatorState:
    check_compatible(est.I_hat, own_adf_raster)
    a, b = decay_coefficients(delta, dt)
    d = own_adf_raster.values
    return EstimatorState(
        ScalarField(est.I_hat.spec, a * est.I_hat.values + b * d),
        ScalarField(est.d_tilde.spec, a * est.d_tilde.values + b * d),
        est.last_snapshot,
        est.t_last,
    )


def propagate_patch(est: EstimatorState, patch: Patch, a: float, b: float) -> None:
    """In-place :func:`propagate` for a raster known only on a patch window.
    Gives bit-identical results to the full-grid form."""
    for f in (est.I_hat.values, est.d_tilde.values):
        f *= a
        f[patch.rows, patch.cols] += b * patch.values


def _decayed_snapshot(est: EstimatorState, delta: float, T: float) -> np.ndarray:
    if est.last_snapshot is None:
        raise ValueError("estimator has no snapshot from a previous update instant")
    return math.exp(delta * T) * est.last_snapshot.values


def correction_round1(est: EstimatorState, neighbor_snapshots: Sequence[UpdateMessage],
                      delta: float, T: float) -> ScalarField:
    base = _decayed_snapshot(est, delta, T)
    own = est.d_tilde.values > 0.0
    added = np.zeros_like(base)
    best = base.copy()
    for msg in neighbor_snapshots:
        check_compatible(est.I_hat, msg.I_hat_snapshot)
        other = msg.I_hat_snapshot.values
        added += np.maximum(0.0, other - base)
        np.maximum(best, other, out=best)
    return ScalarField(est.I_hat.spec, np.where(own, est.I_hat.values + added, best))


def compute_overlap(est: EstimatorState, neighbor_snapshots: Sequence[UpdateMessage],
                    delta: float, T: float) -> ScalarField:
    base = _decayed_snapshot(est, delta, T)
    overlap = np.zeros(base.shape, dtype=bool)
    for msg in neighbor_snapshots:
        overlap |= (msg.I_hat_snapshot.values - base) > OVERLAP_TOL
    return ScalarField(est.I_hat.spec, np.where(overlap, est.d_tilde.values, 0.0))


def correction_round2(est: EstimatorState, I_minus: ScalarField, neighbor_overlaps: Sequence,
                      t_k: Optional[float] = None) -> EstimatorState:
    """Finish the update and start a new period.

    ``neighbor_overlaps`` holds :class:`UpdateMessage` objects carrying
    ``d_tilde_o`` or bare :class:`ScalarField` objects.
    """
    own = est.d_tilde.values > 0.0
    fields = [m.d_tilde_o if isinstance(m, UpdateMessage) else m for m in neighbor_overlaps]
    out = I_minus.values.copy()
    if fields:
        check_compatible(I_minus, *fields)
        stack = np.stack([f.values for f in fields])
        extra = stack.sum(axis=0) - stack.max(axis=0)
        out = np.where(own, out, out + extra)
    I_new = ScalarField(I_minus.spec, out)
    return EstimatorState(
        I_new,
        ScalarField.zeros(I_minus.spec),
        I_new.copy(),
        est.t_last if t_k is None else t_k,
    )


def exactness_region(R_com: float, r_cov_max: float, N: int, ell_max_T: float) -> float:
    """Radius around an agent inside which its post-update estimate is exact.
    A non-positive value means the region is empty."""
    return R_com - r_cov_max - (N - 1) * ell_max_T
