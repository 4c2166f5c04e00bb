"""The simulation loop.

One tick advances every agent by ``dt``:

1. neighbours trade poses and ADF parameters (fast channel);
2. each agent samples its ADF and builds its error field, from the true
   information (centralized) or from its own estimate plus the ADFs of its
   neighbours (decentralized);
3. coverage and avoidance gradients give the pseudo-accelerations;
4. the vehicles are integrated with the inputs held;
5. the true information field absorbs the coverage of the whole team;
6. every estimator absorbs its own agent's coverage;
7. at multiples of the update period the estimate exchange runs;
8. metrics are logged.

Steps 5 and 6 use the ADF samples taken at the start of the tick.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import field as fld
from .control import control_input, lyapunov_value, patch_coverage_gradient
from .descriptor import adf_patch
from .dynamics import AgentState, pose_map, step
from .errors import CollisionError, SimulationAborted
from .estimation import EstimatorState, exactness_region, propagate_patch
from .geometry import avoidance_terms
from .network import ExchangeStats, ProximityGraph, connectivity_check, exchange_fast, exchange_estimates
from .scenario import Scenario

log = logging.getLogger(__name__)

EXACT_TOL = 1e-6


@dataclass
class MetricsRow:
    t: float
    xi: float
    xi_norm: float
    xi_hat: list
    min_agent_dist: float
    min_obstacle_dist: float
    speeds: list
    V: float
    est_error: float
    connected: bool


@dataclass
class UpdateRecord:
    """What the estimate exchange achieved at one update instant."""

    t: float
    error_before: list  # per agent, max |I_hat - I|
    error_after: list
    exact_radius: list  # distance from each agent to its nearest cell with error >= EXACT_TOL


@dataclass
class Monitors:
    max_overestimate: float = -math.inf  # max of I_hat_i - I
    min_xi_gap: float = math.inf  # min of xi_hat_i - xi
    min_agent_dist: float = math.inf
    min_obstacle_dist: float = math.inf
    xi_norm_min: float = math.inf
    xi_norm_max: float = -math.inf
    ell_max_T: float = 0.0
    disconnected_ticks: int = 0
    max_shadow_du: float = 0.0  # decentralized vs centralized input, same state


@dataclass
class SimulationResult:
    scenario: Scenario
    rows: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)
    updates: list = field(default_factory=list)
    monitors: Monitors = field(default_factory=Monitors)
    states: list = field(default_factory=list)
    information: Optional[fld.ScalarField] = None
    estimators: list = field(default_factory=list)
    xi_max: float = 0.0
    exchange: ExchangeStats = field(default_factory=ExchangeStats)
    aborted: Optional[str] = None

    def r_star(self) -> float:
        s = self.scenario
        return exactness_region(s.comms.R_com, s.r_cov_max, len(s.agents), self.monitors.ell_max_T)

    def exactness_violations(self) -> list:
        """(t, agent) pairs where a cell within r* of the agent kept an error
        of at least EXACT_TOL after the exchange."""
        r = self.r_star()
        if r <= 0:
            return []
        return [(u.t, i) for u in self.updates for i, rad in enumerate(u.exact_radius) if rad <= r]

    def summary(self) -> dict:
        m = asdict(self.monitors)
        return {
            "scenario": self.scenario.name,
            "mode": self.scenario.mode,
            "aborted": self.aborted,
            "xi_max": self.xi_max,
            "monitors": m,
            "r_cov_max": self.scenario.r_cov_max,
            "r_star": self.r_star(),
            "update_instants": len(self.updates),
            "exactness_violations": len(self.exactness_violations()),
            "messages": self.exchange.messages,
            "message_bytes": self.exchange.bytes,
        }


def _add_window(target: np.ndarray, rows: slice, cols: slice, patch) -> None:
    """Add ``patch`` into ``target``, which covers grid window ``(rows, cols)``."""
    r0, r1 = max(rows.start, patch.rows.start), min(rows.stop, patch.rows.stop)
    c0, c1 = max(cols.start, patch.cols.start), min(cols.stop, patch.cols.stop)
    if r0 >= r1 or c0 >= c1:
        return
    target[r0 - rows.start:r1 - rows.start, c0 - cols.start:c1 - cols.start] += \
        patch.values[r0 - patch.rows.start:r1 - patch.rows.start, c0 - patch.cols.start:c1 - patch.cols.start]


class Simulation:
    """Holds the mutable state of one run; :func:`run` drives it."""

    def __init__(self, scenario: Scenario, shadow: bool = False):
        s = scenario
        self.shadow = shadow
        self.s = s
        self.grid = s.grid
        self.sigma = s.sigma_field().values
        self.penalty = s.penalty
        self.obstacles = s.all_obstacles
        self.models = [a.model for a in s.agents]
        self.specs = [a.descriptor for a in s.agents]
        self.supports = [a.support for a in s.agents]
        self.states = [a.state.copy() for a in s.agents]
        self.I = s.initial_field()
        self.estimators = [EstimatorState.initial(self.I) for _ in s.agents]
        self.a, self.b = fld.decay_coefficients(s.delta, s.dt)
        self.X, self.Y = self.grid.centers()
        self.xi_max = fld.error_index_bound(fld.ScalarField(self.grid, self.sigma), s.C_star, self.penalty)
        self.result = SimulationResult(s, xi_max=self.xi_max)
        self.period_path = np.zeros(len(s.agents))

    # -- per-tick pieces --------------------------------------------------

    def poses(self):
        return [pose_map(m, st) for m, st in zip(self.models, self.states)]

    def patches(self, poses):
        return [adf_patch(sp, p, su, self.grid) for sp, p, su in zip(self.specs, poses, self.supports)]

    def total_coverage(self, patches) -> np.ndarray:
        d = np.zeros(self.grid.shape)
        for p in patches:
            d[p.rows, p.cols] += p.values
        return d

    def visible_coverage(self, i, views, patches, d_total) -> np.ndarray:
        """Coverage known to agent i on the whole grid: its own ADF plus those
        of its neighbours."""
        ids = sorted([i] + [nb.agent_id for nb in views[i]])
        if len(ids) == len(patches):
            return d_total
        d = np.zeros(self.grid.shape)
        for j in ids:
            d[patches[j].rows, patches[j].cols] += patches[j].values
        return d

    def inputs(self, views, patches, d_total, avoid, mode):
        s = self.s
        area = self.grid.cell_area
        if mode == "centralized":
            d_star = np.maximum(0.0, s.C_star - self.I.values)
        u = []
        for i, p in enumerate(patches):
            win = (p.rows, p.cols)
            if mode == "centralized":
                e = d_star[win] - d_total[win]
            else:
                local = np.zeros(p.values.shape)
                for j in sorted([i] + [nb.agent_id for nb in views[i]]):
                    _add_window(local, p.rows, p.cols, patches[j])
                e = np.maximum(0.0, s.C_star - self.estimators[i].I_hat.values[win]) - local
            g = patch_coverage_gradient(p, e, self.sigma[win], self.penalty, area)
            u.append(control_input(self.models[i], self.states[i], s.gains, g, avoid.gradients[i]))
        return u

    def observe(self, t, graph, views, patches, d_total, avoid, log_row: bool):
        s, mon = self.s, self.result.monitors
        area = self.grid.cell_area
        e_true = np.maximum(0.0, s.C_star - self.I.values) - d_total
        xi = float(np.sum(fld.penalty(e_true, self.penalty) * self.sigma)) * area
        xi_hat = []
        for i, est in enumerate(self.estimators):
            mon.max_overestimate = max(mon.max_overestimate, float(np.max(est.I_hat.values - self.I.values)))
            e_hat = np.maximum(0.0, s.C_star - est.I_hat.values) - self.visible_coverage(i, views, patches, d_total)
            xh = float(np.sum(fld.penalty(e_hat, self.penalty) * self.sigma)) * area
            mon.min_xi_gap = min(mon.min_xi_gap, xh - xi)
            xi_hat.append(xh)
        mon.min_agent_dist = min(mon.min_agent_dist, avoid.min_agent)
        mon.min_obstacle_dist = min(mon.min_obstacle_dist, avoid.min_obstacle)
        xi_norm = xi / self.xi_max if self.xi_max > 0 else 0.0
        mon.xi_norm_min = min(mon.xi_norm_min, xi_norm)
        mon.xi_norm_max = max(mon.xi_norm_max, xi_norm)
        connected = connectivity_check(graph)
        if not connected:
            mon.disconnected_ticks += 1
        if not log_row:
            return
        speeds = [float(np.linalg.norm(st.v[:1] if st.x.size == 3 else st.v)) for st in self.states]
        V = lyapunov_value(xi, avoid.value, [st.v for st in self.states], s.gains)
        err = max((float(np.max(np.abs(est.I_hat.values - self.I.values))) for est in self.estimators),
                  default=0.0)
        self.result.rows.append(MetricsRow(t, xi, xi_norm, xi_hat, avoid.min_agent, avoid.min_obstacle,
                                           speeds, V, err, connected))
        self.result.trajectory.append(
            [t, xi] + [float(v) for st in self.states for v in np.concatenate([st.x, st.v])])

    def exchange(self, t_k):
        poses = self.poses()
        graph = ProximityGraph.from_poses(poses, self.s.comms.R_com)
        before = [float(np.max(np.abs(e.I_hat.values - self.I.values))) for e in self.estimators]
        self.estimators = exchange_estimates(self.estimators, graph, t_k, self.s.delta, self.result.exchange,
                                             T=self.s.comms.T)
        after, radius = [], []
        for est, p in zip(self.estimators, poses):
            err = np.abs(est.I_hat.values - self.I.values)
            after.append(float(np.max(err)))
            bad = err >= EXACT_TOL
            if np.any(bad):
                radius.append(float(np.sqrt(np.min((self.X[bad] - p.x) ** 2 + (self.Y[bad] - p.y) ** 2))))
            else:
                radius.append(math.inf)
        self.result.updates.append(UpdateRecord(t_k, before, after, radius))
        mon = self.result.monitors
        if len(self.period_path):
            mon.ell_max_T = max(mon.ell_max_T, float(np.max(self.period_path)))
        self.period_path[:] = 0.0

    def tick_state(self, t):
        """Everything derived from the configuration at time t."""
        poses = self.poses()
        graph = ProximityGraph.from_poses(poses, self.s.comms.R_com)
        views = exchange_fast(poses, self.specs, graph)
        patches = self.patches(poses)
        d_total = self.total_coverage(patches)
        try:
            avoid = avoidance_terms(poses, self.obstacles, self.s.safety)
        except CollisionError as exc:
            raise SimulationAborted(f"safety violation: {exc}", t) from exc
        return poses, graph, views, patches, d_total, avoid

    def run(self, dump_fields=None, dump_every: int = 0) -> SimulationResult:
        s = self.s
        n_steps = int(round(s.duration / s.dt))
        per_update = s.steps_per_update
        for k in range(n_steps):
            t = k * s.dt
            poses, graph, views, patches, d_total, avoid = self.tick_state(t)
            self.observe(t, graph, views, patches, d_total, avoid, log_row=(k % s.log_every == 0))
            if dump_fields is not None and dump_every and k % dump_every == 0:
                dump_fields(k, t, self)
            u = self.inputs(views, patches, d_total, avoid, s.mode)
            if self.shadow and s.mode == "decentralized":
                u_c = self.inputs(views, patches, d_total, avoid, "centralized")
                du = max((float(np.max(np.abs(a - b))) for a, b in zip(u, u_c)), default=0.0)
                self.result.monitors.max_shadow_du = max(self.result.monitors.max_shadow_du, du)

            old = [st.x[:2].copy() for st in self.states]
            self.states = [step(m, st, ui, s.dt) for m, st, ui in zip(self.models, self.states, u)]
            for i, st in enumerate(self.states):
                if not np.all(np.isfinite(st.x)) or not np.all(np.isfinite(st.v)):
                    raise SimulationAborted(f"non-finite state for agent {i}", t + s.dt)
                self.period_path[i] += math.hypot(*(st.x[:2] - old[i]))

            if not s.freeze_information:
                Iv = self.I.values
                Iv *= self.a
                Iv += self.b * d_total
                for est, p in zip(self.estimators, patches):
                    propagate_patch(est, p, self.a, self.b)
                if (k + 1) % per_update == 0:
                    self.exchange((k + 1) * s.dt)

        t_end = n_steps * s.dt
        poses, graph, views, patches, d_total, avoid = self.tick_state(t_end)
        self.observe(t_end, graph, views, patches, d_total, avoid, log_row=True)
        if dump_fields is not None and dump_every:
            dump_fields(n_steps, t_end, self)
        self.result.states = [st.copy() for st in self.states]
        self.result.information = self.I.copy()
        self.result.estimators = self.estimators
        return self.result


def run(scenario: Scenario, dump_fields=None, dump_every: int = 0, shadow: bool = False) -> SimulationResult:
    """Run a scenario to completion.

    With ``shadow`` a decentralized run also evaluates the centralized control
    law on the same state every tick and records the largest input gap in
    ``monitors.max_shadow_du``.

    Raises :class:`SimulationAborted` on a collision or a non-finite state;
    the partial result is attached to the exception as ``result``.
    """
    sim = Simulation(scenario, shadow)
    if sim.s.agents:
        sim.s.comms.check_footprint(sim.s.r_cov_max)
    try:
        return sim.run(dump_fields, dump_every)
    except SimulationAborted as exc:
        sim.result.aborted = str(exc)
        sim.result.states = [st.copy() for st in sim.states]
        sim.result.information = sim.I.copy()
        sim.result.estimators = sim.estimators
        exc.result = sim.result
        raise


# -- output files -----------------------------------------------------------

def metrics_header(n_agents: int) -> list:
    return (["t", "xi", "xi_norm"] + [f"xi_hat_{i}" for i in range(n_agents)]
            + ["min_agent_dist", "min_obstacle_dist"] + [f"speed_{i}" for i in range(n_agents)]
            + ["V", "est_error", "connected"])


def _g(v) -> str:
    return "%.9g" % v


def write_metrics(result: SimulationResult, path) -> None:
    n = len(result.scenario.agents)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(metrics_header(n))
        for r in result.rows:
            w.writerow([_g(r.t), _g(r.xi), _g(r.xi_norm)] + [_g(v) for v in r.xi_hat]
                       + [_g(r.min_agent_dist), _g(r.min_obstacle_dist)] + [_g(v) for v in r.speeds]
                       + [_g(r.V), _g(r.est_error), int(r.connected)])


def trajectory_header(scenario: Scenario) -> list:
    cols = ["t", "xi"]
    for i, a in enumerate(scenario.agents):
        names = ["x", "y", "theta"][:a.model.nx] + (["vx", "vy"] if a.model.nv == 2 and a.model.nx == 2 else ["v", "w"])
        cols += [f"{n}_{i}" for n in names]
    return cols


def write_trajectory(result: SimulationResult, path) -> None:
    """Full-precision states, for tight oracle comparisons."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(result.scenario))
        for row in result.trajectory:
            w.writerow(["%.17g" % v for v in row])


def write_updates(result: SimulationResult, path) -> None:
    n = len(result.scenario.agents)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"err_before_{i}" for i in range(n)] + [f"err_after_{i}" for i in range(n)]
                   + [f"exact_radius_{i}" for i in range(n)])
        for u in result.updates:
            w.writerow([_g(u.t)] + [_g(v) for v in u.error_before + u.error_after + u.exact_radius])


def write_outputs(result: SimulationResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(result, out / "metrics.csv")
    write_trajectory(result, out / "trajectory.csv")
    write_updates(result, out / "updates.csv")
    (out / "summary.json").write_text(json.dumps(result.summary(), indent=2, default=float) + "\n")


def field_dumper(out_dir):
    """Callback for :func:`run` that writes I and every estimate."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def dump(k, t, sim: Simulation):
        fld.write_field(out / f"I_{k:07d}.txt", "I", sim.I)
        for i, est in enumerate(sim.estimators):
            fld.write_field(out / f"I_hat_{i}_{k:07d}.txt", f"I_hat_{i}", est.I_hat)

    return dump
