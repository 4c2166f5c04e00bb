"""Scenario files.

A scenario is a JSON document::

    {
      "name": "paper_sec5",
      "area": {"origin": [0, 0], "width": 100, "height": 100, "cell_size": 1.0},
      "sigma": 1.0,                     # uniform importance weight
      "C_star": 1.0,
      "delta": -0.1,
      "penalty_p": 2,
      "safety": {"r": 0.5, "R": 3.0},
      "comms": {"R_com": 150.0, "T": 1.0},
      "gains": {"beta": 30.0, "gamma": 30.0, "mu": 20.0},
      "dt": 0.02,
      "duration": 200.0,
      "log_every": 10,
      "mode": "decentralized",          # or "centralized"
      "initial_information": 0.0,       # number, or path to a field dump
      "freeze_information": false,      # keep I at its initial value
      "virtual_walls": true,            # four 1 m thick walls around the area
      "obstacles": [[[x, y], ...], ...],  # convex polygons, CCW
      "agents": [
        {"model": {"kind": "double_integrator", "mass": 1.0},
         "x": [10, 10], "v": [0, 0],
         "descriptor": {"kind": "gaussian", "A": 3.0, "sigma2": [3.0, 3.0]},
         "epsilon": 0.03}              # optional, defaults to 0.01 * A
      ]
    }

:func:`save_scenario` writes the canonical form, so load -> save -> load is
lossless and saving twice gives identical bytes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .control import ControlGains
from .descriptor import DescriptorSpec, SupportSpec, spec_from_dict, spec_to_dict, support_radius
from .dynamics import AgentModel, AgentState, model_from_dict, model_to_dict, pose_map
from .errors import ScenarioError
from .field import GridSpec, PenaltySpec, ScalarField, read_field
from .geometry import ConvexObstacle, SafetyParams, min_distances, virtual_walls
from .network import CommsConfig

MODES = ("centralized", "decentralized")


@dataclass
class AgentConfig:
    model: AgentModel
    state: AgentState
    descriptor: DescriptorSpec
    epsilon: Optional[float] = None

    @property
    def support(self) -> SupportSpec:
        if self.epsilon is None:
            return SupportSpec.default_for(self.descriptor)
        return SupportSpec(self.epsilon)


@dataclass
class Scenario:
    name: str
    origin: tuple
    width: float
    height: float
    cell_size: float
    sigma: float
    C_star: float
    delta: float
    penalty_p: int
    safety: SafetyParams
    comms: CommsConfig
    gains: ControlGains
    dt: float
    duration: float
    agents: list = field(default_factory=list)
    obstacles: list = field(default_factory=list)
    virtual_walls: bool = True
    mode: str = "decentralized"
    log_every: int = 10
    initial_information: Union[float, str] = 0.0
    freeze_information: bool = False
    base_dir: Optional[Path] = field(default=None, compare=False, repr=False)

    @property
    def grid(self) -> GridSpec:
        return GridSpec.from_cell_size(self.origin, self.width, self.height, self.cell_size)

    @property
    def penalty(self) -> PenaltySpec:
        return PenaltySpec(self.penalty_p)

    @property
    def all_obstacles(self) -> list:
        walls = virtual_walls(self.origin, self.width, self.height) if self.virtual_walls else []
        return walls + list(self.obstacles)

    @property
    def steps_per_update(self) -> int:
        return int(round(self.comms.T / self.dt))

    @property
    def r_cov_max(self) -> float:
        return max((support_radius(a.descriptor, a.support) for a in self.agents), default=0.0)

    def sigma_field(self) -> ScalarField:
        return ScalarField.full(self.grid, self.sigma)

    def initial_field(self) -> ScalarField:
        if isinstance(self.initial_information, str):
            path = Path(self.initial_information)
            if not path.is_absolute() and self.base_dir is not None:
                path = self.base_dir / path
            _, f = read_field(path)
            if f.spec != self.grid:
                raise ScenarioError(f"initial information field {path} does not match the scenario grid")
            return f
        return ScalarField.full(self.grid, float(self.initial_information))

    def with_overrides(self, **kw) -> "Scenario":
        return replace(self, **kw)


def _num(data, key, problems, default=None):
    if key not in data:
        if default is None:
            problems.append(f"missing field '{key}'")
            return math.nan
        return default
    try:
        return float(data[key])
    except (TypeError, ValueError):
        problems.append(f"field '{key}' is not a number: {data[key]!r}")
        return math.nan


def _build(ctor, problems, what, *args):
    try:
        return ctor(*args)
    except (ValueError, TypeError, KeyError) as exc:
        problems.append(f"{what}: {exc}")
        return None


def scenario_from_dict(data: dict, base_dir: Optional[Path] = None) -> Scenario:
    problems: list[str] = []
    area = data.get("area", {})
    safety = data.get("safety", {})
    comms = data.get("comms", {})
    gains = data.get("gains", {})
    sp = _build(SafetyParams, problems, "safety", _num(safety, "r", problems), _num(safety, "R", problems))
    cc = _build(CommsConfig, problems, "comms", _num(comms, "R_com", problems), _num(comms, "T", problems))
    cg = _build(ControlGains, problems, "gains", _num(gains, "beta", problems),
                _num(gains, "gamma", problems), _num(gains, "mu", problems))

    agents = []
    for n, a in enumerate(data.get("agents", [])):
        model = _build(model_from_dict, problems, f"agent {n} model", a.get("model", {}))
        desc = _build(spec_from_dict, problems, f"agent {n} descriptor", a.get("descriptor", {}))
        state = _build(AgentState, problems, f"agent {n} state", a.get("x"), a.get("v"))
        if model is not None and state is not None:
            if len(state.x) != model.nx or len(state.v) != model.nv:
                problems.append(f"agent {n}: {model.kind} needs x of length {model.nx} and v of length {model.nv}")
                state = None
        eps = a.get("epsilon")
        agents.append(AgentConfig(model, state, desc, None if eps is None else float(eps)))

    obstacles = [_build(ConvexObstacle, problems, f"obstacle {k}", tuple(map(tuple, verts)))
                 for k, verts in enumerate(data.get("obstacles", []))]

    init = data.get("initial_information", 0.0)
    scenario = Scenario(
        name=str(data.get("name", "scenario")),
        origin=tuple(float(v) for v in area.get("origin", (0.0, 0.0))),
        width=_num(area, "width", problems),
        height=_num(area, "height", problems),
        cell_size=_num(area, "cell_size", problems),
        sigma=_num(data, "sigma", problems, 1.0),
        C_star=_num(data, "C_star", problems),
        delta=_num(data, "delta", problems),
        penalty_p=data.get("penalty_p", 2),
        safety=sp,
        comms=cc,
        gains=cg,
        dt=_num(data, "dt", problems),
        duration=_num(data, "duration", problems),
        agents=agents,
        obstacles=obstacles,
        virtual_walls=bool(data.get("virtual_walls", True)),
        mode=data.get("mode", "decentralized"),
        log_every=data.get("log_every", 10),
        initial_information=init if isinstance(init, str) else float(init),
        freeze_information=bool(data.get("freeze_information", False)),
        base_dir=base_dir,
    )
    problems.extend(validation_problems(scenario))
    if problems:
        raise ScenarioError(problems)
    return scenario


def validation_problems(s: Scenario) -> list[str]:
    """Every violated invariant of an assembled scenario."""
    out = []
    try:
        s.grid
    except (ValueError, ZeroDivisionError) as exc:
        out.append(f"area: {exc}")
    if not s.sigma >= 0:
        out.append("sigma must be >= 0")
    if not s.C_star > 0:
        out.append("C_star must be > 0")
    if not s.delta <= 0:
        out.append("delta must be <= 0 (information decays)")
    if not (isinstance(s.penalty_p, int) and s.penalty_p >= 2):
        out.append(f"penalty_p must be an integer >= 2, got {s.penalty_p!r}")
    if not s.dt > 0:
        out.append("dt must be > 0")
    if not s.duration > 0:
        out.append("duration must be > 0")
    if s.mode not in MODES:
        out.append(f"mode must be one of {MODES}, got {s.mode!r}")
    if not (isinstance(s.log_every, int) and s.log_every >= 1):
        out.append("log_every must be a positive integer")
    if s.comms is not None and s.dt > 0:
        ratio = s.comms.T / s.dt
        if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            out.append(f"update period T = {s.comms.T} is not an integer multiple of dt = {s.dt}")
    if any(o is None for o in s.obstacles) or any(
            a.model is None or a.state is None or a.descriptor is None for a in s.agents):
        return out  # already reported while parsing

    for n, a in enumerate(s.agents):
        try:
            support_radius(a.descriptor, a.support)
        except ValueError as exc:
            out.append(f"agent {n}: {exc}")
        x, y = a.state.x[0], a.state.x[1]
        if not (s.origin[0] < x < s.origin[0] + s.width and s.origin[1] < y < s.origin[1] + s.height):
            out.append(f"agent {n} starts outside the area at ({x}, {y})")

    if s.safety is not None and s.agents:
        poses = [pose_map(a.model, a.state) for a in s.agents]
        ma, mo = min_distances(poses, s.all_obstacles)
        if ma <= s.safety.r:
            out.append(f"initial deployment unsafe: two agents are {ma:.6g} apart, need > r = {s.safety.r} "
                       "(the collision-free guarantee requires a safe start)")
        if mo <= s.safety.r:
            out.append(f"initial deployment unsafe: an agent is {mo:.6g} from an obstacle, need > r = {s.safety.r} "
                       "(the collision-free guarantee requires a safe start)")
    return out


def scenario_to_dict(s: Scenario) -> dict:
    agents = []
    for a in s.agents:
        entry = {
            "model": model_to_dict(a.model),
            "x": [float(v) for v in a.state.x],
            "v": [float(v) for v in a.state.v],
            "descriptor": spec_to_dict(a.descriptor),
        }
        if a.epsilon is not None:
            entry["epsilon"] = a.epsilon
        agents.append(entry)
    return {
        "name": s.name,
        "area": {"origin": list(s.origin), "width": s.width, "height": s.height, "cell_size": s.cell_size},
        "sigma": s.sigma,
        "C_star": s.C_star,
        "delta": s.delta,
        "penalty_p": s.penalty_p,
        "safety": {"r": s.safety.r, "R": s.safety.R},
        "comms": {"R_com": s.comms.R_com, "T": s.comms.T},
        "gains": {"beta": s.gains.beta, "gamma": s.gains.gamma, "mu": s.gains.mu},
        "dt": s.dt,
        "duration": s.duration,
        "log_every": s.log_every,
        "mode": s.mode,
        "initial_information": s.initial_information,
        "freeze_information": s.freeze_information,
        "virtual_walls": s.virtual_walls,
        "obstacles": [[list(v) for v in o.vertices] for o in s.obstacles],
        "agents": agents,
    }


def dumps_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2) + "\n"


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(s))


def bundled_scenarios() -> list[str]:
    pkg = resources.files("persistcov") / "scenarios"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".json"))


def load_scenario(path) -> Scenario:
    """Load a scenario file, or a bundled scenario by name (``paper_sec5``)."""
    p = Path(path)
    if p.exists():
        text, base = p.read_text(), p.resolve().parent
    elif str(path) in bundled_scenarios():
        text = (resources.files("persistcov") / "scenarios" / f"{path}.json").read_text()
        base = None
    else:
        raise FileNotFoundError(f"no scenario file or bundled scenario named {str(path)!r}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON: {exc}") from exc
    return scenario_from_dict(data, base)
