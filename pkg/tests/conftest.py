import copy

import pytest

from persistcov.scenario import scenario_from_dict

BASE = {
    "name": "small",
    "area": {"origin": [0.0, 0.0], "width": 40.0, "height": 40.0, "cell_size": 1.0},
    "sigma": 1.0,
    "C_star": 1.0,
    "delta": -0.1,
    "penalty_p": 2,
    "safety": {"r": 0.5, "R": 3.0},
    "comms": {"R_com": 150.0, "T": 1.0},
    "gains": {"beta": 30.0, "gamma": 30.0, "mu": 20.0},
    "dt": 0.02,
    "duration": 2.0,
    "log_every": 5,
    "mode": "decentralized",
    "initial_information": 0.0,
    "freeze_information": False,
    "virtual_walls": True,
    "obstacles": [],
    "agents": [],
}

GAUSS = {"kind": "gaussian", "A": 3.0, "sigma2": [3.0, 3.0]}
FOV = {"kind": "gaussian_fov", "A": 3.0, "sigma2": [3.0, 3.0], "k": 2.0, "phi": 1.5707963267948966}


def di(x, y, v=(0.0, 0.0), **extra):
    return {"model": {"kind": "double_integrator", "mass": 1.0}, "x": [x, y], "v": list(v),
            "descriptor": dict(GAUSS), **extra}


def uni(x, y, th, v=(0.0, 0.0), **extra):
    return {"model": {"kind": "dynamic_unicycle", "mass": 1.0, "inertia": 1.0}, "x": [x, y, th],
            "v": list(v), "descriptor": dict(FOV), **extra}


def scenario_dict(**overrides):
    data = copy.deepcopy(BASE)
    data.update(overrides)
    return data


@pytest.fixture
def make_scenario():
    def build(**overrides):
        return scenario_from_dict(scenario_dict(**overrides))
    return build


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
