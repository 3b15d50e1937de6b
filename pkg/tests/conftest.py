import copy
import json

import numpy as np
import pytest

from georiemann import PhaseState, desk3
from georiemann.model import ModelConfig, desk3_path

# Right-hand data of the two documented constructions, frozen from
# bl_tangent_partners at the solver's intermediate state (C or B).
LEFT = PhaseState(0.99, (0.03, 2.74), 1.0)
CROSS_R = (0.03262684699558198, 0.3, 3.9)
SHARED_R = (0.05223406091794488, 0.03, 3.9)


def desk3_dict():
    with open(desk3_path()) as fh:
        return json.load(fh)


def model_variant(**changes):
    d = copy.deepcopy(desk3_dict())
    d.update(changes)
    return d


def variable_rock_dict():
    # rock adsorption grows with y1 (species 3) and y2 (species 4), so tau does not vanish
    d = desk3_dict()
    d["name"] = "DESK3-adsorbing"
    d["species"][2]["rho_r"] = [[0.01, [0, 0]], [0.05, [1, 0]]]
    d["species"][3]["rho_r"] = [[0.02, [0, 0]], [0.03, [0, 1]]]
    return d


def two_species_dict():
    return {
        "name": "binary", "n": 2, "porosity": 0.3, "mu_w": 0.001, "mu_o": 0.002,
        "s_wc": 0.0, "lambda_bc": 2.0, "domain": [[0.5, 2.0]],
        "species": [
            {"rho_w": [[1.0, [1]]], "rho_o": 0.0, "rho_r": 0.0},
            {"rho_w": 0.5, "rho_o": [[1.0, [0]], [0.2, [1]]], "rho_r": [[0.05, [1]]]},
            {"rho_w": 0.0, "rho_o": 0.9, "rho_r": 0.0},
        ],
    }


@pytest.fixture(scope="session")
def cfg():
    return desk3()


@pytest.fixture(scope="session")
def rock_cfg():
    return ModelConfig.from_dict(variable_rock_dict())


@pytest.fixture(scope="session")
def binary_cfg():
    return ModelConfig.from_dict(two_species_dict())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def cross_solution(cfg):
    from georiemann import solve_riemann
    return solve_riemann(LEFT, CROSS_R, cfg)


@pytest.fixture(scope="session")
def shared_solution(cfg):
    from georiemann import solve_riemann
    return solve_riemann(LEFT, SHARED_R, cfg)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
