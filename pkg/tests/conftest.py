import math
import sys
from dataclasses import replace

import numpy as np
import pytest

from starsim.channel import ChannelRealization, Side
from starsim.core import OperatingProtocol, PhaseShiftModel, ProtocolKind, SurfaceConfig
from starsim.optim import Objective
from starsim.scenarios import build_problem, default_scenario

NOISE = 1e-11


def se_problem(seed=0, model=PhaseShiftModel.COUPLED, m=16, n=4, budget=1.0,
               kind=ProtocolKind.ENERGY_SPLITTING):
    """Sum-SE problem drawn from the desk-scale scenario."""
    lam = default_scenario().wavelength
    surf = SurfaceConfig.planar(m, int(math.isqrt(m)) if math.isqrt(m) ** 2 == m else m,
                                lam / 2, model=model, protocol=OperatingProtocol(kind))
    sc = default_scenario(surface=surf, n_bs_antennas=n, power_budget=budget, seed=seed)
    return build_problem(sc, 0, Objective.SUM_SPECTRAL_EFFICIENCY)


def power_problem(seed=0, m=8, targets=(10.0, 10.0), n=1, direct=False,
                  model=PhaseShiftModel.COUPLED):
    lam = default_scenario().wavelength
    surf = SurfaceConfig.planar(m, m, lam / 2, model=model)
    sc = default_scenario(surface=surf, n_bs_antennas=n, seed=seed, direct_link=direct)
    sc = replace(sc, users=tuple(replace(u, sinr_target=t) for u, t in zip(sc.users, targets)))
    return build_problem(sc, 0, Objective.TRANSMIT_POWER)


def random_channel(m=2, n=2, k=2, seed=0, sides=None):
    rng = np.random.default_rng(seed)

    def cn(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

    sides = sides or tuple(Side.TRANSMISSION if i % 2 == 0 else Side.REFLECTION for i in range(k))
    return ChannelRealization(cn(m, n), cn(k, m), cn(k, n), sides)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    def number(line):
        return int(line.split("criterion")[1].split(":")[0])

    for line in sorted(acceptance.RESULTS, key=number):
        terminalreporter.write_line(line)
