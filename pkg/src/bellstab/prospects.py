"""Projected performance under improved hardware.

Three scenarios are compared: the present hardware, doubled measurement
efficiency (which halves the integration time needed for the same misreport
rates and shortens the controller latency), and additionally improved qubit
coherence.  Each scenario reports the steady-state singlet fidelity of both
stabilization schemes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import cqed, dd, mb
from .cqed import SystemParams
from .lindblad import IntegratorConfig


@dataclass(frozen=True)
class Scenario:
    name: str
    params: SystemParams
    timing: mb.StepTiming
    parity_model: mb.ParityModel
    dd_config: dd.DDDriveConfig


def default_scenarios() -> list[Scenario]:
    base = SystemParams()
    fast = mb.StepTiming(pulse_decay=0.154, measurement=0.33, latency=0.586)
    return [
        Scenario("baseline", base, mb.StepTiming(), mb.ParityModel(),
                 dd.DDDriveConfig()),
        Scenario("efficiency_x2", replace(base, eta=0.60), fast,
                 mb.ParityModel(duration=0.33), dd.DDDriveConfig()),
        Scenario("efficiency_x2_coherence",
                 replace(base, eta=0.60, t1_a=100.0, t1_b=100.0,
                         t2_a=100.0, t2_b=100.0),
                 fast, mb.ParityModel(duration=0.33), dd.DDDriveConfig()),
    ]


@dataclass(frozen=True)
class ProspectRow:
    scenario: str
    mb_fidelity: float
    dd_fidelity: float
    mb_tau: float
    dd_tau: float


def run_prospects(scenarios: Sequence[Scenario] | None = None,
                  cfg: IntegratorConfig = IntegratorConfig(),
                  dd_t_grid=None) -> list[ProspectRow]:
    rows = []
    for sc in scenarios or default_scenarios():
        t = mb.build_transition_matrix(sc.params, sc.parity_model, sc.timing, cfg)
        steady = mb.steady_state(t)
        lams = np.sort(np.abs(np.linalg.eigvals(t)))[::-1]
        mb_tau = sc.timing.total / (-np.log(lams[1])) if lams[1] > 0 else np.nan
        grid = dd_t_grid if dd_t_grid is not None else np.linspace(0.0, 8.0, 9)
        res = dd.simulate_dd(sc.params, sc.dd_config, grid, cfg, readout_wait=False)
        rows.append(ProspectRow(sc.name, float(steady[0]), res.f_ss,
                                float(mb_tau), res.tau))
    return rows
