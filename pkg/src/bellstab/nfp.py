"""Nested feedback protocol: real-time heralding on top of a stabilizer.

The stabilizer (either scheme) is treated as a 4-state Markov chain over
(phi-, phi+, gg, ee) with transition matrix T per attempt window.  After
each attempt the controller inspects the measurement record and heralds
success with a state-dependent probability, collected in the diagonal
herald matrix c.  Unheralded population is recycled through another
attempt:

    u_0 = S_0,   u_{k+1} = T (I - c) u_k,
    differential success p_k = ||c u_k||_1,
    heralded state at attempt k: c u_k / p_k.

Mass is conserved exactly: cumulative success through attempt k plus the
remaining unheralded mass ||u_{k+1}||_1 equals 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mb

# Herald acceptance probabilities per state, reference operating points.
HERALD_DD = np.array([0.26, 0.20, 0.19, 0.18])
HERALD_MB = np.array([0.68, 0.69, 0.19, 0.10])


def herald_matrix(diagonal) -> np.ndarray:
    d = np.asarray(diagonal, dtype=float)
    if d.shape != (4,):
        raise ValueError("herald diagonal must have 4 entries")
    if np.min(d) < 0 or np.max(d) > 1:
        raise ValueError("herald probabilities must lie in [0, 1]")
    return np.diag(d)


def herald_matrix_from_postselection(dist, thresholds) -> np.ndarray:
    """Herald matrix induced by classifying the measurement record odd."""
    from . import outcomes

    return herald_matrix(outcomes.reported_odd_probabilities(dist, thresholds))


@dataclass(frozen=True)
class NFPResult:
    attempts: np.ndarray             # 0..k_max
    differential_success: np.ndarray
    cumulative_success: np.ndarray
    fidelities: np.ndarray           # heralded phi- weight per attempt
    average_fidelity: float          # success-weighted over all attempts
    unheralded_mass: float           # after the last attempt
    states: np.ndarray = field(repr=False)  # u_k column per attempt


def nfp_recursion(transition: np.ndarray, herald: np.ndarray,
                  s0: np.ndarray | None = None, k_max: int = 11) -> NFPResult:
    """Run the herald/recycle recursion for k_max + 1 attempts."""
    mb.assert_stochastic(transition)
    c = np.asarray(herald, dtype=float)
    if c.shape == (4,):
        c = np.diag(c)
    if c.shape != (4, 4) or np.max(np.abs(c - np.diag(np.diag(c)))) > 0:
        raise ValueError("herald matrix must be diagonal 4x4")
    d = np.diag(c)
    if np.min(d) < 0 or np.max(d) > 1:
        raise ValueError("herald probabilities must lie in [0, 1]")
    if s0 is None:
        s0 = mb.steady_state(transition)
    s0 = np.asarray(s0, dtype=float)
    if np.min(s0) < 0 or abs(s0.sum() - 1.0) > 1e-9:
        raise ValueError("initial populations must be a probability vector")

    u = s0.copy()
    states, p_diff, fids = [], [], []
    for _ in range(k_max + 1):
        states.append(u.copy())
        w = d * u
        p = float(w.sum())
        p_diff.append(p)
        fids.append(float(w[0] / p) if p > 0 else math.nan)
        u = transition @ (u - w)
    p_diff = np.array(p_diff)
    cum = np.cumsum(p_diff)
    total = cum[-1]
    avg = float(np.nansum(p_diff * np.array(fids)) / total) if total > 0 else math.nan
    return NFPResult(np.arange(k_max + 1), p_diff, cum, np.array(fids),
                     avg, float(u.sum()), np.column_stack(states))


def average_heralded_fidelity(transition: np.ndarray, herald: np.ndarray,
                              s0: np.ndarray | None = None,
                              k_max: int = 11) -> float:
    return nfp_recursion(transition, herald, s0, k_max).average_fidelity


@dataclass(frozen=True)
class TrajectoryRecord:
    heralded: bool
    attempt: int          # attempt index at success, else k_max
    state_index: int      # true state when heralded, else last state


def sample_trajectories(transition: np.ndarray, herald: np.ndarray,
                        n_trajectories: int, rng: np.random.Generator,
                        s0: np.ndarray | None = None,
                        k_max: int = 11) -> list[TrajectoryRecord]:
    """Monte Carlo of the same process, for cross-checking the recursion."""
    mb.assert_stochastic(transition)
    d = np.diag(herald) if np.asarray(herald).ndim == 2 else np.asarray(herald, dtype=float)
    if s0 is None:
        s0 = mb.steady_state(transition)
    records = []
    for _ in range(n_trajectories):
        j = int(rng.choice(4, p=s0))
        rec = None
        for k in range(k_max + 1):
            if rng.random() < d[j]:
                rec = TrajectoryRecord(True, k, j)
                break
            j = int(rng.choice(4, p=transition[:, j]))
        records.append(rec or TrajectoryRecord(False, k_max, j))
    return records
