"""Fixed-step RK4 integration of the Lindblad master equation.

Segments carry a (possibly time-dependent) Hamiltonian in angular-frequency
units (rad/us) and a set of dissipators with rates in 1/us.  Jump operators
here are extremely sparse (local qubit/cavity ladder operators), so the
dissipative part of the right-hand side is evaluated with CSR matrices while
the Hamiltonian commutator uses dense BLAS products.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse

from .qlin import Operator

HamiltonianLike = np.ndarray | Operator | Callable[[float], np.ndarray]

TRACE_DRIFT_ABORT = 1e-6


class IntegrationError(RuntimeError):
    """Raised when trace drift indicates step-size instability."""


@dataclass(frozen=True)
class Dissipator:
    jump_operator: np.ndarray | Operator
    rate: float  # 1/us

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("dissipator rate must be >= 0")

    def matrix(self) -> np.ndarray:
        op = self.jump_operator
        return op.entries if isinstance(op, Operator) else np.asarray(op, dtype=complex)


@dataclass(frozen=True)
class EvolutionSegment:
    hamiltonian: HamiltonianLike
    dissipators: Sequence[Dissipator]
    duration: float  # us

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("segment duration must be >= 0")

    def hamiltonian_at(self, t: float) -> np.ndarray:
        h = self.hamiltonian
        if isinstance(h, Operator):
            return h.entries
        if callable(h):
            return np.asarray(h(t), dtype=complex)
        return np.asarray(h, dtype=complex)


@dataclass(frozen=True)
class Schedule:
    segments: Sequence[EvolutionSegment]

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration for s in self.segments))


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3  # us; 1 ns resolves chi-bar/2pi ~ 4.75 MHz and kappa/2pi = 2 MHz
    method: str = "rk4"

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.method != "rk4":
            raise ValueError(f"unsupported method {self.method!r}")


def lindblad_rhs(h: np.ndarray | Operator, dissipators: Sequence[Dissipator],
                 rho: np.ndarray) -> np.ndarray:
    """-i[H, rho] + sum_k rate_k (O rho O+ - 1/2 {O+O, rho})."""
    hm = h.entries if isinstance(h, Operator) else np.asarray(h, dtype=complex)
    r = np.asarray(rho, dtype=complex)
    if hm.shape != r.shape:
        raise ValueError("Hamiltonian and state dimensions differ")
    out = -1.0j * (hm @ r - r @ hm)
    for d in dissipators:
        o = d.matrix()
        if o.shape != r.shape:
            raise ValueError("jump operator and state dimensions differ")
        odo = o.conj().T @ o
        out += d.rate * (o @ r @ o.conj().T - 0.5 * (odo @ r + r @ odo))
    return out


class _DissipatorKernel:
    """Precomputed sparse form of the dissipative part of the RHS."""

    def __init__(self, dissipators: Sequence[Dissipator], dim: int):
        self.dim = dim
        scaled = []
        k = np.zeros((dim, dim), dtype=complex)
        for d in dissipators:
            if d.rate == 0.0:
                continue
            o = d.matrix()
            if o.shape != (dim, dim):
                raise ValueError("jump operator and state dimensions differ")
            scaled.append(np.sqrt(d.rate) * o)
            k += 0.5 * d.rate * (o.conj().T @ o)
        # X @ C+ is evaluated as (conj(C) @ X.T).T to keep the sparse operand
        # on the left, where scipy's CSR-times-dense kernel applies.
        self.jumps = [(sparse.csr_matrix(c), sparse.csr_matrix(c.conj())) for c in scaled]
        self.k_full = k  # 1/2 sum rate O+O
        off_diag = k - np.diag(np.diag(k))
        self.k_diag = np.diag(k).copy() if np.max(np.abs(off_diag)) == 0.0 else None

    def apply(self, rho: np.ndarray) -> np.ndarray:
        if self.k_diag is not None:
            # All built-in channels have diagonal O+O.
            out = -(self.k_diag[:, None] * rho) - (rho * self.k_diag[None, :])
        else:
            out = -(self.k_full @ rho) - (rho @ self.k_full)
        for c, cconj in self.jumps:
            x = c @ rho
            out += (cconj @ x.T).T
        return out


def _substep_count(duration: float, dt: float) -> int:
    return max(1, int(round(duration / dt)))


def evolve(rho0: np.ndarray, segment: EvolutionSegment,
           cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Propagate a density matrix (plain complex array) through one segment.

    The state is symmetrized each step to control Hermiticity drift; a trace
    drift beyond 1e-6 aborts with a diagnostic since it indicates an unstable
    step size.
    """
    rho = np.array(rho0, dtype=complex)
    if segment.duration == 0.0:
        return rho
    dim = rho.shape[0]
    n = _substep_count(segment.duration, cfg.dt)
    dt = segment.duration / n

    kernel = _DissipatorKernel(segment.dissipators, dim)
    h = segment.hamiltonian
    static_h = None
    if not callable(h) or isinstance(h, Operator):
        static_h = segment.hamiltonian_at(0.0)

    def rhs(t, r):
        hm = static_h if static_h is not None else np.asarray(h(t), dtype=complex)
        return -1.0j * (hm @ r - r @ hm) + kernel.apply(r)

    t = 0.0
    for _ in range(n):
        k1 = rhs(t, rho)
        k2 = rhs(t + dt / 2, rho + (dt / 2) * k1)
        k3 = rhs(t + dt / 2, rho + (dt / 2) * k2)
        k4 = rhs(t + dt, rho + dt * k3)
        rho = rho + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        t += dt
        drift = abs(np.trace(rho).real - 1.0)
        if drift > TRACE_DRIFT_ABORT:
            raise IntegrationError(
                f"trace drifted by {drift:.2e} at t={t:.4f} us "
                f"(dt={dt:.2e} us); reduce the step size"
            )
    return rho


def evolve_schedule(rho0: np.ndarray, schedule: Schedule,
                    cfg: IntegratorConfig = IntegratorConfig()):
    """Chain segments; returns [(time, rho)] checkpoints including t=0."""
    rho = np.array(rho0, dtype=complex)
    t = 0.0
    checkpoints = [(t, rho.copy())]
    for segment in schedule.segments:
        rho = evolve(rho, segment, cfg)
        t += segment.duration
        checkpoints.append((t, rho.copy()))
    return checkpoints
