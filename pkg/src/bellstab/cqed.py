"""Physical parameters and Hamiltonian builders for the dispersive system.

Frame convention: both qubits rotate at their zero-photon frequencies and the
cavity rotates at the mean of its gg and ee resonances.  In this frame the
dispersive coupling is

    H_disp = (chi_a sigma_z^a / 2 + chi_b sigma_z^b / 2) a'a

so |ee, n> sits at +(chi_a + chi_b) n / 2 and |gg, n> at the opposite energy,
while the odd states split by +/- (chi_a - chi_b) n / 2 (|eg, n> on the +
side; the opposite labeling is physically equivalent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Callable

import numpy as np

from . import qlin
from .lindblad import Dissipator
from .qlin import HilbertLayout, kron3

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SystemParams:
    """Hardware constants.  Frequencies in rad/us, times in us.

    The anharmonicities are recorded for documentation only; the qubits are
    modeled as two-level systems.
    """

    chi_a: float = TWO_PI * 5.0
    chi_b: float = TWO_PI * 4.5
    kappa: float = TWO_PI * 2.0
    t1_a: float = 60.0
    t1_b: float = 18.0
    t2_a: float = 9.0
    t2_b: float = 10.0
    thermal_pop_a: float = 0.05
    thermal_pop_b: float = 0.05
    eta: float = 0.30
    fock_dim: int = 20
    anharmonicity_a: float = TWO_PI * 212.0  # unused (two-level approximation)
    anharmonicity_b: float = TWO_PI * 209.0  # unused

    def __post_init__(self):
        for name in ("chi_a", "chi_b", "kappa", "t1_a", "t1_b", "t2_a", "t2_b"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.t2_a > 2 * self.t1_a or self.t2_b > 2 * self.t1_b:
            raise ValueError("T2 cannot exceed 2*T1")
        for name in ("thermal_pop_a", "thermal_pop_b", "eta"):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.fock_dim < 2:
            raise ValueError("fock_dim must be >= 2")

    @property
    def chi_mean(self) -> float:
        return 0.5 * (self.chi_a + self.chi_b)

    @property
    def layout(self) -> HilbertLayout:
        return HilbertLayout(cavity_dim=self.fock_dim)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SystemParams":
        return cls(**d)


class SpaceOps:
    """Operators promoted to the full qubit-qubit-cavity space."""

    def __init__(self, layout: HilbertLayout):
        self.layout = layout
        n = layout.cavity_dim
        i2 = qlin.IDENTITY_2
        icav = np.eye(n, dtype=complex)
        a_small = np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)
        self.a = kron3(i2, i2, a_small)
        self.ad = self.a.conj().T
        self.n_cav = self.ad @ self.a
        self.sz_a = kron3(qlin.SIGMA_Z, i2, icav)
        self.sz_b = kron3(i2, qlin.SIGMA_Z, icav)
        self.sp_a = kron3(qlin.SIGMA_PLUS, i2, icav)
        self.sp_b = kron3(i2, qlin.SIGMA_PLUS, icav)
        self.sm_a = self.sp_a.conj().T
        self.sm_b = self.sp_b.conj().T
        self.identity = kron3(i2, i2, icav)

    def qubit_unitary(self, u4: np.ndarray) -> np.ndarray:
        return np.kron(u4, np.eye(self.layout.cavity_dim, dtype=complex))


def build_h_disp(params: SystemParams, ops: SpaceOps | None = None) -> np.ndarray:
    ops = ops or SpaceOps(params.layout)
    return (0.5 * params.chi_a * ops.sz_a + 0.5 * params.chi_b * ops.sz_b) @ ops.n_cav


def build_parity_drive(eps_c: float, params: SystemParams,
                       ops: SpaceOps | None = None) -> Callable[[float], np.ndarray]:
    """Cavity drive 2 eps_c cos(chi_bar t) (a + a') addressing f_gg and f_ee."""
    ops = ops or SpaceOps(params.layout)
    quad = ops.a + ops.ad
    chi_bar = params.chi_mean

    def h(t: float) -> np.ndarray:
        return (2.0 * eps_c * math.cos(chi_bar * t)) * quad

    return h


def photons_to_amplitude(n_bar: float, params: SystemParams) -> float:
    """Steady-state photon target -> resonant drive amplitude kappa sqrt(n)/2."""
    if n_bar < 0:
        raise ValueError("n_bar must be >= 0")
    return 0.5 * params.kappa * math.sqrt(n_bar)


def bell_state(phase: float) -> np.ndarray:
    """(|ge> + e^{i phase} |eg>)/sqrt(2) in the (gg, ge, eg, ee) ordering."""
    return np.array([0.0, 1.0, np.exp(1.0j * phase), 0.0], dtype=complex) / math.sqrt(2.0)


BELL_MINUS = bell_state(math.pi)
BELL_PLUS = bell_state(0.0)


def bell_phase(rho_qubits: np.ndarray) -> float:
    """Phase of the odd-manifold coherence, i.e. phi of |ge> + e^{i phi} |eg>."""
    return float(np.angle(rho_qubits[2, 1]))


def dissipators(params: SystemParams, ops: SpaceOps | None = None) -> list[Dissipator]:
    """Cavity decay, qubit decay/excitation and pure dephasing channels.

    The upward rate is chosen so the single-qubit steady excited population
    equals the configured thermal population:
    gamma_up = p/T1, gamma_down = (1-p)/T1.
    """
    ops = ops or SpaceOps(params.layout)
    out = [Dissipator(ops.a, params.kappa)]
    for sm, sp, sz, t1, t2, pop in (
        (ops.sm_a, ops.sp_a, ops.sz_a, params.t1_a, params.t2_a, params.thermal_pop_a),
        (ops.sm_b, ops.sp_b, ops.sz_b, params.t1_b, params.t2_b, params.thermal_pop_b),
    ):
        gamma_phi = 1.0 / t2 - 0.5 / t1  # 1/T_phi = 1/T2 - 1/(2 T1)
        if gamma_phi < -1e-12:
            raise ValueError("negative pure dephasing rate")
        out.append(Dissipator(sm, (1.0 - pop) / t1))
        out.append(Dissipator(sp, pop / t1))
        out.append(Dissipator(sz, 0.5 * max(gamma_phi, 0.0)))
    return out


def thermal_qubit_populations(params: SystemParams) -> np.ndarray:
    pa, pb = params.thermal_pop_a, params.thermal_pop_b
    return np.kron(np.array([1 - pa, pa]), np.array([1 - pb, pb]))


def thermal_initial_state(params: SystemParams) -> np.ndarray:
    """Thermal product state of the qubits with the cavity in vacuum."""
    rho_q = np.diag(thermal_qubit_populations(params)).astype(complex)
    rho_c = np.zeros((params.fock_dim, params.fock_dim), dtype=complex)
    rho_c[0, 0] = 1.0
    return np.kron(rho_q, rho_c)


def vacuum_embed(rho_qubits: np.ndarray, params: SystemParams) -> np.ndarray:
    rho_c = np.zeros((params.fock_dim, params.fock_dim), dtype=complex)
    rho_c[0, 0] = 1.0
    return np.kron(np.asarray(rho_qubits, dtype=complex), rho_c)


def max_stable_dt(params: SystemParams) -> float:
    """Upper bound for the fixed RK4 step: fastest system scale / 20."""
    scales = (1.0 / params.kappa, params.t1_a, params.t1_b, params.t2_a,
              params.t2_b, TWO_PI / max(abs(params.chi_a), abs(params.chi_b)))
    return min(scales) / 20.0
