"""Measurement-based stabilization: quasi-parity measurement, conditional
unitaries, the piecewise four-segment correction step, and the 4-state
Markov reduction.

A correction step is: instantaneous conditional unitary -> free decay while
the pulses would play (154 ns) -> quasi-parity measurement with the cavity
drives on (660 ns) -> free decay during the controller latency (686 ns).

The 4-state reduction tracks populations over (phi-, phi+, gg, ee); Bell
basis coherences are dropped at step boundaries and the residual coherence
norm is reported as a model diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import cqed, qlin
from .cqed import SpaceOps, SystemParams
from .lindblad import Dissipator, EvolutionSegment, IntegratorConfig, evolve
from .qlin import partial_trace_cavity_array

# Basis change from the computational (gg, ge, eg, ee) basis to the
# population basis (phi-, phi+, gg, ee); columns are the basis states.
BELL_BASIS = np.column_stack([
    cqed.BELL_MINUS,
    cqed.BELL_PLUS,
    np.array([1.0, 0.0, 0.0, 0.0], dtype=complex),
    np.array([0.0, 0.0, 0.0, 1.0], dtype=complex),
])

P_ODD = np.diag([0.0, 1.0, 1.0, 0.0]).astype(complex)
P_GG = np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex)
P_EE = np.diag([0.0, 0.0, 0.0, 1.0]).astype(complex)

STOCHASTIC_TOL = 1e-9


class DegenerateChainError(RuntimeError):
    """The unit eigenvalue of a transition matrix is not simple."""


@dataclass(frozen=True)
class ParityModel:
    """Quasi-parity measurement: strength, duration, misreport rates and the
    deterministic AC-Stark Bell-phase shift accrued per step.

    ``phi_d = None`` means "extract from simulation" (see
    :func:`extract_stark_phase`).
    """

    duration: float = 0.66         # us
    n_bar_meas: float = 4.5        # photons per readout tone
    eps_eo: float = 0.04           # P(report even | odd state)
    eps_oe: float = 0.05           # P(report odd | even state)
    phi_d: float | None = None     # rad per step

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("measurement duration must be positive")
        for name in ("eps_eo", "eps_oe"):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in [0, 1)")


@dataclass(frozen=True)
class StepTiming:
    pulse_decay: float = 0.154  # us
    measurement: float = 0.66
    latency: float = 0.686

    def __post_init__(self):
        if min(self.pulse_decay, self.measurement, self.latency) < 0:
            raise ValueError("segment durations must be >= 0")

    @property
    def total(self) -> float:
        # Unitaries are instantaneous, so the step is exactly the sum.
        return self.pulse_decay + self.measurement + self.latency


def bell_basis_populations(rho_qubits: np.ndarray) -> np.ndarray:
    """Diagonal of a 4x4 qubit density matrix in the (phi-, phi+, gg, ee) basis."""
    return np.real(np.diag(BELL_BASIS.conj().T @ rho_qubits @ BELL_BASIS))


def bell_coherence_residual(rho_qubits: np.ndarray) -> float:
    """Frobenius norm of what the 4-state reduction discards."""
    m = BELL_BASIS.conj().T @ rho_qubits @ BELL_BASIS
    return float(np.linalg.norm(m - np.diag(np.diag(m))))


def assert_stochastic(t: np.ndarray, tol: float = STOCHASTIC_TOL) -> None:
    if t.shape != (4, 4):
        raise ValueError("transition matrix must be 4x4")
    if np.min(t) < -tol:
        raise ValueError("transition matrix has negative entries")
    if np.max(np.abs(t.sum(axis=0) - 1.0)) > tol:
        raise ValueError("transition matrix columns do not sum to 1")


def steady_state(t: np.ndarray) -> np.ndarray:
    """Unit-eigenvalue eigenvector of a column-stochastic 4x4 matrix.

    Cross-checked against power iteration; a degenerate unit eigenvalue is
    reported instead of silently resolved.
    """
    assert_stochastic(t)
    values, vectors = np.linalg.eig(t)
    unit = np.where(np.abs(values - 1.0) < 1e-9)[0]
    if len(unit) == 0:
        raise ValueError("no unit eigenvalue found")
    if len(unit) > 1:
        raise DegenerateChainError(
            f"unit eigenvalue has multiplicity {len(unit)}; steady state is not unique")
    v = np.real(vectors[:, unit[0]])
    if np.min(v) < -1e-12 * max(1.0, abs(np.sum(v))):
        v = -v
    v = np.clip(v, 0.0, None)
    v = v / np.sum(v)

    power = np.array([1.0, 0.0, 0.0, 0.0])
    for _ in range(20000):
        nxt = t @ power
        if np.max(np.abs(nxt - power)) < 1e-14:
            power = nxt
            break
        power = nxt
    if np.max(np.abs(power - v)) > 1e-10:
        raise ValueError("eigenvector and power iteration disagree")
    return v


def build_conditional_unitaries(phi_o: float, z_correction: float):
    """The conditional correction unitaries (U_E, U_O) as 4x4 qubit matrices.

    U_O = [Rx_a(pi/2) (x) R_{phi_o},b(pi/2)] . [I (x) Rz_b(z_correction)] and
    U_E = Rx_a(pi/2) (x) R_{phi_o + pi},b(pi/2).  In this package's rotation
    convention the odd Bell state |ge> + e^{i(phi_o + pi)} |eg> is the
    eigenstate of U_O's rotation part, and U_E followed by an ideal odd
    projection sends either even state onto that same Bell state (at phi_o=0
    these reduce to the identical-phase / opposite-phase pi/2 pulse pairs).
    """
    rx_a = qlin.qubit_rotation(0.0, math.pi / 2.0)
    u_o = np.kron(rx_a, qlin.qubit_rotation(phi_o, math.pi / 2.0))
    if z_correction != 0.0:
        u_o = u_o @ np.kron(qlin.IDENTITY_2, qlin.rotation_z(z_correction))
    u_e = np.kron(rx_a, qlin.qubit_rotation(phi_o + math.pi, math.pi / 2.0))
    return u_e, u_o


def parity_project(rho_full: np.ndarray, fock_dim: int) -> np.ndarray:
    """Collapse onto the quasi-parity outcome subspaces (qubit factor only)."""
    icav = np.eye(fock_dim, dtype=complex)
    out = np.zeros_like(rho_full)
    for p in (P_ODD, P_GG, P_EE):
        pf = np.kron(p, icav)
        out += pf @ rho_full @ pf
    return out


def apply_quasi_parity(rho_full: np.ndarray, parity_model: ParityModel,
                       fock_dim: int):
    """Measure; returns [(reported outcome, probability, post state)].

    The post states follow the true projection; misreporting only mislabels
    the outcome (output-chain noise does not alter the back-action).  Odd
    states misreported as even are split equally between the even_gg and
    even_ee labels.  Zero-probability branches are omitted.
    """
    icav = np.eye(fock_dim, dtype=complex)
    true_branches = {}
    for name, p in (("odd", P_ODD), ("gg", P_GG), ("ee", P_EE)):
        pf = np.kron(p, icav)
        post = pf @ rho_full @ pf
        prob = float(np.real(np.trace(post)))
        if prob > 1e-12:
            true_branches[name] = (prob, post / prob)

    eps_eo, eps_oe = parity_model.eps_eo, parity_model.eps_oe
    reported: dict[str, tuple[float, np.ndarray]] = {}

    def add(label, prob, state):
        if prob <= 0.0:
            return
        if label in reported:
            p0, s0 = reported[label]
            reported[label] = (p0 + prob, (p0 * s0 + prob * state) / (p0 + prob))
        else:
            reported[label] = (prob, state)

    if "odd" in true_branches:
        prob, state = true_branches["odd"]
        add("odd", prob * (1 - eps_eo), state)
        add("even_gg", prob * eps_eo / 2.0, state)
        add("even_ee", prob * eps_eo / 2.0, state)
    for name in ("gg", "ee"):
        if name in true_branches:
            prob, state = true_branches[name]
            add(f"even_{name}", prob * (1 - eps_oe), state)
            add("odd", prob * eps_oe, state)
    return [(label, prob, state) for label, (prob, state) in reported.items()]


def _step_segments(params: SystemParams, parity_model: ParityModel,
                   timing: StepTiming, ops: SpaceOps):
    h_disp = cqed.build_h_disp(params, ops)
    diss = cqed.dissipators(params, ops)
    eps_c = cqed.photons_to_amplitude(parity_model.n_bar_meas, params)
    drive = cqed.build_parity_drive(eps_c, params, ops)

    def h_meas(t):
        return h_disp + drive(t)

    decay = EvolutionSegment(h_disp, diss, timing.pulse_decay)
    measurement = EvolutionSegment(h_meas, diss, timing.measurement)
    latency = EvolutionSegment(h_disp, diss, timing.latency)
    return decay, measurement, latency


def extract_stark_phase(params: SystemParams,
                        parity_model: ParityModel,
                        timing: StepTiming = StepTiming(),
                        cfg: IntegratorConfig = IntegratorConfig()) -> float:
    """Deterministic Bell-phase shift accrued over one correction step.

    Simulates the measurement and latency segments (where the readout photons
    live) from |phi-> and reads the drift of the odd-coherence phase.
    """
    ops = SpaceOps(params.layout)
    _, measurement, latency = _step_segments(params, parity_model, timing, ops)
    rho = cqed.vacuum_embed(np.outer(cqed.BELL_MINUS, cqed.BELL_MINUS.conj()), params)
    rho = evolve(rho, measurement, cfg)
    rho = evolve(rho, latency, cfg)
    rho_q = partial_trace_cavity_array(rho, params.fock_dim)
    phase = cqed.bell_phase(rho_q) - math.pi
    return float((phase + math.pi) % (2.0 * math.pi) - math.pi)


def default_unitaries(params: SystemParams, parity_model: ParityModel,
                      timing: StepTiming = StepTiming(),
                      cfg: IntegratorConfig = IntegratorConfig()):
    """(U_E, U_O, resolved ParityModel) targeting exactly |phi->.

    With the per-step shift phi_d, choosing phi_o = -phi_d and a Z correction
    of -phi_d makes the stabilized odd phase land on pi.
    """
    if parity_model.phi_d is None:
        phi_d = extract_stark_phase(params, parity_model, timing, cfg)
        parity_model = replace(parity_model, phi_d=phi_d)
    u_e, u_o = build_conditional_unitaries(-parity_model.phi_d, -parity_model.phi_d)
    return u_e, u_o, parity_model


def _run_step(rho_full: np.ndarray, u4: np.ndarray, params: SystemParams,
              segments, cfg: IntegratorConfig, ops: SpaceOps) -> np.ndarray:
    decay, measurement, latency = segments
    uf = ops.qubit_unitary(u4)
    rho = uf @ rho_full @ uf.conj().T
    rho = evolve(rho, decay, cfg)
    rho = evolve(rho, measurement, cfg)
    rho = parity_project(rho, params.fock_dim)
    return evolve(rho, latency, cfg)


def simulate_correction_step(rho_full: np.ndarray, last_reported_parity: str,
                             params: SystemParams,
                             parity_model: ParityModel | None = None,
                             timing: StepTiming = StepTiming(),
                             cfg: IntegratorConfig = IntegratorConfig(),
                             unitaries=None):
    """One full correction step with outcome branching.

    Returns [(reported_parity, probability, rho_full_next)]; branches with
    the same reported parity are merged into a weighted mixture.
    """
    if last_reported_parity not in ("odd", "even"):
        raise ValueError("last_reported_parity must be 'odd' or 'even'")
    parity_model = parity_model or ParityModel()
    ops = SpaceOps(params.layout)
    if unitaries is None:
        u_e, u_o, parity_model = default_unitaries(params, parity_model, timing, cfg)
    else:
        u_e, u_o = unitaries
    decay, measurement, latency = _step_segments(params, parity_model, timing, ops)

    u4 = u_o if last_reported_parity == "odd" else u_e
    uf = ops.qubit_unitary(u4)
    rho = uf @ rho_full @ uf.conj().T
    rho = evolve(rho, decay, cfg)
    rho = evolve(rho, measurement, cfg)

    merged: dict[str, tuple[float, np.ndarray]] = {}
    for label, prob, state in apply_quasi_parity(rho, parity_model, params.fock_dim):
        parity = "odd" if label == "odd" else "even"
        if parity in merged:
            p0, s0 = merged[parity]
            merged[parity] = (p0 + prob, (p0 * s0 + prob * state) / (p0 + prob))
        else:
            merged[parity] = (prob, state)
    return [(parity, prob, evolve(state, latency, cfg))
            for parity, (prob, state) in sorted(merged.items())]


def build_transition_matrix(params: SystemParams,
                            parity_model: ParityModel | None = None,
                            timing: StepTiming = StepTiming(),
                            cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """4x4 stochastic matrix of one correction step over (phi-, phi+, gg, ee).

    Column j is the end-of-step population vector from basis state j, with
    the two possible conditional unitaries weighted by the quasi-parity
    misreport probabilities of the preceding measurement.
    """
    parity_model = parity_model or ParityModel()
    ops = SpaceOps(params.layout)
    u_e, u_o, parity_model = default_unitaries(params, parity_model, timing, cfg)
    segments = _step_segments(params, parity_model, timing, ops)

    columns = []
    for j, (correct_u, wrong_u, eps) in enumerate([
        (u_o, u_e, parity_model.eps_eo),   # phi-
        (u_o, u_e, parity_model.eps_eo),   # phi+
        (u_e, u_o, parity_model.eps_oe),   # gg
        (u_e, u_o, parity_model.eps_oe),   # ee
    ]):
        basis = BELL_BASIS[:, j]
        rho0 = cqed.vacuum_embed(np.outer(basis, basis.conj()), params)
        vecs = []
        for u4 in (correct_u, wrong_u):
            rho = _run_step(rho0, u4, params, segments, cfg, ops)
            rho_q = partial_trace_cavity_array(rho, params.fock_dim)
            pops = bell_basis_populations(rho_q)
            vecs.append(pops / pops.sum())
        columns.append((1.0 - eps) * vecs[0] + eps * vecs[1])
    t = np.column_stack(columns)
    assert_stochastic(t, tol=1e-6)
    # Renormalize the tiny numerical defect so downstream identities hold
    # to 1e-9 exactly.
    return t / t.sum(axis=0, keepdims=True)


@dataclass(frozen=True)
class MBCurve:
    steps: np.ndarray          # correction step counts
    times: np.ndarray          # us
    fidelities: np.ndarray
    tau: float                 # us
    f_ss: float
    fit_ok: bool
    transition_matrix: np.ndarray
    steady: np.ndarray


def fit_exponential(times: np.ndarray, fidelities: np.ndarray,
                    tau_guess: float = 1.0):
    """Least-squares fit of F(t) = f_ss - (f_ss - F(0)) exp(-t/tau)."""
    from scipy.optimize import curve_fit

    f0 = fidelities[0]

    def model(t, f_ss, tau):
        return f_ss - (f_ss - f0) * np.exp(-t / tau)

    try:
        popt, _ = curve_fit(model, times, fidelities,
                            p0=[fidelities[-1], tau_guess], maxfev=10000)
        f_ss, tau = float(popt[0]), float(popt[1])
        if tau <= 0:
            return math.nan, math.nan, False
        return f_ss, tau, True
    except RuntimeError:
        return math.nan, math.nan, False


def simulate_mb_curve(params: SystemParams, n_max: int = 12,
                      parity_model: ParityModel | None = None,
                      timing: StepTiming = StepTiming(),
                      cfg: IntegratorConfig = IntegratorConfig(),
                      transition_matrix: np.ndarray | None = None) -> MBCurve:
    """Fidelity versus correction step count from the Markov reduction."""
    if transition_matrix is None:
        transition_matrix = build_transition_matrix(params, parity_model, timing, cfg)
    s = np.zeros(4)
    thermal = np.diag(cqed.thermal_qubit_populations(params)).astype(complex)
    s[:] = bell_basis_populations(thermal)
    fidelities = []
    vec = s.copy()
    for _ in range(n_max + 1):
        fidelities.append(vec[0])
        vec = transition_matrix @ vec
    steps = np.arange(n_max + 1)
    times = steps * timing.total
    fidelities = np.array(fidelities)
    f_ss, tau, ok = fit_exponential(times, fidelities, tau_guess=1.0)
    steady = steady_state(transition_matrix)
    return MBCurve(steps, times, fidelities, tau, f_ss, ok, transition_matrix, steady)


def iterate_full_density_matrix(params: SystemParams, n_steps: int,
                                parity_model: ParityModel | None = None,
                                timing: StepTiming = StepTiming(),
                                cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Fidelity after each step of the full (unreduced) piecewise iteration.

    Tracks the two reported-parity classes as weighted full density matrices,
    which is exact because the evolution is linear in rho.  Used to validate
    the 4-state Markov reduction.
    """
    parity_model = parity_model or ParityModel()
    ops = SpaceOps(params.layout)
    u_e, u_o, parity_model = default_unitaries(params, parity_model, timing, cfg)
    rho0 = cqed.thermal_initial_state(params)
    # The controller starts in the U_E state (thermal start is mostly |gg>).
    classes = {"even": (1.0, rho0), "odd": (0.0, None)}
    fidelities = []
    for _ in range(n_steps):
        merged: dict[str, tuple[float, np.ndarray]] = {}
        for parity, (weight, rho) in classes.items():
            if weight == 0.0 or rho is None:
                continue
            branches = simulate_correction_step(
                rho, parity, params, parity_model, timing, cfg, unitaries=(u_e, u_o))
            for rep, prob, state in branches:
                w = weight * prob
                if rep in merged:
                    w0, s0 = merged[rep]
                    merged[rep] = (w0 + w, (w0 * s0 + w * state) / (w0 + w))
                else:
                    merged[rep] = (w, state)
        classes = {p: merged.get(p, (0.0, None)) for p in ("even", "odd")}
        rho_mean = sum(w * s for w, s in merged.values())
        rho_q = partial_trace_cavity_array(rho_mean, params.fock_dim)
        fidelities.append(qlin.fidelity_to_pure(rho_q, cqed.BELL_MINUS))
    return np.array(fidelities)


def calibrate_measurement(params: SystemParams,
                          durations: Sequence[float],
                          n_bars: Sequence[float],
                          parity_model: ParityModel | None = None,
                          cfg: IntegratorConfig = IntegratorConfig()):
    """Bell-state fidelity surface of the calibration experiment.

    From the thermal qubit state, ideal pi/2 pulses on both qubits prepare
    the full superposition, the parity drive runs for the given duration
    and strength, and runs reported odd are kept.  The reported-odd ensemble weights every true outcome by the
    discrimination power of the integrated cavity outputs, which scales with
    duration * photon number relative to the calibrated operating point.
    Fidelity is maximized over the odd Bell phase.
    """
    from . import outcomes

    parity_model = parity_model or ParityModel()
    ops = SpaceOps(params.layout)
    dist, thresholds = outcomes.calibrate_distribution(parity_model)
    h_disp = cqed.build_h_disp(params, ops)
    diss = cqed.dissipators(params, ops)

    prep = np.kron(qlin.qubit_rotation(0.0, math.pi / 2.0),
                   qlin.qubit_rotation(0.0, math.pi / 2.0))
    rho_q0 = prep @ np.diag(cqed.thermal_qubit_populations(params)).astype(complex) @ prep.conj().T
    rho0 = cqed.vacuum_embed(rho_q0, params)

    ref = parity_model.duration * parity_model.n_bar_meas
    surface = np.zeros((len(durations), len(n_bars)))
    for i, duration in enumerate(durations):
        for k, n_bar in enumerate(n_bars):
            if duration == 0.0:
                rho = rho0
            else:
                eps_c = cqed.photons_to_amplitude(n_bar, params)
                drive = cqed.build_parity_drive(eps_c, params, ops)
                seg = EvolutionSegment(lambda t: h_disp + drive(t), diss, duration)
                rho = evolve(rho0, seg, cfg)
            rho_q = partial_trace_cavity_array(rho, params.fock_dim)
            snr_scale = math.sqrt((duration * n_bar) / ref) if duration > 0 else 0.0
            q_odd = outcomes.reported_odd_probabilities(dist, thresholds, snr_scale)
            herald = np.zeros((4, 4), dtype=complex)
            for p, q in ((P_ODD, q_odd[0]), (P_GG, q_odd[2]), (P_EE, q_odd[3])):
                herald += q * (p @ rho_q @ p)
            herald /= np.real(np.trace(herald))
            # max over the odd Bell phase: (p_ge + p_eg)/2 + |rho_ge,eg|
            best = 0.5 * np.real(herald[1, 1] + herald[2, 2]) + abs(herald[1, 2])
            surface[i, k] = best
    return surface


def sweep_z_correction(params: SystemParams, thetas: Sequence[float],
                       parity_model: ParityModel | None = None,
                       timing: StepTiming = StepTiming(),
                       cfg: IntegratorConfig = IntegratorConfig()):
    """Steady-state fidelity versus the Z-correction angle inside U_O."""
    parity_model = parity_model or ParityModel()
    if parity_model.phi_d is None:
        phi_d = extract_stark_phase(params, parity_model, timing, cfg)
        parity_model = replace(parity_model, phi_d=phi_d)
    fidelities = []
    for theta in thetas:
        u_e, u_o = build_conditional_unitaries(-parity_model.phi_d, theta)
        t = _transition_matrix_for_unitaries(params, (u_e, u_o), parity_model, timing, cfg)
        fidelities.append(steady_state(t)[0])
    return np.array(fidelities), parity_model.phi_d


def _transition_matrix_for_unitaries(params, unitaries, parity_model, timing, cfg):
    ops = SpaceOps(params.layout)
    u_e, u_o = unitaries
    segments = _step_segments(params, parity_model, timing, ops)
    columns = []
    for j, (correct_u, wrong_u, eps) in enumerate([
        (u_o, u_e, parity_model.eps_eo),
        (u_o, u_e, parity_model.eps_eo),
        (u_e, u_o, parity_model.eps_oe),
        (u_e, u_o, parity_model.eps_oe),
    ]):
        basis = BELL_BASIS[:, j]
        rho0 = cqed.vacuum_embed(np.outer(basis, basis.conj()), params)
        vecs = []
        for u4 in (correct_u, wrong_u):
            rho = _run_step(rho0, u4, params, segments, cfg, ops)
            rho_q = partial_trace_cavity_array(rho, params.fock_dim)
            pops = bell_basis_populations(rho_q)
            vecs.append(pops / pops.sum())
        columns.append((1.0 - eps) * vecs[0] + eps * vecs[1])
    t = np.column_stack(columns)
    return t / t.sum(axis=0, keepdims=True)
