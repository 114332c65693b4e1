"""Dense linear algebra for states and operators on the qubit-qubit-cavity space.

Conventions used throughout the package:

* tensor factor ordering is Alice (qubit a) x Bob (qubit b) x cavity;
* per-qubit basis ordering is (g, e), so sigma_z = |e><e| - |g><g| and
  sigma_z |e> = +|e>;
* cavity basis is the Fock ladder |0>, |1>, ... ascending;
* the two-qubit computational basis order is (gg, ge, eg, ee).

All values are immutable after construction and all operations are pure
functions, so they are safe to share between concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_TOL = 1e-8
NORM_TOL = 1e-12


class DimensionError(ValueError):
    """Operands live on incompatible Hilbert spaces."""


@dataclass(frozen=True)
class HilbertLayout:
    """Shape of the composite Hilbert space.

    ``cavity_dim`` is the Fock-space truncation N.  ``cavity_dim == 1``
    denotes the qubit-only space left after tracing out the cavity.
    """

    cavity_dim: int
    qubit_a_dim: int = 2
    qubit_b_dim: int = 2

    def __post_init__(self):
        if self.qubit_a_dim != 2 or self.qubit_b_dim != 2:
            raise DimensionError("qubits are two-level systems")
        if self.cavity_dim < 1:
            raise DimensionError("cavity_dim must be >= 1")

    @property
    def total_dim(self) -> int:
        return self.qubit_a_dim * self.qubit_b_dim * self.cavity_dim


QUBITS_ONLY = HilbertLayout(cavity_dim=1)


def _as_layout_matrix(layout: HilbertLayout, entries) -> np.ndarray:
    m = np.asarray(entries, dtype=complex)
    if m.shape != (layout.total_dim, layout.total_dim):
        raise DimensionError(
            f"matrix shape {m.shape} does not match layout dim {layout.total_dim}"
        )
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class Operator:
    layout: HilbertLayout
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_layout_matrix(self.layout, self.entries))

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def dag(self) -> "Operator":
        return Operator(self.layout, self.entries.conj().T)


@dataclass(frozen=True)
class DensityMatrix:
    layout: HilbertLayout
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _as_layout_matrix(self.layout, self.entries)
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > TRACE_TOL or abs(np.trace(m).imag) > TRACE_TOL:
            raise ValueError(f"density matrix trace {np.trace(m)} != 1")
        if np.linalg.eigvalsh(m).min() < -POSITIVITY_TOL:
            raise ValueError("density matrix has a significantly negative eigenvalue")
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.layout.total_dim


@dataclass(frozen=True)
class PureState:
    layout: HilbertLayout
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex)
        if v.shape != (self.layout.total_dim,):
            raise DimensionError(
                f"vector shape {v.shape} does not match layout dim {self.layout.total_dim}"
            )
        if abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
            raise ValueError("state vector is not normalized")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    def density_matrix(self) -> DensityMatrix:
        return DensityMatrix(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()))


def _merge_layouts(a: HilbertLayout, b: HilbertLayout) -> HilbertLayout:
    # Factors combine along the fixed a (x) b (x) cavity ordering; only the
    # cavity dimension is free, so a product keeps the larger cavity factor
    # when one operand is qubit-only.
    if a.cavity_dim != 1 and b.cavity_dim != 1:
        raise DimensionError("cannot tensor two operands that both carry a cavity factor")
    return HilbertLayout(cavity_dim=max(a.cavity_dim, b.cavity_dim))


def tensor(a, b):
    """Kronecker product of two operators or two pure states."""
    if isinstance(a, Operator) and isinstance(b, Operator):
        return Operator(_merge_layouts(a.layout, b.layout), np.kron(a.entries, b.entries))
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(_merge_layouts(a.layout, b.layout), np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray):
        return np.kron(a, b)
    raise TypeError("tensor expects two Operators, two PureStates or two arrays")


def kron3(qubit_a: np.ndarray, qubit_b: np.ndarray, cavity: np.ndarray) -> np.ndarray:
    return np.kron(np.kron(qubit_a, qubit_b), cavity)


def partial_trace_cavity_array(rho: np.ndarray, cavity_dim: int) -> np.ndarray:
    """Trace a (4N x 4N) array over the trailing cavity factor; returns 4x4."""
    n = cavity_dim
    if rho.shape != (4 * n, 4 * n):
        raise DimensionError(f"expected shape {(4 * n, 4 * n)}, got {rho.shape}")
    r = rho.reshape(4, n, 4, n)
    return np.einsum("ikjk->ij", r)


def partial_trace_cavity(rho: DensityMatrix) -> DensityMatrix:
    """Reduce a full-space density matrix to the two-qubit factor."""
    reduced = partial_trace_cavity_array(rho.entries, rho.layout.cavity_dim)
    return DensityMatrix(QUBITS_ONLY, reduced)


def fidelity_to_pure(rho, psi) -> float:
    """<psi| rho |psi> for a 4x4 density matrix and a 4-dim pure state."""
    r = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    v = psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi, dtype=complex)
    if r.shape != (v.size, v.size):
        raise DimensionError("state and density matrix dimensions differ")
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError("target state is not normalized")
    val = v.conj() @ r @ v
    if abs(val.imag) > 1e-12:
        raise ValueError(f"fidelity evaluated with imaginary part {val.imag}")
    return float(val.real)


# Single-qubit operators in the (g, e) basis.
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, 1.0j], [-1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)   # |e><g|
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |g><e|
IDENTITY_2 = np.eye(2, dtype=complex)


def qubit_rotation(axis_phase: float, angle: float) -> np.ndarray:
    """exp(-i (angle/2) (cos(phi) sigma_x + sin(phi) sigma_y)) as a 2x2 array."""
    axis = np.cos(axis_phase) * SIGMA_X + np.sin(axis_phase) * SIGMA_Y
    return np.cos(angle / 2.0) * IDENTITY_2 - 1.0j * np.sin(angle / 2.0) * axis


def rotation_z(angle: float) -> np.ndarray:
    return np.array(
        [[np.exp(1.0j * angle / 2.0), 0.0], [0.0, np.exp(-1.0j * angle / 2.0)]],
        dtype=complex,
    )


def equal_up_to_phase(u: np.ndarray, v: np.ndarray, tol: float = 1e-10) -> bool:
    """Compare two matrices (or vectors) modulo a global phase.

    Rotation decompositions are phase-ambiguous, so unitary identities are
    checked with this helper rather than entrywise equality.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        return False
    k = np.argmax(np.abs(v))
    if np.abs(v.flat[k]) < tol:
        return bool(np.max(np.abs(u - v)) <= tol)
    phase = u.flat[k] / v.flat[k]
    if abs(abs(phase) - 1.0) > tol:
        return False
    return bool(np.max(np.abs(u - phase * v)) <= tol)
