import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellstab import qlin
from bellstab.qlin import (DensityMatrix, DimensionError, HilbertLayout,
                           Operator, PureState, QUBITS_ONLY)


def random_density(dim, rng):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


class TestLayout:
    def test_total_dim(self):
        assert HilbertLayout(cavity_dim=20).total_dim == 80
        assert QUBITS_ONLY.total_dim == 4

    def test_rejects_bad_dims(self):
        with pytest.raises(DimensionError):
            HilbertLayout(cavity_dim=0)
        with pytest.raises(DimensionError):
            HilbertLayout(cavity_dim=2, qubit_a_dim=3)


class TestStateValidation:
    def test_density_matrix_accepts_valid(self):
        rho = np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)
        dm = DensityMatrix(QUBITS_ONLY, rho)
        assert dm.dim == 4

    def test_rejects_non_hermitian(self):
        rho = np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)
        rho = rho.copy()
        rho[0, 1] = 0.1
        with pytest.raises(ValueError, match="Hermitian"):
            DensityMatrix(QUBITS_ONLY, rho)

    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError, match="trace"):
            DensityMatrix(QUBITS_ONLY, np.eye(4, dtype=complex))

    def test_rejects_negative_eigenvalue(self):
        rho = np.diag([1.1, -0.1, 0.0, 0.0]).astype(complex)
        with pytest.raises(ValueError, match="negative"):
            DensityMatrix(QUBITS_ONLY, rho)

    def test_pure_state_norm(self):
        with pytest.raises(ValueError, match="normalized"):
            PureState(QUBITS_ONLY, np.array([1.0, 1.0, 0.0, 0.0]))

    def test_entries_read_only(self):
        dm = DensityMatrix(QUBITS_ONLY, np.diag([1.0, 0, 0, 0]).astype(complex))
        with pytest.raises(ValueError):
            dm.entries[0, 0] = 0.5


class TestTensor:
    def test_operator_tensor_shapes(self):
        a = Operator(QUBITS_ONLY, np.eye(4, dtype=complex))
        b = Operator(HilbertLayout(cavity_dim=3, qubit_a_dim=2, qubit_b_dim=2),
                     np.eye(12, dtype=complex))
        with pytest.raises(DimensionError):
            qlin.tensor(b, b)

    def test_array_tensor(self):
        out = qlin.tensor(np.eye(2), np.eye(3))
        assert out.shape == (6, 6)

    def test_type_mismatch(self):
        with pytest.raises(TypeError):
            qlin.tensor(np.eye(2), Operator(QUBITS_ONLY, np.eye(4, dtype=complex)))

    def test_kron3_ordering(self):
        # |e> (x) |g> (x) |1> index: e=1, g=0, n=1 with cavity_dim 2 -> 1*4 + 0*2 + 1
        v = qlin.kron3(np.array([0.0, 1.0]), np.array([1.0, 0.0]),
                       np.array([0.0, 1.0]))
        assert np.argmax(np.abs(v)) == 5


class TestPartialTrace:
    def test_product_state_recovery(self):
        rng = np.random.default_rng(1)
        rho_q = random_density(4, rng)
        rho_c = random_density(5, rng)
        full = np.kron(rho_q, rho_c)
        out = qlin.partial_trace_cavity_array(full, 5)
        assert np.allclose(out, rho_q, atol=1e-12)

    def test_trace_preserved(self):
        rng = np.random.default_rng(2)
        full = random_density(12, rng)
        out = qlin.partial_trace_cavity_array(full, 3)
        assert abs(np.trace(out) - 1.0) < 1e-12

    def test_shape_check(self):
        with pytest.raises(DimensionError):
            qlin.partial_trace_cavity_array(np.eye(10), 3)


class TestPaulis:
    def test_algebra_is_right_handed(self):
        sx, sy, sz = qlin.SIGMA_X, qlin.SIGMA_Y, qlin.SIGMA_Z
        assert np.allclose(sx @ sy - sy @ sx, 2j * sz)
        assert np.allclose(sy @ sz - sz @ sy, 2j * sx)
        assert np.allclose(sz @ sx - sx @ sz, 2j * sy)

    def test_ladder_operators(self):
        assert np.allclose((qlin.SIGMA_X + 1j * qlin.SIGMA_Y) / 2, qlin.SIGMA_PLUS)
        # sigma_z |e> = +|e> in the (g, e) ordering
        e = np.array([0.0, 1.0])
        assert np.allclose(qlin.SIGMA_Z @ e, e)
        assert np.allclose(qlin.SIGMA_PLUS @ np.array([1.0, 0.0]), e)

    def test_rotation_basic(self):
        rx = qlin.qubit_rotation(0.0, math.pi)
        assert qlin.equal_up_to_phase(rx, qlin.SIGMA_X)
        ry = qlin.qubit_rotation(math.pi / 2, math.pi)
        assert qlin.equal_up_to_phase(ry, qlin.SIGMA_Y)

    def test_rotation_unitary(self):
        u = qlin.qubit_rotation(0.7, 1.3)
        assert np.allclose(u @ u.conj().T, np.eye(2))

    def test_z_conjugation_identity(self):
        # Rx(pi/2) Ry(t) Rx(-pi/2) = Rz(t) in a right-handed convention
        t = 0.83
        lhs = (qlin.qubit_rotation(0.0, math.pi / 2)
               @ qlin.qubit_rotation(math.pi / 2, t)
               @ qlin.qubit_rotation(0.0, -math.pi / 2))
        assert qlin.equal_up_to_phase(lhs, qlin.rotation_z(t), tol=1e-12)


class TestFidelity:
    def test_pure_on_itself(self):
        v = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)
        rho = np.outer(v, v.conj())
        assert abs(qlin.fidelity_to_pure(rho, v) - 1.0) < 1e-12

    def test_orthogonal(self):
        v = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)
        w = np.array([0, 1, 1, 0], dtype=complex) / math.sqrt(2)
        assert abs(qlin.fidelity_to_pure(np.outer(v, v.conj()), w)) < 1e-12

    def test_unnormalized_target_rejected(self):
        with pytest.raises(ValueError):
            qlin.fidelity_to_pure(np.eye(2) / 2, np.array([1.0, 1.0]))


class TestEqualUpToPhase:
    def test_accepts_phase(self):
        u = qlin.SIGMA_X
        assert qlin.equal_up_to_phase(np.exp(0.3j) * u, u)

    def test_rejects_different(self):
        assert not qlin.equal_up_to_phase(qlin.SIGMA_X, qlin.SIGMA_Y)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_rotation_preserves_density_properties(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(2, rng)
    u = qlin.qubit_rotation(rng.uniform(0, 2 * math.pi), rng.uniform(0, 2 * math.pi))
    out = u @ rho @ u.conj().T
    assert abs(np.trace(out) - 1.0) < 1e-12
    assert np.max(np.abs(out - out.conj().T)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_partial_trace_is_linear(seed):
    rng = np.random.default_rng(seed)
    a = random_density(8, rng)
    b = random_density(8, rng)
    lhs = qlin.partial_trace_cavity_array(0.3 * a + 0.7 * b, 2)
    rhs = (0.3 * qlin.partial_trace_cavity_array(a, 2)
           + 0.7 * qlin.partial_trace_cavity_array(b, 2))
    assert np.allclose(lhs, rhs, atol=1e-12)
