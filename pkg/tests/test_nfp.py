import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellstab import mb, nfp


def random_stochastic(rng):
    t = rng.uniform(0.05, 1.0, size=(4, 4))
    return t / t.sum(axis=0, keepdims=True)


class TestHeraldMatrix:
    def test_valid(self):
        c = nfp.herald_matrix([0.5, 0.5, 0.1, 0.1])
        assert np.allclose(np.diag(c), [0.5, 0.5, 0.1, 0.1])

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            nfp.herald_matrix([1.2, 0.0, 0.0, 0.0])
        with pytest.raises(ValueError):
            nfp.herald_matrix([0.1, 0.2, 0.3])

    def test_reference_constants_in_range(self):
        for c in (nfp.HERALD_DD, nfp.HERALD_MB):
            assert np.all((c >= 0) & (c <= 1))


class TestRecursion:
    def test_matches_closed_form(self):
        rng = np.random.default_rng(7)
        t = random_stochastic(rng)
        c = np.diag(rng.uniform(0.1, 0.9, size=4))
        s0 = rng.uniform(size=4)
        s0 /= s0.sum()
        res = nfp.nfp_recursion(t, c, s0=s0, k_max=6)
        m = t @ (np.eye(4) - c)
        for k in range(7):
            u_k = np.linalg.matrix_power(m, k) @ s0
            assert res.differential_success[k] == pytest.approx(
                float((np.diag(c) * u_k).sum()), abs=1e-12)

    def test_mass_conserved_to_1e9(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            t = random_stochastic(rng)
            c = np.diag(rng.uniform(0.0, 1.0, size=4))
            res = nfp.nfp_recursion(t, c, k_max=30)
            assert abs(res.cumulative_success[-1] + res.unheralded_mass - 1.0) < 1e-9

    def test_rejects_bad_inputs(self):
        t = random_stochastic(np.random.default_rng(1))
        with pytest.raises(ValueError):
            nfp.nfp_recursion(t, np.diag([2.0, 0, 0, 0]))
        with pytest.raises(ValueError):
            nfp.nfp_recursion(t, np.diag([0.5, 0.5, 0.5, 0.5]),
                              s0=np.array([0.5, 0.5, 0.5, 0.5]))
        with pytest.raises(ValueError):
            nfp.nfp_recursion(np.eye(4) * 0.9, np.diag([0.5, 0.5, 0.5, 0.5]))

    def test_average_fidelity_is_success_weighted(self):
        rng = np.random.default_rng(13)
        t = random_stochastic(rng)
        c = np.diag(rng.uniform(0.2, 0.8, size=4))
        res = nfp.nfp_recursion(t, c, k_max=8)
        want = float(np.sum(res.differential_success * res.fidelities)
                     / np.sum(res.differential_success))
        assert nfp.average_heralded_fidelity(t, c, k_max=8) == pytest.approx(want)

    def test_full_herald_exhausts_in_one_attempt(self):
        t = random_stochastic(np.random.default_rng(2))
        res = nfp.nfp_recursion(t, np.eye(4), k_max=3)
        assert res.cumulative_success[0] == pytest.approx(1.0)
        assert res.unheralded_mass == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_mass_identity_property(seed):
    rng = np.random.default_rng(seed)
    t = random_stochastic(rng)
    c = np.diag(rng.uniform(0.0, 1.0, size=4))
    s0 = rng.uniform(0.01, 1.0, size=4)
    s0 /= s0.sum()
    res = nfp.nfp_recursion(t, c, s0=s0, k_max=15)
    assert abs(res.cumulative_success[-1] + res.unheralded_mass - 1.0) < 1e-9
    assert np.all(res.differential_success >= 0)


class TestMonteCarlo:
    def test_matches_exact_within_3_sigma(self):
        rng = np.random.default_rng(42)
        t = random_stochastic(np.random.default_rng(3))
        c = np.diag([0.6, 0.6, 0.2, 0.1])
        n = 20000
        res = nfp.nfp_recursion(t, c, k_max=11)
        records = nfp.sample_trajectories(t, np.diag(c), n, rng, k_max=11)
        p_exact = res.cumulative_success[-1]
        p_mc = sum(r.heralded for r in records) / n
        sigma = (p_exact * (1 - p_exact) / n) ** 0.5
        assert abs(p_mc - p_exact) < 3 * max(sigma, 1e-4)

        # attempt-0 differential success
        p0_mc = sum(1 for r in records if r.heralded and r.attempt == 0) / n
        p0 = res.differential_success[0]
        sigma0 = (p0 * (1 - p0) / n) ** 0.5
        assert abs(p0_mc - p0) < 3 * sigma0

    def test_seeded_runs_are_identical(self):
        t = random_stochastic(np.random.default_rng(4))
        c = np.diag([0.5, 0.4, 0.3, 0.2])
        a = nfp.sample_trajectories(t, np.diag(c), 500, np.random.default_rng(9))
        b = nfp.sample_trajectories(t, np.diag(c), 500, np.random.default_rng(9))
        assert a == b
