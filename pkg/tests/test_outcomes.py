import numpy as np
import pytest

from bellstab import mb, nfp, outcomes
from bellstab.outcomes import OutcomeDistribution, Thresholds


class TestDistribution:
    def test_validation(self):
        with pytest.raises(ValueError):
            OutcomeDistribution(sigma=0.0)
        with pytest.raises(ValueError):
            OutcomeDistribution(sigma=0.3, separation_scale=1.5)

    def test_channel_means(self):
        d = OutcomeDistribution(sigma=0.3)
        assert d.channel_means(0) == (0.0, 0.0)
        assert d.channel_means(1) == (0.0, 0.0)
        assert d.channel_means(2) == (1.0, 0.0)
        assert d.channel_means(3) == (0.0, 1.0)
        with pytest.raises(ValueError):
            d.channel_means(4)

    def test_separation_scale_shrinks_high_mean(self):
        d = OutcomeDistribution(sigma=0.3, separation_scale=0.4)
        assert d.channel_means(2) == (pytest.approx(0.4), 0.0)


class TestClassify:
    def test_cases(self):
        th = Thresholds(0.5, 0.5)
        assert outcomes.classify((0.0, 0.0), th) == "odd"
        assert outcomes.classify((0.9, 0.0), th) == "even_gg"
        assert outcomes.classify((0.0, 0.9), th) == "even_ee"
        # both above: larger exceedance wins
        assert outcomes.classify((0.9, 0.8), th) == "even_gg"
        assert outcomes.classify((0.8, 0.9), th) == "even_ee"


class TestReportedOddProbabilities:
    def test_zero_snr_is_uninformative(self):
        d, th = outcomes.calibrate_distribution(mb.ParityModel())
        q = outcomes.reported_odd_probabilities(d, th, snr_scale=0.0)
        assert np.allclose(q, 0.25)
        with pytest.raises(ValueError):
            outcomes.reported_odd_probabilities(d, th, snr_scale=-1.0)

    def test_monotone_in_snr(self):
        # more integration separates odd from even states
        d, th = outcomes.calibrate_distribution(mb.ParityModel())
        q_low = outcomes.reported_odd_probabilities(d, th, snr_scale=0.5)
        q_high = outcomes.reported_odd_probabilities(d, th, snr_scale=2.0)
        assert q_high[0] > q_low[0]       # odd states classified odd more often
        assert q_high[2] < q_low[2]       # even states leak less
        assert q_high[3] < q_low[3]

    def test_agrees_with_sampling(self):
        d, th = outcomes.calibrate_distribution(mb.ParityModel())
        rng = np.random.default_rng(17)
        n = 40000
        hits = sum(outcomes.classify(outcomes.sample_outcome(d, 2, rng), th) == "odd"
                   for _ in range(n))
        q = outcomes.reported_odd_probabilities(d, th)[2]
        sigma = (q * (1 - q) / n) ** 0.5
        assert abs(hits / n - q) < 3 * sigma


class TestCalibration:
    def test_closed_form_inverts_misreport_rates(self):
        pm = mb.ParityModel()
        d, th = outcomes.calibrate_distribution(pm)
        eps_eo, eps_oe_gg, eps_oe_ee = outcomes.misreport_rates(d, th)
        assert eps_eo == pytest.approx(pm.eps_eo, abs=1e-12)
        assert eps_oe_gg == pytest.approx(pm.eps_oe, abs=1e-12)
        assert eps_oe_ee == pytest.approx(pm.eps_oe, abs=1e-12)

    def test_infeasible_rates_rejected(self):
        with pytest.raises(ValueError):
            outcomes.calibrate_distribution(mb.ParityModel(eps_eo=0.5, eps_oe=0.6))


class TestSweep:
    def test_tradeoff_is_monotone(self):
        # tightening symmetric thresholds trades success for fidelity
        d, _ = outcomes.calibrate_distribution(mb.ParityModel())
        pops = np.array([0.58, 0.11, 0.18, 0.13])
        table = outcomes.sweep_thresholds(pops, d, np.linspace(-0.2, 1.0, 13))
        success, fidelity = table[:, 0], table[:, 1]
        assert np.all(np.diff(success) > 0)
        assert np.all(np.diff(fidelity) < 0)

    def test_open_thresholds_recover_populations(self):
        d, _ = outcomes.calibrate_distribution(mb.ParityModel())
        pops = np.array([0.58, 0.11, 0.18, 0.13])
        table = outcomes.postselection_tradeoff(pops, d, [(50.0, 50.0)])
        assert table[0, 2] == pytest.approx(1.0, abs=1e-9)
        assert table[0, 3] == pytest.approx(pops[0], abs=1e-9)


class TestHeraldFits:
    def test_mb_herald_fit(self):
        d, _ = outcomes.calibrate_distribution(mb.ParityModel())
        d_h, th = outcomes.fit_herald_thresholds(d, nfp.HERALD_MB)
        q = outcomes.reported_odd_probabilities(d_h, th)
        assert np.max(np.abs(q - nfp.HERALD_MB)) < 0.01

    def test_dd_herald_fit(self):
        d, _ = outcomes.calibrate_distribution(mb.ParityModel())
        d_h, th = outcomes.fit_separation_and_thresholds(d.sigma, nfp.HERALD_DD)
        q = outcomes.reported_odd_probabilities(d_h, th)
        assert np.max(np.abs(q - nfp.HERALD_DD)) <= 0.0305

    def test_fixed_sigma_fit_cannot_reach_mb_heralds(self):
        # at the misreport-calibrated width the herald diagonal is out of
        # reach, which is why the width is a fit parameter by default
        d, _ = outcomes.calibrate_distribution(mb.ParityModel())
        d_f, th = outcomes.fit_herald_thresholds(d, nfp.HERALD_MB, fit_sigma=False)
        q = outcomes.reported_odd_probabilities(d_f, th)
        assert np.max(np.abs(q - nfp.HERALD_MB)) > 0.05

    def test_herald_matrix_from_postselection(self):
        d, th = outcomes.calibrate_distribution(mb.ParityModel())
        c = nfp.herald_matrix_from_postselection(d, th)
        q = outcomes.reported_odd_probabilities(d, th)
        assert np.allclose(np.diag(c), q)
