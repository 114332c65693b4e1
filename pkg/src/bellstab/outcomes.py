"""Gaussian model of the integrated measurement record and its
classification into parity outcomes.

Each measurement produces two integrated quadrature signals, one per even
readout channel (the gg channel and the ee channel).  A channel sits at the
high mean when its even state is occupied and at the low mean otherwise; odd
states leave both channels low.  Both channels carry independent Gaussian
noise of the same width.  An outcome is classified odd when both signals
fall below their thresholds.

The noise width is anchored to the configured misreport rates of the parity
measurement, which pins (threshold, sigma) in closed form.  Heralding uses
its own, stricter thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import norm

STATE_LABELS = ("phi_minus", "phi_plus", "gg", "ee")


@dataclass(frozen=True)
class OutcomeDistribution:
    """Channel means and noise of the integrated measurement record.

    ``separation_scale`` shrinks the high-mean displacement; 1.0 for the
    dispersive parity measurement, below 1.0 for records with poor
    state discrimination.
    """

    sigma: float
    mean_low: float = 0.0
    mean_high: float = 1.0
    separation_scale: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not 0 <= self.separation_scale <= 1:
            raise ValueError("separation_scale must lie in [0, 1]")

    def channel_means(self, state_index: int) -> tuple[float, float]:
        """(gg channel, ee channel) means for a population-basis state."""
        high = self.mean_low + self.separation_scale * (self.mean_high - self.mean_low)
        if state_index in (0, 1):     # odd Bell states
            return self.mean_low, self.mean_low
        if state_index == 2:          # gg
            return high, self.mean_low
        if state_index == 3:          # ee
            return self.mean_low, high
        raise ValueError("state_index must be 0..3")


@dataclass(frozen=True)
class Thresholds:
    t_gg: float
    t_ee: float


def sample_outcome(dist: OutcomeDistribution, state_index: int,
                   rng: np.random.Generator) -> tuple[float, float]:
    m_gg, m_ee = dist.channel_means(state_index)
    return (rng.normal(m_gg, dist.sigma), rng.normal(m_ee, dist.sigma))


def classify(sample: tuple[float, float], thresholds: Thresholds) -> str:
    s_gg, s_ee = sample
    below_gg = s_gg < thresholds.t_gg
    below_ee = s_ee < thresholds.t_ee
    if below_gg and below_ee:
        return "odd"
    if not below_gg and below_ee:
        return "even_gg"
    if below_gg and not below_ee:
        return "even_ee"
    # both above threshold: take the channel with the larger exceedance
    return "even_gg" if (s_gg - thresholds.t_gg) >= (s_ee - thresholds.t_ee) else "even_ee"


def reported_odd_probabilities(dist: OutcomeDistribution,
                               thresholds: Thresholds,
                               snr_scale: float = 1.0) -> np.ndarray:
    """P(classified odd) per population-basis state, analytic.

    ``snr_scale`` rescales the noise width as 1/snr_scale for measurement
    settings away from the calibrated integration (sigma ~ 1/sqrt(duration
    * photon number)); 0 means no information and every state classifies
    odd with probability 1/4.
    """
    if snr_scale < 0:
        raise ValueError("snr_scale must be >= 0")
    if snr_scale == 0.0:
        return np.full(4, 0.25)
    sigma = dist.sigma / snr_scale
    out = np.empty(4)
    for j in range(4):
        m_gg, m_ee = dist.channel_means(j)
        out[j] = (norm.cdf((thresholds.t_gg - m_gg) / sigma)
                  * norm.cdf((thresholds.t_ee - m_ee) / sigma))
    return out


def misreport_rates(dist: OutcomeDistribution, thresholds: Thresholds):
    """(eps_even_given_odd, eps_odd_given_gg, eps_odd_given_ee), analytic."""
    q = reported_odd_probabilities(dist, thresholds)
    return 1.0 - q[0], q[2], q[3]


def calibrate_distribution(parity_model) -> tuple[OutcomeDistribution, Thresholds]:
    """Solve (threshold, sigma) from the configured misreport rates.

    With symmetric thresholds t on both channels,
    eps_even_given_odd = 1 - Phi(t/sigma)^2 and
    eps_odd_given_even = Phi((t - 1)/sigma) Phi(t/sigma),
    which inverts in closed form.
    """
    p_below = math.sqrt(1.0 - parity_model.eps_eo)
    ratio = parity_model.eps_oe / p_below
    if not 0.0 < ratio < 1.0:
        raise ValueError("misreport rates leave no room between the means")
    z1 = norm.ppf(p_below)
    z2 = norm.ppf(ratio)
    if z2 >= z1:
        raise ValueError("misreport rates leave no room between the means")
    sigma = (1.0) / (z1 - z2)
    t = z1 * sigma
    dist = OutcomeDistribution(sigma=sigma)
    return dist, Thresholds(t_gg=t, t_ee=t)


def postselection_tradeoff(populations: np.ndarray, dist: OutcomeDistribution,
                           threshold_pairs) -> np.ndarray:
    """Success probability and conditioned fidelity per threshold pair.

    Returns an array of rows (t_gg, t_ee, success_prob, fidelity) where the
    fidelity is the target-state weight among runs classified odd, all
    evaluated with Gaussian tail integrals rather than sampling.
    """
    populations = np.asarray(populations, dtype=float)
    rows = []
    for t_gg, t_ee in threshold_pairs:
        q = reported_odd_probabilities(dist, Thresholds(t_gg, t_ee))
        weights = populations * q
        p_s = float(weights.sum())
        fid = float(weights[0] / p_s) if p_s > 0 else math.nan
        rows.append((t_gg, t_ee, p_s, fid))
    return np.array(rows)


def sweep_thresholds(populations: np.ndarray, dist: OutcomeDistribution,
                     t_values) -> np.ndarray:
    """Symmetric-threshold sweep; rows are (t, success_prob, fidelity)."""
    table = postselection_tradeoff(populations, dist, [(t, t) for t in t_values])
    return table[:, 2:]


def fit_herald_thresholds(dist: OutcomeDistribution,
                          target_c: np.ndarray,
                          fit_sigma: bool = True):
    """(distribution, thresholds) matching a target herald diagonal.

    The herald record is integrated and weighted differently from the
    outcome classification, so its noise width is a fit parameter by
    default (the thresholds alone cannot reproduce typical herald
    diagonals at the misreport-calibrated width).
    """
    target = np.asarray(target_c, dtype=float)

    if not fit_sigma:
        def residual(x):
            q = reported_odd_probabilities(dist, Thresholds(*x))
            return q - target

        fit = least_squares(residual, x0=[0.7, 0.7])
        return dist, Thresholds(*fit.x)

    def residual(x):
        t_gg, t_ee, sigma = x
        d = replace(dist, sigma=sigma)
        q = reported_odd_probabilities(d, Thresholds(t_gg, t_ee))
        return q - target

    fit = least_squares(residual, x0=[0.7, 0.7, 2.0 * dist.sigma],
                        bounds=([-5.0, -5.0, 1e-3], [5.0, 5.0, 10.0]))
    t_gg, t_ee, sigma = fit.x
    return replace(dist, sigma=sigma), Thresholds(t_gg, t_ee)


def fit_separation_and_thresholds(sigma: float,
                                  target_c: np.ndarray):
    """Fit (separation_scale, thresholds) to a target herald diagonal.

    Used for measurement records with weaker state discrimination, where
    the even-state displacement itself is a free parameter.
    """
    target = np.asarray(target_c, dtype=float)

    def residual(x):
        s, t_gg, t_ee = x
        s = min(max(s, 1e-6), 1.0)
        dist = OutcomeDistribution(sigma=sigma, separation_scale=s)
        q = reported_odd_probabilities(dist, Thresholds(t_gg, t_ee))
        return q - target

    fit = least_squares(residual, x0=[0.5, 0.0, 0.0])
    s = min(max(fit.x[0], 1e-6), 1.0)
    return (OutcomeDistribution(sigma=sigma, separation_scale=s),
            Thresholds(fit.x[1], fit.x[2]))
