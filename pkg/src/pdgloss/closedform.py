"""Exact analytic values that double as fast paths and solver oracles.

The central identity: jointly believing two distributions ``p`` and ``q``
over one variable, with confidences ``r`` and ``s``, has least
incompatibility

    -(r + s) * log sum_x (p(x)^r q(x)^s)^(1/(r+s)),

attained at the normalized weighted geometric mean of ``p`` and ``q``.
Renyi divergences are the same family up to scale, with order
``alpha = r / (r + s)``.

Sums inside logs are evaluated in max-shifted log domain so confidences
up to 1e6 (used to approach the KL endpoints) do not underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scoring import Score, relative_entropy


def _logsumexp(a: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        return -math.inf
    hi = a.max()
    if math.isinf(hi):
        return float(hi)
    return float(hi + np.log(np.sum(np.exp(a - hi))))


def pdg_divergence(p, q, r: float, s: float) -> Score:
    """Least incompatibility of believing p with confidence r and q with
    confidence s; +inf when the supports force it."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if r < 0 or s < 0 or r + s <= 0:
        raise ValueError("need r, s >= 0 with r + s > 0")
    keep = np.ones(p.shape, dtype=bool)
    if r > 0:
        keep &= p > 0
    if s > 0:
        keep &= q > 0
    if not np.any(keep):
        return math.inf
    expo = np.zeros(int(keep.sum()))
    if r > 0:
        expo += r * np.log(p[keep])
    if s > 0:
        expo += s * np.log(q[keep])
    return -(r + s) * _logsumexp(expo / (r + s))


def geometric_mean_distribution(p, q, r: float, s: float) -> np.ndarray:
    """The minimizing distribution behind :func:`pdg_divergence`:
    normalized p^(r/(r+s)) q^(s/(r+s))."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    w = np.zeros_like(p)
    keep = (p > 0) | (r == 0)
    keep &= (q > 0) | (s == 0)
    expo = np.full(p.shape, -np.inf)
    expo[keep] = 0.0
    if r > 0:
        with np.errstate(divide="ignore"):
            expo[keep] += r / (r + s) * np.log(p[keep])
    if s > 0:
        with np.errstate(divide="ignore"):
            expo[keep] += s / (r + s) * np.log(q[keep])
    hi = expo.max()
    if math.isinf(hi):
        raise ValueError("p and q have disjoint supports")
    w = np.exp(expo - hi)
    return w / w.sum()


def kl_divergence(p, q) -> Score:
    return relative_entropy(p, q)


def renyi_divergence(p, q, alpha: float) -> Score:
    """Renyi divergence of order alpha in nats; alpha = 1 dispatches to
    KL.  Positive orientation: D_2((.5,.5)||(.25,.75)) = log(4/3)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if alpha == 1.0:
        return kl_divergence(p, q)
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if alpha > 1 and np.any((p > 0) & (q <= 0)):
        return math.inf
    keep = (p > 0) & (q > 0)
    if not np.any(keep):
        return math.inf
    expo = alpha * np.log(p[keep]) + (1.0 - alpha) * np.log(q[keep])
    return _logsumexp(expo) / (alpha - 1.0)


def confidences_to_alpha(r: float, s: float) -> tuple[float, float]:
    """Map confidences (r, s) to the Renyi order and scale such that
    pdg_divergence(p, q, r, s) = scale * D_alpha(p || q)."""
    if r < 0 or s < 0 or r + s <= 0:
        raise ValueError("need r, s >= 0 with r + s > 0")
    return r / (r + s), s


def alpha_to_confidences(alpha: float) -> tuple[float, float]:
    """Confidences (r, s) with D_alpha(p || q) = pdg_divergence(p,q,r,s).

    Nonnegative confidence pairs realize exactly the orders in (0, 1);
    alpha = 1 is their KL limit and orders above 1 would need a negative
    confidence, so both are rejected."""
    if not 0 < alpha < 1:
        raise ValueError(
            "only orders in (0, 1) have nonnegative confidence "
            "preimages; alpha = 1 and beyond are limits of the family")
    return alpha / (1.0 - alpha), 1.0


def power_mean(values, weights, p: float) -> float:
    """(sum_i w_i v_i^p)^(1/p) for convex weights and positive values;
    p = 0 is the geometric mean."""
    v = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if v.shape != w.shape:
        raise ValueError("values and weights must have the same length")
    if np.any(v <= 0):
        raise ValueError("power mean needs strictly positive values")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be convex (nonnegative, sum 1)")
    logv = np.log(v)
    if p == 0:
        return float(math.exp(np.dot(w, logv)))
    pos = w > 0
    return float(math.exp(_logsumexp(np.log(w[pos]) + p * logv[pos]) / p))


@dataclass(frozen=True)
class GaussianSpec:
    """One conditional Gaussian branch: mean, sigma, and confidence."""

    mean: float
    sigma: float
    beta: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.beta > 0 or math.isinf(self.beta):
            raise ValueError("beta must be positive and finite")


def gaussian_pair_inconsistency(spec1: GaussianSpec,
                                spec2: GaussianSpec) -> float:
    """Least inconsistency of two Gaussian beliefs about one real variable:

        (b1+b2) log( QM_w(s1,s2) / GM_w(s1,s2) )
        + (1/2) (b1 b2/(b1+b2)) ((m1-m2)/QM_w(s1,s2))^2

    where the power-mean weights w are the normalized confidences in
    reversed order, w = (b2, b1)/(b1+b2).
    """
    b1, b2 = spec1.beta, spec2.beta
    w = np.array([b2, b1]) / (b1 + b2)
    sig = (spec1.sigma, spec2.sigma)
    qm = power_mean(sig, w, 2)
    gm = power_mean(sig, w, 0)
    spread = (b1 + b2) * math.log(qm / gm)
    gap = 0.5 * (b1 * b2 / (b1 + b2)) * ((spec1.mean - spec2.mean) / qm) ** 2
    return spread + gap


def two_gaussian_inconsistency(specs1, specs2, d) -> Score:
    """Expected Gaussian-pair inconsistency under a distribution ``d``
    over a finite input variable, with per-input parameters."""
    d = np.asarray(getattr(d, "probs", d), dtype=np.float64).reshape(-1)
    specs1 = tuple(specs1)
    specs2 = tuple(specs2)
    if not (len(specs1) == len(specs2) == d.size):
        raise ValueError("need one GaussianSpec pair per input value")
    if abs(d.sum() - 1.0) > 1e-9 or np.any(d < 0):
        raise ValueError("d must be a distribution")
    total = 0.0
    for weight, g1, g2 in zip(d, specs1, specs2):
        if weight > 0:
            total += weight * gaussian_pair_inconsistency(g1, g2)
    return total


def complete_square(beta1: float, sigma1: float, f: float, beta2: float,
                    sigma2: float, h: float) -> tuple[float, float, float]:
    """Combine two weighted parabolas of y into one:

        (b1/s1^2)(y-f)^2 + (b2/s2^2)(y-h)^2
            = ((y-g)/sigma_tilde)^2 + residual * (f-h)^2

    Returns (g, sigma_tilde, residual)."""
    if sigma1 <= 0 or sigma2 <= 0:
        raise ValueError("sigmas must be positive")
    denom = beta1 * sigma2**2 + beta2 * sigma1**2
    g = (beta1 * sigma2**2 * f + beta2 * sigma1**2 * h) / denom
    sigma_tilde = sigma1 * sigma2 / math.sqrt(denom)
    residual = beta1 * beta2 / denom
    return g, sigma_tilde, residual


def discretized_gaussian(mean: float, sigma: float,
                         grid: np.ndarray) -> np.ndarray:
    """A unit-sum mass function proportional to the Gaussian density on a
    uniform grid."""
    z2 = ((grid - mean) / sigma) ** 2
    w = np.exp(-0.5 * (z2 - z2.min()))
    return w / w.sum()
