"""Scoring a joint distribution against a PDG.

Three quantities, all in nats:

* ``incompatibility``: the confidence-weighted sum, over edges, of the
  expected relative entropy between the joint's conditional and the
  edge's cpd.  Hard edges (infinite confidence) contribute 0 when matched
  on every positive-mass row and +inf otherwise.
* ``ideficiency``: -H(mu) plus the alpha-weighted conditional entropies
  of each edge's targets given its sources.  May be negative.
* ``gamma_score``: incompatibility + gamma * ideficiency.  For PDGs with
  only finite confidences the same number is also computed by
  :func:`gamma_score_expectation`, a single expectation over joint states;
  the two paths must agree and tests hold them to 1e-9.

Accumulation order is canonical (edges sorted by label, states in C
order), so scores are bit-identical under edge permutation.
"""

from __future__ import annotations

import math

import numpy as np

from .core import Edge, JointTable, Pdg, _EdgeIndex
from .errors import AlternatePathUnavailable, ShapeMismatch

Score = float
"""Extended real in nats; ``math.inf`` is a legal value."""

HARD_MATCH_TOL = 1e-9  # solver outputs are approximate, so not exact equality

LN2 = math.log(2.0)


def to_bits(nats: Score) -> Score:
    return nats / LN2


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats with the 0 log 0 = 0 convention."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    pos = p > 0
    return float(-np.dot(p[pos], np.log(p[pos])))


def relative_entropy(mu: np.ndarray, nu: np.ndarray) -> Score:
    """D(mu || nu) in nats; +inf when mu puts mass outside nu's support."""
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    nu = np.asarray(nu, dtype=np.float64).reshape(-1)
    if mu.shape != nu.shape:
        raise ShapeMismatch("relative_entropy needs equal-length vectors")
    pos = mu > 0
    if np.any(nu[pos] <= 0):
        return math.inf
    return float(np.dot(mu[pos], np.log(mu[pos] / nu[pos])))


def _flat_mu(pdg: Pdg, mu: JointTable) -> np.ndarray:
    if mu.variables != pdg.var_names:
        if set(mu.variables) != set(pdg.var_names):
            raise ShapeMismatch(
                f"joint is over {mu.variables}, PDG has {pdg.var_names}")
        mu = mu.reorder(pdg.var_names)
    if mu.probs.shape != pdg.shape:
        raise ShapeMismatch("joint table shape does not match the PDG")
    return mu.probs.reshape(-1)


def _edge_pair_marginal(ei: _EdgeIndex, flat: np.ndarray) -> np.ndarray:
    return np.bincount(ei.pair_index, weights=flat,
                       minlength=ei.n_src * ei.n_tgt)


def edge_divergence(ei: _EdgeIndex, flat: np.ndarray,
                    hard: bool = False) -> Score:
    """E_{x ~ mu} D(mu(Y|x) || p(Y|x)) for one edge, skipping zero-mass
    source rows.  With ``hard=True``, returns 0/inf by conditional match
    within ``HARD_MATCH_TOL`` instead."""
    m_pair = _edge_pair_marginal(ei, flat).reshape(ei.n_src, ei.n_tgt)
    m_src = m_pair.sum(axis=1)
    p = ei.p_flat.reshape(ei.n_src, ei.n_tgt)
    rows = m_src > 0
    if hard:
        cond = m_pair[rows] / m_src[rows, None]
        if np.max(np.abs(cond - p[rows]), initial=0.0) > HARD_MATCH_TOL:
            return math.inf
        return 0.0
    pos = m_pair > 0
    if np.any(p[pos] <= 0):
        return math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(pos, m_pair / (m_src[:, None] * p), 1.0)
    return float(np.sum(m_pair[pos] * np.log(ratio[pos])))


def incompatibility(pdg: Pdg, mu: JointTable) -> Score:
    """Sum over edges of beta_L times the expected conditional relative
    entropy of the joint against the edge's cpd."""
    flat = _flat_mu(pdg, mu)
    total = 0.0
    for edge, ei in zip(pdg.sorted_edges, pdg.edge_indices):
        if edge.beta == 0:
            continue
        d = edge_divergence(ei, flat, hard=edge.is_hard)
        if math.isinf(d):
            return math.inf
        total += (d if edge.is_hard else edge.beta * d)
    return total


def ideficiency(pdg: Pdg, mu: JointTable) -> Score:
    """-H(mu) + sum_L alpha_L * H_mu(targets_L | sources_L)."""
    flat = _flat_mu(pdg, mu)
    total = -entropy(flat)
    for edge, ei in zip(pdg.sorted_edges, pdg.edge_indices):
        if edge.alpha == 0:
            continue
        m_pair = _edge_pair_marginal(ei, flat)
        m_src = m_pair.reshape(ei.n_src, ei.n_tgt).sum(axis=1)
        total += edge.alpha * (entropy(m_pair) - entropy(m_src))
    return total


def gamma_score(pdg: Pdg, mu: JointTable, gamma: float) -> Score:
    """incompatibility + gamma * ideficiency."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    inc = incompatibility(pdg, mu)
    if math.isinf(inc):
        return math.inf
    return inc + (gamma * ideficiency(pdg, mu) if gamma else 0.0)


def gamma_score_expectation(pdg: Pdg, mu: JointTable,
                            gamma: float) -> Score:
    """The same gamma score as a single expectation over joint states:

        E_w [ sum_L ( beta_L log 1/p_L(y|x)
                      + (gamma alpha_L - beta_L) log 1/mu(y|x) )
              - gamma log 1/mu(w) ].

    Only available when every confidence is finite.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if any(e.is_hard for e in pdg.edges):
        raise AlternatePathUnavailable(
            "the single-expectation formula needs finite confidences; "
            "use gamma_score instead")
    flat = _flat_mu(pdg, mu)
    support = flat > 0
    w = flat[support]
    per_state = gamma * np.log(w)  # - gamma log 1/mu(w)
    for edge, ei in zip(pdg.sorted_edges, pdg.edge_indices):
        m_pair = _edge_pair_marginal(ei, flat)
        m_src = m_pair.reshape(ei.n_src, ei.n_tgt).sum(axis=1)
        pair_s = ei.pair_index[support]
        src_s = ei.src_index[support]
        p_s = ei.p_flat[pair_s]
        if edge.beta > 0 and np.any(p_s <= 0):
            return math.inf
        log_cond = np.log(m_pair[pair_s]) - np.log(m_src[src_s])
        if edge.beta > 0:
            per_state += edge.beta * (-np.log(p_s))
        per_state += (gamma * edge.alpha - edge.beta) * (-log_cond)
    return float(np.dot(w, per_state))
