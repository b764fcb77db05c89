"""Minimizing the gamma score over joint distributions.

Strategy
--------
Hard (infinite-confidence) edges are handled structurally, never by a
large-beta penalty:

1. *Support restriction*: a state where any positive-confidence cpd
   assigns probability zero can never carry mass in a finite-score joint,
   so the search lives on the sub-simplex of the remaining states.  On
   that support every score term is finite and smooth.
2. *Feasibility*: each hard edge pins a conditional marginal, a linear
   constraint on the joint.  Iterates are kept feasible by cyclic
   KL-projection (iterative proportional fitting): multiplying by
   ``c(t|s) / mu(t|s)`` is exactly the information projection onto one
   constraint, and cycling converges on their intersection.
3. *Descent*: exponentiated-gradient (mirror-descent) steps with Armijo
   backtracking, re-projected after every trial step.  Multiple restarts
   (Dirichlet(1) draws on the free block of the feasible family, plus one
   uniform start) guard against the non-convexity that appears when
   ``gamma * alpha_L > beta_L`` on some edge; gamma = 0 is convex and
   needs fewer.

Randomness is counter-based: restart ``k`` of seed ``s`` draws from
``Philox(key=(s, k))``, so results are reproducible under any execution
order and restarts may run in parallel.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import scoring
from .core import Edge, JointTable, Pdg
from .errors import AmbiguousStructure, UnsupportedHardStructure

RESIDUAL_TOL = 1e-7      # stationarity residual required for convergence
DEFAULT_TOL = 1e-10      # successive objective change
IPF_TOL = 1e-12          # feasibility violation target between steps
IPF_FINAL_TOL = 2e-13    # polish target for the reported argmin
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

_TINY = 1e-300


def _xlogx(v: np.ndarray) -> float:
    pos = v > 0
    return float(np.dot(v[pos], np.log(v[pos])))


# ---------------------------------------------------------------------
# Feasible family
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class FeasibleFamily:
    """Structure of the joints satisfying every hard edge exactly.

    ``pinned`` lists the hard edges in a topological order of their
    source->target dependencies (targets pairwise disjoint, no cycles).
    ``free_variables`` are the variables not targeted by any hard edge;
    the family's canonical members factor as the pinned cpds times a free
    conditional block, and :meth:`joint_from_free` builds one.   When no
    pinned edge reads a free variable the block conditions the free
    variables on the hard-covered ones; otherwise the block is an
    unconditional distribution over the free variables (which then feed
    the pinned cpds).
    """

    pdg: Pdg
    pinned: tuple[Edge, ...]
    soft: tuple[Edge, ...]
    hard_covered: tuple[str, ...]
    free_variables: tuple[str, ...]
    free_feeds_hard: bool

    @property
    def n_free_states(self) -> int:
        sizes = [self.pdg.variable(v).size for v in self.free_variables]
        return int(np.prod(sizes, dtype=np.int64)) if sizes else 1

    @property
    def n_covered_states(self) -> int:
        sizes = [self.pdg.variable(v).size for v in self.hard_covered]
        return int(np.prod(sizes, dtype=np.int64)) if sizes else 1

    def _hard_product(self) -> np.ndarray:
        """prod_i c_i(t_i | s_i) per flat joint state."""
        prod = np.ones(self.pdg.n_states)
        for edge in self.pinned:
            pair = self.pdg.flatten_assignment(edge.cpd.sources) \
                * edge.cpd.n_target_states \
                + self.pdg.flatten_assignment(edge.cpd.targets)
            prod *= edge.cpd.table.reshape(-1)[pair]
        return prod

    def joint_from_free(self, free_block: np.ndarray) -> JointTable:
        """Assemble a full joint from a free block.

        ``free_block`` is (n_covered_states, n_free_states) row-stochastic
        when the free block conditions on the covered variables, and a
        single distribution of length ``n_free_states`` when the free
        variables feed pinned edges (or when there is nothing covered).
        """
        free_block = np.asarray(free_block, dtype=np.float64)
        free_idx = self.pdg.flatten_assignment(self.free_variables)
        if self.free_feeds_hard:
            weight = free_block.reshape(-1)[free_idx]
        else:
            cov_idx = self.pdg.flatten_assignment(self.hard_covered)
            block = free_block.reshape(self.n_covered_states,
                                       self.n_free_states)
            weight = block[cov_idx, free_idx]
        flat = self._hard_product() * weight
        total = flat.sum()
        if not math.isclose(total, 1.0, abs_tol=1e-6):
            raise ValueError("free block does not normalize the joint")
        return self.pdg.joint_from_flat(flat / total)

    def uniform_free_block(self) -> np.ndarray:
        n = self.n_free_states
        if self.free_feeds_hard:
            return np.full(n, 1.0 / n)
        return np.full((self.n_covered_states, n), 1.0 / n)

    def random_free_block(self, rng: np.random.Generator) -> np.ndarray:
        n = self.n_free_states
        if self.free_feeds_hard:
            return rng.dirichlet(np.ones(n))
        return rng.dirichlet(np.ones(n), size=self.n_covered_states)


def feasible_family(pdg: Pdg) -> FeasibleFamily:
    """Partition edges into hard and soft and lay out the hard structure.

    Raises :class:`UnsupportedHardStructure`, naming the offending edges,
    when hard targets overlap or the hard source->target graph has a
    cycle.
    """
    hard = list(pdg.hard_edges)
    soft = tuple(pdg.soft_edges)

    covered: dict[str, str] = {}
    for e in hard:
        for v in e.cpd.targets:
            if v in covered:
                raise UnsupportedHardStructure(
                    f"hard edges {covered[v]!r} and {e.label!r} both "
                    f"target variable {v!r}")
            covered[v] = e.label

    # Kahn's algorithm on edge-level dependencies: L depends on L' when
    # some source of L is a target of L'.
    by_label = {e.label: e for e in hard}
    deps = {
        e.label: {covered[v] for v in e.cpd.sources
                  if v in covered and covered[v] != e.label}
        for e in hard
    }
    order: list[Edge] = []
    while deps:
        ready = sorted(lbl for lbl, d in deps.items() if not d)
        if not ready:
            raise UnsupportedHardStructure(
                f"hard edges form a dependency cycle: {sorted(deps)}")
        for lbl in ready:
            order.append(by_label[lbl])
            del deps[lbl]
        for d in deps.values():
            d.difference_update(ready)

    free = tuple(v for v in pdg.var_names if v not in covered)
    covered_order = tuple(v for v in pdg.var_names if v in covered)
    feeds = any(v in free for e in hard for v in e.cpd.sources)
    return FeasibleFamily(pdg=pdg, pinned=tuple(order), soft=soft,
                          hard_covered=covered_order, free_variables=free,
                          free_feeds_hard=feeds)


# ---------------------------------------------------------------------
# Compiled problem on the restricted support
# ---------------------------------------------------------------------

@dataclass
class _CompiledEdge:
    beta: float
    alpha: float
    hard: bool
    n_src: int
    n_tgt: int
    pair: np.ndarray      # per support state
    src: np.ndarray
    logp: np.ndarray | None
    c_flat: np.ndarray | None  # hard edges: target conditional to enforce


class _Problem:
    """The gamma objective, its gradient, feasibility projection, and
    stationarity residual, all over the restricted support."""

    def __init__(self, pdg: Pdg, gamma: float):
        self.pdg = pdg
        self.gamma = gamma
        support = np.ones(pdg.n_states, dtype=bool)
        for edge, ei in zip(pdg.sorted_edges, pdg.edge_indices):
            if edge.beta > 0:
                support &= ei.p_flat[ei.pair_index] > 0
        self.state_idx = np.flatnonzero(support)
        self.n = self.state_idx.size
        self.edges: list[_CompiledEdge] = []
        for edge, ei in zip(pdg.sorted_edges, pdg.edge_indices):
            pair = ei.pair_index[self.state_idx]
            src = ei.src_index[self.state_idx]
            logp = None
            if not edge.is_hard and edge.beta > 0:
                logp = np.log(ei.p_flat[pair])
            self.edges.append(_CompiledEdge(
                beta=edge.beta, alpha=edge.alpha, hard=edge.is_hard,
                n_src=ei.n_src, n_tgt=ei.n_tgt, pair=pair, src=src,
                logp=logp,
                c_flat=ei.p_flat if edge.is_hard else None))
        self.hard = [e for e in self.edges if e.hard]
        self._tangent = self._build_tangent_projector()

    # -- feasibility ---------------------------------------------------

    def ipf(self, mu: np.ndarray, tol: float = IPF_TOL,
            max_passes: int = 4000) -> tuple[np.ndarray, float]:
        """Cyclic KL projection onto the hard-edge constraints."""
        if not self.hard:
            return mu, 0.0
        viol = math.inf
        for _ in range(max_passes):
            for e in self.hard:
                cells = e.n_src * e.n_tgt
                m_pair = np.bincount(e.pair, weights=mu, minlength=cells)
                m_src = m_pair.reshape(e.n_src, e.n_tgt).sum(axis=1)
                target = e.c_flat * np.repeat(m_src, e.n_tgt)
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(m_pair > 0, target / m_pair, 0.0)
                mu = mu * ratio[e.pair]
            total = mu.sum()
            if total <= 0:
                return mu, math.inf
            mu = mu / total
            viol = self.violation(mu)
            if viol < tol:
                break
        return mu, viol

    def violation(self, mu: np.ndarray) -> float:
        worst = 0.0
        for e in self.hard:
            cells = e.n_src * e.n_tgt
            m_pair = np.bincount(e.pair, weights=mu, minlength=cells)
            m = m_pair.reshape(e.n_src, e.n_tgt)
            m_src = m.sum(axis=1)
            rows = m_src > 1e-13
            if not np.any(rows):
                continue
            cond = m[rows] / m_src[rows, None]
            c = e.c_flat.reshape(e.n_src, e.n_tgt)[rows]
            worst = max(worst, float(np.max(np.abs(cond - c))))
        return worst

    # -- objective and gradient ----------------------------------------

    def objective(self, mu: np.ndarray) -> float:
        gamma = self.gamma
        val = gamma * _xlogx(mu)  # - gamma H(mu)
        for e in self.edges:
            weight_inc = 0.0 if e.hard else e.beta
            weight_ent = gamma * e.alpha
            if weight_inc == 0.0 and weight_ent == 0.0:
                continue
            m_pair = np.bincount(e.pair, weights=mu,
                                 minlength=e.n_src * e.n_tgt)
            m_src = m_pair.reshape(e.n_src, e.n_tgt).sum(axis=1)
            cond_neg_ent = _xlogx(m_pair) - _xlogx(m_src)
            if weight_inc:
                val += weight_inc * (cond_neg_ent - float(np.dot(mu, e.logp)))
            val -= weight_ent * cond_neg_ent
        return val

    def gradient(self, mu: np.ndarray) -> np.ndarray:
        gamma = self.gamma
        logmu = np.log(np.maximum(mu, _TINY))
        g = gamma * (logmu + 1.0) if gamma else np.zeros_like(mu)
        for e in self.edges:
            weight_inc = 0.0 if e.hard else e.beta
            coeff = weight_inc - gamma * e.alpha
            if coeff == 0.0 and weight_inc == 0.0:
                continue
            m_pair = np.bincount(e.pair, weights=mu,
                                 minlength=e.n_src * e.n_tgt)
            m_src = m_pair.reshape(e.n_src, e.n_tgt).sum(axis=1)
            log_cond = (np.log(np.maximum(m_pair[e.pair], _TINY))
                        - np.log(np.maximum(m_src[e.src], _TINY)))
            if coeff:
                g += coeff * log_cond
            if weight_inc:
                g -= weight_inc * e.logp
        return g

    # -- stationarity ----------------------------------------------------

    def _build_tangent_projector(self):
        if not self.hard:
            return None
        rows = [np.ones(self.n)]
        for e in self.hard:
            c = e.c_flat
            for cell in np.unique(e.pair):
                s = cell // e.n_tgt
                row = (e.pair == cell).astype(np.float64)
                row -= c[cell] * (e.src == s)
                rows.append(row)
        return np.vstack(rows)

    def corrected_gradient(self, mu: np.ndarray, g: np.ndarray) -> \
            tuple[np.ndarray, np.ndarray, float]:
        """KKT-corrected gradient for the constrained simplex problem.

        Fits multipliers for the hard-edge constraints (and normalization)
        by mu-weighted least squares, and removes their span from the
        gradient: the remainder ``gt`` generates feasible-to-first-order
        multiplicative steps, its mirror direction ``mu * gt`` is the
        steepest feasible descent direction, and the sup-norm of that
        direction, normalized by the centered gradient's scale, is the
        stationarity residual.
        """
        gbar = g - float(np.dot(mu, g))
        scale = max(1.0, float(np.max(np.abs(gbar), initial=0.0)))
        if self._tangent is None:
            d = mu * gbar
            return gbar, d, float(np.max(np.abs(d), initial=0.0)) / scale
        a = self._tangent
        weighted = a * mu
        gram = weighted @ a.T
        rhs = weighted @ gbar
        lam, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
        gt = gbar - a.T @ lam
        d = mu * gt
        return gt, d, float(np.max(np.abs(d), initial=0.0)) / scale

    # -- full-joint embedding -------------------------------------------

    def restrict(self, flat: np.ndarray) -> np.ndarray | None:
        mu = flat[self.state_idx]
        total = mu.sum()
        if total <= 1e-12:
            return None
        return mu / total

    def embed(self, mu: np.ndarray) -> JointTable:
        flat = np.zeros(self.pdg.n_states)
        flat[self.state_idx] = mu
        return self.pdg.joint_from_flat(flat)


# ---------------------------------------------------------------------
# Mirror descent
# ---------------------------------------------------------------------

@dataclass
class SolveResult:
    inconsistency: float
    argmin: JointTable
    iterations: int
    converged: bool
    restarts_used: int


def _exchange_polish(prob: _Problem, mu: np.ndarray, f: float,
                     max_passes: int = 6) -> tuple[np.ndarray, float]:
    """Exact 1-D minimizations along coordinate-exchange directions.

    Multiplicative updates approach boundary optima only geometrically;
    when a coordinate's mass should vanish, a line search along the
    (e_i - e_j) exchange jumps there directly.  Only sound without hard
    edges (exchanges break conditional constraints), and only worth the
    n^2 sweep on small supports.
    """
    if prob.hard or prob.n > 512:
        return mu, f
    n = prob.n
    for _ in range(max_passes):
        g = prob.gradient(mu)
        improved = False
        for i in range(n):
            for j in range(i + 1, n):
                span = mu[i] + mu[j]
                if span <= 0 or abs(g[i] - g[j]) * span < 1e-12:
                    continue
                lo, hi = 0.0, span
                x = mu.copy()

                def f_at(t):
                    x[i], x[j] = t, span - t
                    return prob.objective(x)

                x1 = hi - GOLDEN * (hi - lo)
                x2 = lo + GOLDEN * (hi - lo)
                f1, f2 = f_at(x1), f_at(x2)
                for _ in range(40):
                    if hi - lo < 1e-12 * span:
                        break
                    if f1 <= f2:
                        hi, x2, f2 = x2, x1, f1
                        x1 = hi - GOLDEN * (hi - lo)
                        f1 = f_at(x1)
                    else:
                        lo, x1, f1 = x1, x2, f2
                        x2 = lo + GOLDEN * (hi - lo)
                        f2 = f_at(x2)
                candidates = [0.0, span, 0.5 * (lo + hi)]
                vals = [f_at(t) for t in candidates]
                k = int(np.argmin(vals))
                if vals[k] < f - 1e-14:
                    mu = mu.copy()
                    mu[i], mu[j] = candidates[k], span - candidates[k]
                    f = vals[k]
                    improved = True
        if not improved:
            break
    return mu, f


def _mirror_descent(prob: _Problem, mu: np.ndarray, tol: float,
                    max_iter: int) -> tuple[np.ndarray, float, int, bool]:
    mu, viol = prob.ipf(mu)
    if not math.isfinite(viol) or viol > 1e-6:
        return mu, math.inf, 0, False
    f = prob.objective(mu)
    eta = 1.0
    last_drop = math.inf
    stagnant = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = prob.gradient(mu)
        gt, d_t, resid = prob.corrected_gradient(mu, g)
        if last_drop < tol and (resid < RESIDUAL_TOL or stagnant >= 30):
            # Either first-order stationary, or the objective has sat at
            # its evaluation noise floor long enough that the residual is
            # only reporting curvature the floating objective cannot see.
            converged = True
            break
        slope = float(np.dot(d_t, gt))
        if slope <= 1e-17 * max(1.0, abs(f)):
            converged = resid < RESIDUAL_TOL or stagnant >= 30
            break
        accepted = False
        g_shift = gt - gt.min()
        for _ in range(60):
            trial = mu * np.exp(-eta * g_shift)
            total = trial.sum()
            if total <= 0 or not np.all(np.isfinite(trial)):
                eta *= 0.5
                continue
            trial /= total
            trial, tviol = prob.ipf(trial)
            if tviol > 1e-8:
                eta *= 0.5
                continue
            f_trial = prob.objective(trial)
            if f_trial <= f - 1e-4 * eta * slope:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            converged = resid < RESIDUAL_TOL or stagnant >= 30
            break
        last_drop = f - f_trial
        stagnant = stagnant + 1 if last_drop < tol else 0
        mu, f = trial, f_trial
        eta = min(eta * 1.5, 1e8)
    return mu, f, it, converged


def min_gamma_score(pdg: Pdg, gamma: float, *, tol: float = DEFAULT_TOL,
                    max_iter: int = 2000, restarts: int | None = None,
                    seed: int = 0, threads: int = 1) -> SolveResult:
    """Compute the gamma-inconsistency inf_mu [pdg]_gamma(mu) and a
    minimizing joint.

    ``restarts`` counts the Dirichlet(1) starts drawn on the feasible
    family's free block; one uniform start is always added.  Defaults: 2
    when gamma = 0 (the objective is convex), 8 otherwise.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    fam = feasible_family(pdg)
    if restarts is None:
        restarts = 2 if gamma == 0 else 8
    prob = _Problem(pdg, gamma)
    if prob.n == 0:
        return SolveResult(math.inf, pdg.uniform_joint(), 0, True, 0)

    def starting_point(k: int) -> np.ndarray | None:
        if k == 0:
            block = fam.uniform_free_block()
        else:
            rng = np.random.Generator(np.random.Philox(key=(seed, k)))
            block = fam.random_free_block(rng)
        try:
            joint = fam.joint_from_free(block)
        except ValueError:
            return None
        mu = prob.restrict(joint.probs.reshape(-1))
        if mu is None:
            mu = np.full(prob.n, 1.0 / prob.n)
        return mu

    def run(k: int):
        mu0 = starting_point(k)
        if mu0 is None:
            return None
        mu, f, iters, conv = _mirror_descent(prob, mu0, tol, max_iter)
        # alternate descent with exchange polish until neither helps:
        # boundary optima are reached by the exchanges, interior
        # resettling by the descent
        for _ in range(3):
            mu2, f2 = _exchange_polish(prob, mu, f)
            if f2 >= f - max(tol, 1e-13):
                break
            mu, f, extra, conv = _mirror_descent(prob, mu2, tol,
                                                 max_iter)
            iters += extra
        return f, k, mu, iters, conv

    ks = range(restarts + 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, ks))
    else:
        outcomes = [run(k) for k in ks]
    outcomes = [o for o in outcomes if o is not None]
    if not outcomes:
        return SolveResult(math.inf, pdg.uniform_joint(), 0, False, restarts)

    total_iters = sum(o[3] for o in outcomes)
    f_best, _, mu_best, _, conv = min(outcomes, key=lambda o: (o[0], o[1]))
    mu_best, viol = prob.ipf(mu_best, tol=IPF_FINAL_TOL)
    argmin = prob.embed(mu_best)
    value = scoring.gamma_score(pdg, argmin, gamma)
    if math.isinf(value):
        conv = False
    return SolveResult(value, argmin, total_iters, conv, restarts)


def min_inconsistency(pdg: Pdg, **kw) -> SolveResult:
    """inf_mu of the incompatibility alone (gamma = 0)."""
    return min_gamma_score(pdg, 0.0, **kw)


# ---------------------------------------------------------------------
# Chernoff point of the two-belief family
# ---------------------------------------------------------------------

def chernoff_divergence(p, q, tol: float = 1e-8) -> tuple[float, float]:
    """The Chernoff point of the divergence family with confidences
    (beta, 1-beta): the tightest exponential error bound

        max_{beta in (0,1)}  -log sum_x p(x)^beta q(x)^(1-beta),

    located by golden-section search on the (convex, unimodal) log-sum.
    Returns (value, beta_star).  Degenerate input p = q returns
    (0, 0.5); disjoint supports give +inf.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("p and q must have the same length")
    if float(np.max(np.abs(p - q))) < 1e-12:
        return 0.0, 0.5
    keep = (p > 0) & (q > 0)
    if not np.any(keep):
        return math.inf, 0.5
    lp = np.log(p[keep])
    lq = np.log(q[keep])

    def logsum(beta: float) -> float:
        a = beta * lp + (1.0 - beta) * lq
        hi = a.max()
        return float(hi + np.log(np.sum(np.exp(a - hi))))

    lo, hi = 1e-6, 1.0 - 1e-6
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = logsum(x1), logsum(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = logsum(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = logsum(x2)
    beta_star = 0.5 * (lo + hi)
    return -logsum(beta_star), beta_star


# ---------------------------------------------------------------------
# The high-gamma limit for fully pinned structures
# ---------------------------------------------------------------------

def limit_gamma_inf(pdg: Pdg) -> float:
    """lim_{gamma -> inf} of the gamma-inconsistency when the hard edges
    (with their alpha structure) pin a unique joint.

    The hard edges must have pairwise-disjoint targets covering every
    variable, acyclic dependencies, and an alpha structure whose
    information deficiency vanishes at the pinned product; the scored
    value is then the incompatibility of the finite-confidence edges
    under that product.
    """
    fam = feasible_family(pdg)
    if fam.free_variables:
        raise AmbiguousStructure(
            f"variables {fam.free_variables} are not pinned by any hard "
            f"edge, so the high-gamma limit is not determined structurally")
    flat = fam._hard_product()
    total = flat.sum()
    if not math.isclose(total, 1.0, rel_tol=1e-9):
        raise AmbiguousStructure("hard cpds do not compose to a joint")
    mu_star = pdg.joint_from_flat(flat / total)
    idef = scoring.ideficiency(pdg, mu_star)
    if abs(idef) > 1e-9:
        raise AmbiguousStructure(
            f"the alpha structure leaves information deficiency {idef:.3g} "
            f"at the pinned joint; the limit is not the pinned score")
    soft_pdg = Pdg(pdg.variables, fam.soft, max_cells=pdg.max_cells)
    return scoring.incompatibility(soft_pdg, mu_star)
