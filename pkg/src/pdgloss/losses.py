"""The loss zoo: standard objectives side by side with the PDGs whose
inconsistency reproduces them.

Every constructor returns a :class:`LossReport` holding the PDG, the loss
computed by its direct textbook formula, the solver's inconsistency, and
the additive correction constant (typically a data entropy) that aligns
the two.  The report never absorbs the correction silently; equality is
asserted on ``direct == inconsistency + correction``.

Degenerate beliefs (observations, deterministic functions) enter as
infinite-confidence edges; their structural handling is the solver's job.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import solver
from .closedform import GaussianSpec, two_gaussian_inconsistency
from .core import Cpd, Edge, JointTable, Pdg, Variable, build_pdg
from .errors import EmptyDataset, PdgError, UnknownVariable
from .scoring import entropy, relative_entropy

INF = math.inf

# Squared-error constant: with unit variances and confidences, the
# Gaussian-pair inconsistency is (1/4) E|f - h|^2.  The competing 1/2
# reading fails the discretized-minimization oracle (see tests), so 1/4
# is authoritative here.
MSE_COEFF_AUTHORITATIVE = 0.25
MSE_COEFF_REJECTED = 0.5


def _neg_log(x: float) -> float:
    return -math.log(x) if x > 0 else INF


class Dataset:
    """A list of records over one or more variables, with its empirical
    distribution.

    Counts are accumulated as exact rationals and converted to float
    once, so m copies of a record give exactly count/m.
    """

    def __init__(self, variables, records):
        self.variables = tuple(variables)
        if not self.variables:
            raise EmptyDataset("a dataset needs at least one variable")
        self.var_names = tuple(v.name for v in self.variables)
        self.records = tuple(tuple(r) for r in records)
        if not self.records:
            raise EmptyDataset("a dataset needs at least one record")
        index = {}
        for v in self.variables:
            index[v.name] = {label: i for i, label in enumerate(v.domain)}
        shape = tuple(v.size for v in self.variables)
        counts = {}
        for rec in self.records:
            if len(rec) != len(self.variables):
                raise UnknownVariable(
                    f"record {rec} does not match variables "
                    f"{self.var_names}")
            key = []
            for v, label in zip(self.variables, rec):
                if label not in index[v.name]:
                    raise UnknownVariable(
                        f"value {label!r} not in domain of {v.name!r}")
                key.append(index[v.name][label])
            key = tuple(key)
            counts[key] = counts.get(key, 0) + 1
        m = Fraction(len(self.records))
        probs = np.zeros(shape)
        for key, c in counts.items():
            probs[key] = float(Fraction(c) / m)
        self._empirical = JointTable(self.var_names, probs)

    def __len__(self):
        return len(self.records)

    @property
    def empirical(self) -> JointTable:
        return self._empirical

    def empirical_cpd(self) -> Cpd:
        """The empirical distribution as an unconditional cpd (an edge
        payload)."""
        emp = self._empirical
        return Cpd((), emp.variables, emp.probs.reshape(1, -1),
                   target_shape=emp.probs.shape)


@dataclass
class LossReport:
    """A named loss next to the inconsistency of its PDG.

    ``direct_loss`` is the textbook formula, ``pdg_inconsistency`` comes
    from the solver (or a closed form, for the Gaussian construction,
    whose PDG lives outside the finite-discrete core and is recorded as
    None), and ``correction`` is the additive constant separating them.
    ``extras`` carries construction-specific side values (variant scores,
    bounds, optimal predictors).
    """

    pdg: Pdg | None
    direct_loss: float
    pdg_inconsistency: float
    correction: float
    extras: dict = field(default_factory=dict)
    solve: solver.SolveResult | None = None

    @property
    def discrepancy(self) -> float:
        lhs, rhs = self.direct_loss, self.pdg_inconsistency + self.correction
        if math.isinf(lhs) or math.isinf(rhs):
            return 0.0 if lhs == rhs else INF
        return abs(lhs - rhs)


def _solve(pdg: Pdg, gamma: float = 0.0, **kw) -> solver.SolveResult:
    kw.setdefault("seed", 0)
    return solver.min_gamma_score(pdg, gamma, **kw)


def _event_edge(var: Variable, value: str, label: str | None = None,
                beta: float = INF) -> Edge:
    if value not in var.domain:
        raise UnknownVariable(f"value {value!r} not in domain of "
                              f"{var.name!r}")
    cpd = Cpd.point_mass(var.name, var.size, var.domain.index(value))
    return Edge(label or f"{var.name}={value}", cpd, beta=beta)


def _values_over(var: Variable, table) -> np.ndarray:
    """A real-valued function on the variable's domain, given as a
    mapping from labels or an array in domain order."""
    if isinstance(table, dict):
        try:
            vals = [table[label] for label in var.domain]
        except KeyError as missing:
            raise UnknownVariable(
                f"no value for label {missing} of {var.name!r}") from None
        return np.asarray(vals, dtype=np.float64)
    vals = np.asarray(table, dtype=np.float64)
    if vals.shape != (var.size,):
        raise UnknownVariable(
            f"need one value per label of {var.name!r}")
    return vals


# ---------------------------------------------------------------------
# Generative losses
# ---------------------------------------------------------------------

def surprisal_pdg(x_var: Variable, p: Cpd, observed: str) -> LossReport:
    """Believing p(X) and X = x costs exactly the surprisal -log p(x)."""
    pdg = build_pdg([x_var], [Edge("p", p, beta=1.0),
                              _event_edge(x_var, observed)])
    direct = _neg_log(float(p.table[0, x_var.domain.index(observed)]))
    res = _solve(pdg)
    return LossReport(pdg, direct, res.inconsistency, 0.0, solve=res)


def cross_entropy_pdg(x_var: Variable, p: Cpd,
                      dataset: Dataset) -> LossReport:
    """Average surprisal over a dataset: the inconsistency of {p, full
    confidence in the empirical distribution}, plus the data entropy.

    The alpha weights are zero so that the same alignment holds for
    every gamma: <.>_gamma + (1 + gamma) H(data) is gamma-free; the
    report's extras record it for gamma in {0.5, 1}.
    """
    if dataset.var_names != (x_var.name,):
        raise UnknownVariable("dataset must range over the model variable")
    pdg = build_pdg([x_var], [
        Edge("p", p, beta=1.0, alpha=0.0),
        Edge("data", dataset.empirical_cpd(), beta=INF, alpha=0.0),
    ])
    emp = dataset.empirical.probs
    logp_terms = [_neg_log(float(p.table[0, i])) if emp[i] > 0 else 0.0
                  for i in range(x_var.size)]
    direct = float(sum(emp[i] * logp_terms[i] for i in range(x_var.size)))
    h_data = entropy(emp)
    res = _solve(pdg)
    extras = {}
    for gamma in (0.5, 1.0):
        val = _solve(pdg, gamma).inconsistency
        extras[f"gamma_{gamma}_aligned"] = val + (1 + gamma) * h_data
    return LossReport(pdg, direct, res.inconsistency, h_data,
                      extras=extras, solve=res)


def marginal_nll_pdg(x_var: Variable, z_var: Variable, p: Cpd,
                     observed: str) -> LossReport:
    """Partial observation of a joint model: the inconsistency of
    {p(X,Z), X = x} is -log sum_z p(x, z)."""
    if p.targets != (x_var.name, z_var.name):
        raise UnknownVariable("joint cpd must target (X, Z) in order")
    pdg = build_pdg([x_var, z_var], [Edge("p", p, beta=1.0),
                                     _event_edge(x_var, observed)])
    joint = p.table.reshape(x_var.size, z_var.size)
    xi = x_var.domain.index(observed)
    direct = _neg_log(float(joint[xi].sum()))
    res = _solve(pdg)
    extras = {}
    row = joint[xi]
    if row.sum() > 0:
        extras["posterior_given_x"] = row / row.sum()
    return LossReport(pdg, direct, res.inconsistency, 0.0,
                      extras=extras, solve=res)


def marginal_nll_dataset_pdg(x_var: Variable, z_var: Variable, p: Cpd,
                             dataset: Dataset) -> LossReport:
    """Average marginal negative log likelihood over a dataset on X, with
    correction H(data)."""
    if dataset.var_names != (x_var.name,):
        raise UnknownVariable("dataset must range over X")
    if p.targets != (x_var.name, z_var.name):
        raise UnknownVariable("joint cpd must target (X, Z) in order")
    pdg = build_pdg([x_var, z_var], [
        Edge("p", p, beta=1.0),
        Edge("data", dataset.empirical_cpd(), beta=INF),
    ])
    joint = p.table.reshape(x_var.size, z_var.size)
    emp = dataset.empirical.probs
    direct = float(sum(emp[i] * _neg_log(float(joint[i].sum()))
                       for i in range(x_var.size) if emp[i] > 0))
    res = _solve(pdg)
    return LossReport(pdg, direct, res.inconsistency, entropy(emp),
                      solve=res)


def supervised_ce_pdg(x_var: Variable, y_var: Variable, h: Cpd,
                      dataset: Dataset) -> LossReport:
    """Cross-entropy of a predictor against labeled data, minus the
    empirical conditional entropy of labels given inputs."""
    if dataset.var_names != (x_var.name, y_var.name):
        raise UnknownVariable("dataset must range over (X, Y)")
    if h.sources != (x_var.name,) or h.targets != (y_var.name,):
        raise UnknownVariable("predictor must map X to Y")
    pdg = build_pdg([x_var, y_var], [
        Edge("data", dataset.empirical_cpd(), beta=INF),
        Edge("h", h, beta=1.0),
    ])
    direct_terms = []
    for (x, y) in dataset.records:
        direct_terms.append(_neg_log(float(
            h.table[x_var.domain.index(x), y_var.domain.index(y)])))
    direct = float(np.mean(direct_terms)) if all(
        math.isfinite(t) for t in direct_terms) else INF
    emp = dataset.empirical.probs
    h_cond = entropy(emp) - entropy(emp.sum(axis=1))
    res = _solve(pdg)
    return LossReport(pdg, direct, res.inconsistency, h_cond, solve=res)


def accuracy_pdg(x_var: Variable, y_var: Variable, f: Cpd, h: Cpd,
                 d: Cpd, beta_d: float = 1.0, beta_f: float = 1.0,
                 beta_h: float = 1.0) -> LossReport:
    """beta_d times the negative log accuracy of h against true labels f
    under the input distribution d.  The value scales with the confidence
    in d and is invariant to the confidences in f and h (checked by
    recomputation with perturbed values, recorded in extras)."""
    if not (f.is_degenerate() and h.is_degenerate()):
        raise PdgError("accuracy needs deterministic label cpds")

    def build(bf, bh):
        return build_pdg([x_var, y_var], [
            Edge("f", f, beta=bf), Edge("h", h, beta=bh),
            Edge("d", d, beta=beta_d),
        ])

    agree = (f.table.argmax(axis=1) == h.table.argmax(axis=1))
    acc = float(np.dot(d.table[0], agree))
    direct = beta_d * _neg_log(acc)
    pdg = build(beta_f, beta_h)
    res = _solve(pdg)
    perturbed = _solve(build(beta_f * 1.7 + 0.3, beta_h * 0.4 + 0.9))
    return LossReport(pdg, direct, res.inconsistency, 0.0,
                      extras={"accuracy": acc,
                              "perturbed_confidences_value":
                                  perturbed.inconsistency},
                      solve=res)


def mse_pdg(x_var: Variable, f_values, h_values,
            dataset: Dataset) -> LossReport:
    """Squared error between two real-valued predictors with unit
    Gaussian noise on the output.

    The value goes through the Gaussian-pair closed form (sigma = beta
    = 1); its PDG has a real-valued output variable, outside the finite
    discrete core, so the report carries pdg = None.
    """
    if dataset.var_names != (x_var.name,):
        raise UnknownVariable("dataset must range over X")
    fv = _values_over(x_var, f_values)
    hv = _values_over(x_var, h_values)
    emp = dataset.empirical.probs
    specs1 = [GaussianSpec(float(v), 1.0, 1.0) for v in fv]
    specs2 = [GaussianSpec(float(v), 1.0, 1.0) for v in hv]
    value = two_gaussian_inconsistency(specs1, specs2, emp)
    direct = MSE_COEFF_AUTHORITATIVE * float(np.dot(emp, (fv - hv) ** 2))
    return LossReport(None, direct, value, 0.0,
                      extras={"coefficient": MSE_COEFF_AUTHORITATIVE})


def regularized_pdg(theta_var: Variable, y_var: Variable, p: Cpd, q: Cpd,
                    theta: str, dataset: Dataset,
                    beta_q: float = 1.0) -> LossReport:
    """Fitting loss plus a prior penalty: cross entropy of p(Y | theta)
    against trusted data, plus beta_q * -log q(theta), minus H(data)."""
    if dataset.var_names != (y_var.name,):
        raise UnknownVariable("dataset must range over Y")
    if p.sources != (theta_var.name,) or p.targets != (y_var.name,):
        raise UnknownVariable("model must map Theta to Y")
    pdg = build_pdg([theta_var, y_var], [
        Edge("p", p, beta=1.0),
        Edge("q", q, beta=beta_q),
        _event_edge(theta_var, theta, label="theta"),
        Edge("data", dataset.empirical_cpd(), beta=INF),
    ])
    emp = dataset.empirical.probs
    ti = theta_var.domain.index(theta)
    ce = float(sum(emp[i] * _neg_log(float(p.table[ti, i]))
                   for i in range(y_var.size) if emp[i] > 0))
    regularizer = beta_q * _neg_log(float(q.table[0, ti]))
    direct = ce + regularizer
    res = _solve(pdg)
    return LossReport(pdg, direct, res.inconsistency, entropy(emp),
                      extras={"cross_entropy": ce,
                              "regularizer": regularizer},
                      solve=res)


# ---------------------------------------------------------------------
# Variational objectives
# ---------------------------------------------------------------------

def elbo_pdg(x_var: Variable, z_var: Variable, p: Cpd, q: Cpd,
             observed: str) -> LossReport:
    """-ELBO(x) as the inconsistency of {p(X,Z), X = x, full confidence
    in the proposal q(Z)}.  extras carry the evidence bound."""
    if p.targets != (x_var.name, z_var.name):
        raise UnknownVariable("joint cpd must target (X, Z) in order")
    if q.targets != (z_var.name,):
        raise UnknownVariable("proposal must be over Z")
    pdg = build_pdg([x_var, z_var], [
        Edge("p", p, beta=1.0),
        _event_edge(x_var, observed),
        Edge("q", q, beta=INF),
    ])
    joint = p.table.reshape(x_var.size, z_var.size)
    xi = x_var.domain.index(observed)
    qz = q.table[0]
    direct = 0.0
    for z in range(z_var.size):
        if qz[z] > 0:
            direct += (qz[z] * (math.log(qz[z]) - math.log(joint[xi, z]))
                       if joint[xi, z] > 0 else INF)
    neg_log_evidence = _neg_log(float(joint[xi].sum()))
    if direct < neg_log_evidence - 1e-9:
        raise PdgError("evidence bound violated; inputs are inconsistent")
    res = _solve(pdg)
    return LossReport(pdg, direct, res.inconsistency, 0.0,
                      extras={"neg_log_evidence": neg_log_evidence},
                      solve=res)


def _autoencoder_terms(x_var, z_var, prior, e, d, xi):
    ez = e.table[xi]  # encoder row at the observation
    rec = 0.0
    for z in range(z_var.size):
        if ez[z] > 0:
            dz = d.table[z, xi]
            rec += ez[z] * _neg_log(float(dz))
    kl = relative_entropy(ez, prior.table[0])
    return rec, kl


def vae_elbo_pdg(x_var: Variable, z_var: Variable, prior: Cpd, e: Cpd,
                 d: Cpd, observed: str, beta: float = 1.0) -> LossReport:
    """-beta-ELBO(x) for an autoencoder: reconstruction error plus beta
    times the KL from the encoding to the prior; the PDG weights the
    prior edge by beta.  beta = 1 is the ELBO, beta = 0 pure
    reconstruction."""
    if e.sources != (x_var.name,) or e.targets != (z_var.name,):
        raise UnknownVariable("encoder must map X to Z")
    if d.sources != (z_var.name,) or d.targets != (x_var.name,):
        raise UnknownVariable("decoder must map Z to X")
    if prior.targets != (z_var.name,):
        raise UnknownVariable("prior must be over Z")
    xi = x_var.domain.index(observed)
    edges = [
        Edge("e", e, beta=INF),
        _event_edge(x_var, observed),
        Edge("d", d, beta=1.0),
    ]
    if beta > 0:
        edges.append(Edge("prior", prior, beta=beta))
    pdg = build_pdg([x_var, z_var], edges)
    rec, kl = _autoencoder_terms(x_var, z_var, prior, e, d, xi)
    direct = rec + beta * kl
    # the decoded-prior evidence bound, tight for the exact posterior
    px = float(np.dot(prior.table[0], d.table[:, xi]))
    neg_log_evidence = _neg_log(px)
    if beta == 1.0 and direct < neg_log_evidence - 1e-9:
        raise PdgError("evidence bound violated; inputs are inconsistent")
    res = _solve(pdg)
    return LossReport(pdg, direct, res.inconsistency, 0.0,
                      extras={"reconstruction": rec, "kl_to_prior": kl,
                              "neg_log_evidence": neg_log_evidence},
                      solve=res)


def vae_elbo_dataset_pdg(x_var: Variable, z_var: Variable, prior: Cpd,
                         e: Cpd, d: Cpd, dataset: Dataset,
                         beta: float = 1.0) -> LossReport:
    """Whole-dataset variant: the observation edge becomes the empirical
    distribution and the data entropy joins as the correction.

    Only beta = 1 is accepted.  For beta != 1 the average of per-sample
    beta-weighted objectives differs from the pinned PDG's inconsistency
    by (beta - 1) times the mutual information the encoder induces
    between input and code, which is not a data-only constant, so no
    correction aligns them; reweight the prior per sample via
    :func:`vae_elbo_pdg` instead.
    """
    if beta != 1.0:
        raise PdgError("the whole-dataset autoencoder identity needs "
                       "beta = 1")
    if dataset.var_names != (x_var.name,):
        raise UnknownVariable("dataset must range over X")
    pdg = build_pdg([x_var, z_var], [
        Edge("e", e, beta=INF),
        Edge("data", dataset.empirical_cpd(), beta=INF),
        Edge("d", d, beta=1.0),
        Edge("prior", prior, beta=1.0),
    ])
    emp = dataset.empirical.probs
    direct = 0.0
    for xi in range(x_var.size):
        if emp[xi] > 0:
            rec, kl = _autoencoder_terms(x_var, z_var, prior, e, d, xi)
            direct += emp[xi] * (rec + kl)
    res = _solve(pdg)
    return LossReport(pdg, direct, res.inconsistency, entropy(emp),
                      solve=res)


# ---------------------------------------------------------------------
# Arbitrary costs
# ---------------------------------------------------------------------

def expected_cost_pdg(x_var: Variable, p: Cpd, cost) -> LossReport:
    """Expected cost E_p c(X), encoded by a truth variable T that the
    cpd exp(-c(x)) threatens to falsify.

    extras carry the soft variant (confidence 1 in p instead of full),
    whose value is -log E_p exp(-c(X)) and whose optimizer tilts p
    toward cheap outcomes.
    """
    cv = _values_over(x_var, cost)
    if np.any(cv < 0) or not np.all(np.isfinite(cv)):
        raise PdgError("costs must be finite and nonnegative")
    t_var = Variable("T", ("t", "f"))
    chat = np.column_stack([np.exp(-cv), 1.0 - np.exp(-cv)])
    chat_cpd = Cpd((x_var.name,), (t_var.name,), chat)

    def build(beta_p):
        return build_pdg([x_var, t_var], [
            Edge("cost", chat_cpd, beta=1.0),
            Edge("p", p, beta=beta_p),
            _event_edge(t_var, "t"),
        ])

    px = p.table[0]
    direct = float(np.dot(px, cv))
    res = _solve(build(INF))
    soft_direct = -math.log(float(np.dot(px, np.exp(-cv))))
    soft = _solve(build(1.0))
    return LossReport(build(INF), direct, res.inconsistency, 0.0,
                      extras={"soft_direct": soft_direct,
                              "soft_inconsistency": soft.inconsistency},
                      solve=res)


# ---------------------------------------------------------------------
# Two-source training scenario
# ---------------------------------------------------------------------

@dataclass
class ScenarioReport:
    """Three ways to train one predictor from a simulation s(X,Y) and
    data d(X,Y), each as a PDG value.

    * mixture: full confidence in a lambda-weighted switch between the
      sources; equals the mixture cross-entropy up to the mixture's
      conditional label entropy.
    * product: surprisal discounted by the other source's density; a
      high-gamma inconsistency, matched up to the stated constants.
    * blend: confidences (lambda_s, lambda_d) directly; its optimal
      predictor is the normalized lambda-weighted geometric mean of the
      source conditionals, and it is calibrated (s = d recovers s(Y|X)).
    """

    l1_direct: float
    l1_inconsistency: float
    l1_correction: float
    l2_direct: float
    l2_gamma_value: float
    l2_scale: float       # the product density's normalizer C
    l2_constant: float    # C H_nu(Y|X) + gamma C log C
    l2_gamma: float
    l3_value: float
    l3_optimal_h: Cpd
    l3_base_value: float  # without the predictor edge
    pdg_l1: Pdg
    pdg_l2: Pdg
    pdg_l3: Pdg

    @property
    def l1_discrepancy(self) -> float:
        return abs(self.l1_direct
                   - (self.l1_inconsistency + self.l1_correction))

    @property
    def l2_discrepancy(self) -> float:
        return abs(self.l2_direct
                   - (self.l2_scale * self.l2_gamma_value
                      + self.l2_constant))


def scenario_losses(x_var: Variable, y_var: Variable, s: Cpd, d: Cpd,
                    h: Cpd, lambda_s: float, lambda_d: float,
                    gamma: float = 1e3) -> ScenarioReport:
    if not (lambda_s > 0 and lambda_d > 0
            and abs(lambda_s + lambda_d - 1.0) < 1e-9):
        raise PdgError("lambda weights must be positive and sum to 1")
    for cpd, nm in ((s, "s"), (d, "d")):
        if cpd.targets != (x_var.name, y_var.name):
            raise UnknownVariable(f"source {nm} must be a joint over "
                                  f"(X, Y)")
    if h.sources != (x_var.name,) or h.targets != (y_var.name,):
        raise UnknownVariable("predictor must map X to Y")
    nx, ny = x_var.size, y_var.size
    sj = s.table.reshape(nx, ny)
    dj = d.table.reshape(nx, ny)
    ht = h.table

    def ce(source):
        total = 0.0
        for x in range(nx):
            for y in range(ny):
                if source[x, y] > 0:
                    total += source[x, y] * _neg_log(float(ht[x, y]))
        return total

    # mixture loss: switch variable with full confidence
    z_var = Variable("Z", ("sim", "dat"))
    lam = Cpd((), (z_var.name,), [[lambda_s, lambda_d]])
    mapping = Cpd((z_var.name,), (x_var.name, y_var.name),
                  np.vstack([sj.reshape(-1), dj.reshape(-1)]),
                  target_shape=(nx, ny))
    pdg_l1 = build_pdg([z_var, x_var, y_var], [
        Edge("lam", lam, beta=INF),
        Edge("sources", mapping, beta=INF),
        Edge("h", h, beta=1.0),
    ])
    l1_direct = lambda_s * ce(sj) + lambda_d * ce(dj)
    mix = lambda_s * sj + lambda_d * dj
    h_mix_cond = entropy(mix) - entropy(mix.sum(axis=1))
    res1 = _solve(pdg_l1)

    # product loss: both sources at confidence gamma, alpha 1; the
    # predictor edge carries no structural weight so the gamma terms
    # cancel into a single product-density divergence
    def joint_edge(name, table, beta, alpha=1.0):
        cpd = Cpd((), (x_var.name, y_var.name), table.reshape(1, -1),
                  target_shape=(nx, ny))
        return Edge(name, cpd, beta=beta, alpha=alpha)

    pdg_l2 = build_pdg([x_var, y_var], [
        joint_edge("s", sj, beta=gamma),
        joint_edge("d", dj, beta=gamma),
        Edge("h", h, beta=1.0, alpha=0.0),
    ])
    l2_direct = 0.0
    for x in range(nx):
        for y in range(ny):
            if dj[x, y] * sj[x, y] > 0:
                l2_direct += dj[x, y] * sj[x, y] * _neg_log(float(ht[x, y]))
    c_scale = float((sj * dj).sum())
    nu = sj * dj / c_scale
    h_nu_cond = entropy(nu) - entropy(nu.sum(axis=1))
    l2_constant = c_scale * h_nu_cond + gamma * c_scale * math.log(c_scale)
    res2 = _solve(pdg_l2, gamma)

    # blended confidences
    pdg_l3 = build_pdg([x_var, y_var], [
        joint_edge("s", sj, beta=lambda_s),
        joint_edge("d", dj, beta=lambda_d),
        Edge("h", h, beta=1.0),
    ])
    res3 = _solve(pdg_l3)
    pdg_l3_base = build_pdg([x_var, y_var], [
        joint_edge("s", sj, beta=lambda_s),
        joint_edge("d", dj, beta=lambda_d),
    ])
    res3_base = _solve(pdg_l3_base)
    with np.errstate(divide="ignore"):
        log_gm = lambda_s * np.log(sj) + lambda_d * np.log(dj)
    gm = np.exp(log_gm - log_gm[np.isfinite(log_gm)].max())
    gm[~np.isfinite(log_gm)] = 0.0
    rows = gm.sum(axis=1, keepdims=True)
    h_star = Cpd((x_var.name,), (y_var.name,), gm / rows)

    return ScenarioReport(
        l1_direct=l1_direct, l1_inconsistency=res1.inconsistency,
        l1_correction=h_mix_cond,
        l2_direct=l2_direct, l2_gamma_value=res2.inconsistency,
        l2_scale=c_scale, l2_constant=l2_constant, l2_gamma=gamma,
        l3_value=res3.inconsistency, l3_optimal_h=h_star,
        l3_base_value=res3_base.inconsistency,
        pdg_l1=pdg_l1, pdg_l2=pdg_l2, pdg_l3=pdg_l3)


# ---------------------------------------------------------------------
# Loss functions on label pairs, and the high-gamma limit
# ---------------------------------------------------------------------

def supervised_limit_pdg(x_var: Variable, y_var: Variable,
                         dataset: Dataset, h: Cpd,
                         loss) -> LossReport:
    """Expected loss of a probabilistic predictor against labeled data,
    as the high-gamma limit of the inconsistency of setting the whole
    qualitative picture in stone.

    ``loss`` maps (y, y') label pairs to finite nonnegative reals (a
    dict, or a (|Y|, |Y|) array).  extras record the gamma = 0 value,
    which is lower: with the structural weights ignored, the optimizer
    can still correlate the predicted label with the true one.
    """
    if dataset.var_names != (x_var.name, y_var.name):
        raise UnknownVariable("dataset must range over (X, Y)")
    yp_var = Variable(y_var.name + "_pred", y_var.domain)
    if h.sources != (x_var.name,):
        raise UnknownVariable("predictor must read X")
    h = Cpd((x_var.name,), (yp_var.name,), h.table)
    if isinstance(loss, dict):
        lv = np.zeros((y_var.size, y_var.size))
        for (a, b), v in loss.items():
            lv[y_var.domain.index(a), y_var.domain.index(b)] = v
    else:
        lv = np.asarray(loss, dtype=np.float64)
    if lv.shape != (y_var.size, y_var.size):
        raise PdgError("loss table must be |Y| x |Y|")
    if np.any(lv < 0) or not np.all(np.isfinite(lv)):
        raise PdgError("losses must be finite and nonnegative")

    t_var = Variable("T", ("t", "f"))
    flat = np.exp(-lv.reshape(-1))
    lhat = Cpd((y_var.name, yp_var.name), (t_var.name,),
               np.column_stack([flat, 1.0 - flat]),
               source_shape=(y_var.size, yp_var.size))
    pdg = build_pdg([x_var, y_var, yp_var, t_var], [
        Edge("data", dataset.empirical_cpd(), beta=INF, alpha=1.0),
        Edge("h", h, beta=INF, alpha=1.0),
        Edge("losskernel", lhat, beta=1.0, alpha=1.0),
        _event_edge(t_var, "t"),
    ])
    emp = dataset.empirical.probs
    direct = 0.0
    for x in range(x_var.size):
        for y in range(y_var.size):
            if emp[x, y] > 0:
                direct += float(emp[x, y] * np.dot(h.table[x], lv[y]))
    value = solver.limit_gamma_inf(pdg)
    squirm = _solve(pdg)
    return LossReport(pdg, direct, value, 0.0,
                      extras={"gamma0_value": squirm.inconsistency},
                      solve=squirm)
