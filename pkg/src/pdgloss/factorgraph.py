"""Weighted factor graphs: exact partition functions, conversion to PDGs,
and the free-energy identity.

A weighted factor graph assigns each factor a nonnegative table ``phi``
over its scope and a real exponent ``theta``; it induces the Gibbs
distribution proportional to ``prod_J phi_J(x_J)^theta_J`` with
normalizing constant ``Z``.  Converting to a PDG (one sourceless edge per
factor, cpd proportional to the factor, alpha = beta = theta) turns
``-log Z`` into the gamma = 1 inconsistency, and the Gibbs distribution
into its unique minimizer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import solver
from .core import (
    DEFAULT_MAX_CELLS,
    Cpd,
    Edge,
    JointTable,
    Pdg,
    Variable,
    build_pdg,
)
from .errors import (
    DuplicateLabel,
    InvalidCpd,
    StateSpaceTooLarge,
    UnknownVariable,
    ZeroFactor,
)


@dataclass(frozen=True)
class Factor:
    name: str
    scope: tuple[str, ...]
    phi: np.ndarray  # flat, row-major over the scope's domains
    theta: float = 1.0

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64).reshape(-1)
        if np.any(phi < 0) or not np.all(np.isfinite(phi)):
            raise InvalidCpd(f"factor {self.name!r} has negative or "
                             f"non-finite entries")
        if not np.any(phi > 0):
            raise InvalidCpd(f"factor {self.name!r} has no positive entry")
        phi = phi.copy()
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "scope", tuple(self.scope))
        object.__setattr__(self, "theta", float(self.theta))


@dataclass(frozen=True)
class WeightedFactorGraph:
    variables: tuple[Variable, ...]
    factors: tuple[Factor, ...]
    max_cells: int = DEFAULT_MAX_CELLS

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "factors", tuple(self.factors))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise DuplicateLabel("variable names must be unique")
        fnames = [f.name for f in self.factors]
        if len(set(fnames)) != len(fnames):
            raise DuplicateLabel("factor names must be unique")
        sizes = dict(zip(names, (v.size for v in self.variables)))
        for f in self.factors:
            cells = 1
            for v in f.scope:
                if v not in sizes:
                    raise UnknownVariable(
                        f"factor {f.name!r} references undeclared "
                        f"variable {v!r}")
                cells *= sizes[v]
            if cells != f.phi.size:
                raise InvalidCpd(
                    f"factor {f.name!r} has {f.phi.size} values for a "
                    f"scope of {cells} states")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(v.size for v in self.variables)

    @property
    def n_states(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))


def _log_weights(fg: WeightedFactorGraph) -> np.ndarray:
    """log prod_J phi_J(x_J)^theta_J per flat joint state (may be -inf,
    or +inf for negative theta on a zero cell)."""
    if fg.n_states > fg.max_cells:
        raise StateSpaceTooLarge(
            f"factor graph state space exceeds {fg.max_cells} cells")
    # Reuse the PDG indexing machinery for the scope flattening.
    carrier = Pdg(fg.variables, (), max_cells=fg.max_cells)
    logw = np.zeros(fg.n_states)
    for f in fg.factors:
        idx = carrier.flatten_assignment(f.scope)
        with np.errstate(divide="ignore"):
            logphi = np.log(f.phi)
        if f.theta == 0:
            continue  # phi^0 = 1, including on zero cells
        vals = f.theta * logphi[idx]
        logw = logw + vals
    return logw


def partition_function(fg: WeightedFactorGraph) -> tuple[float, float]:
    """Exact (Z, log Z) by summation in max-shifted log domain."""
    logw = _log_weights(fg)
    finite = logw[logw > -math.inf]
    if finite.size == 0:
        return 0.0, -math.inf
    hi = float(finite.max())
    if math.isinf(hi):  # negative theta on a zero cell
        return math.inf, math.inf
    logz = hi + math.log(float(np.sum(np.exp(logw - hi))))
    return math.exp(logz), logz


def gibbs_distribution(fg: WeightedFactorGraph) -> JointTable:
    """The normalized product of powered factors."""
    logw = _log_weights(fg)
    hi = float(logw.max())
    if math.isinf(hi):
        raise ZeroFactor("the product of powered factors is not "
                         "normalizable")
    w = np.exp(logw - hi)
    return JointTable([v.name for v in fg.variables],
                      (w / w.sum()).reshape(fg.shape))


def fg_to_pdg(fg: WeightedFactorGraph) -> Pdg:
    """One sourceless edge per factor: cpd proportional to the factor
    over its scope, alpha = beta = theta."""
    sizes = {v.name: v.size for v in fg.variables}
    edges = []
    for f in fg.factors:
        total = f.phi.sum()
        if total <= 0:
            raise ZeroFactor(f"factor {f.name!r} cannot be normalized")
        if f.theta < 0:
            raise InvalidCpd(
                f"factor {f.name!r} has negative weight {f.theta}; "
                f"confidences must be nonnegative")
        cpd = Cpd((), f.scope, (f.phi / total)[None, :],
                  target_shape=tuple(sizes[v] for v in f.scope))
        edges.append(Edge(f.name, cpd, beta=f.theta, alpha=f.theta))
    return build_pdg(fg.variables, edges, max_cells=fg.max_cells)


@dataclass
class FreeEnergyReport:
    solver_value: float       # <PDG(fg)>_1 with normalized cpds
    normalizer_sum: float     # sum_J theta_J log sum_x phi_J(x)
    pdg_side: float           # solver_value - normalizer_sum
    neg_log_z: float
    difference: float
    argmin_tv: float
    solve: solver.SolveResult


def free_energy_identity(fg: WeightedFactorGraph, *, seed: int = 0,
                         restarts: int | None = None,
                         tol: float = 1e-12,
                         max_iter: int = 4000) -> FreeEnergyReport:
    """Check the free-energy identity at gamma = 1.

    The PDG carries proper (row-stochastic) cpds, so each factor's
    normalizer leaves the graph and re-enters as the explicit constant
    ``sum_J theta_J log sum_x phi_J``:

        <PDG(fg)>_1 - sum_J theta_J log sum_x phi_J  =  -log Z.

    For factors that are already distributions the constant is zero and
    the identity reads <PDG(fg)>_1 = -log Z directly.  The solver's
    argmin is compared to the enumerated Gibbs distribution in total
    variation; it is the unique minimizer either way, since the constant
    does not move the argmin.
    """
    _, logz = partition_function(fg)
    norm_sum = sum(f.theta * math.log(float(f.phi.sum()))
                   for f in fg.factors)
    res = solver.min_gamma_score(fg_to_pdg(fg), 1.0, seed=seed,
                                 restarts=restarts, tol=tol,
                                 max_iter=max_iter)
    gibbs = gibbs_distribution(fg)
    tv = 0.5 * float(np.abs(res.argmin.probs - gibbs.probs).sum())
    pdg_side = res.inconsistency - norm_sum
    return FreeEnergyReport(solver_value=res.inconsistency,
                            normalizer_sum=norm_sum,
                            pdg_side=pdg_side,
                            neg_log_z=-logz,
                            difference=abs(pdg_side - (-logz)),
                            argmin_tv=tv, solve=res)


# -- JSON interchange ---------------------------------------------------

def fg_from_json(text: str) -> WeightedFactorGraph:
    """Schema: {"variables": [{"name", "domain"}],
    "factors": [{"name"?, "scope", "values", "theta"}]} with values
    row-major over the scope."""
    doc = json.loads(text)
    variables = tuple(Variable(v["name"], tuple(v["domain"]))
                      for v in doc["variables"])
    factors = []
    for i, f in enumerate(doc["factors"]):
        factors.append(Factor(name=f.get("name", f"J{i}"),
                              scope=tuple(f["scope"]),
                              phi=np.asarray(f["values"], dtype=np.float64),
                              theta=float(f.get("theta", 1.0))))
    return WeightedFactorGraph(variables, tuple(factors))


def fg_to_json(fg: WeightedFactorGraph) -> str:
    doc = {
        "variables": [{"name": v.name, "domain": list(v.domain)}
                      for v in fg.variables],
        "factors": [{"name": f.name, "scope": list(f.scope),
                     "values": [float(x) for x in f.phi],
                     "theta": f.theta} for f in fg.factors],
    }
    return json.dumps(doc, indent=2, sort_keys=True)
