"""Domain model: variables, cpds, edges, PDGs, and joint tables.

A PDG is a set of finite discrete variables plus labeled edges, each edge
carrying a conditional probability table (cpd) from a source variable set
to a target variable set, a confidence ``beta`` (``math.inf`` means a hard
constraint), and a structural weight ``alpha``.

Conventions used throughout the package:

* every score is in nats (natural log);
* ``0 * log(0/q) = 0`` and ``p * log(p/0) = +inf`` for ``p > 0``;
* multi-variable sources/targets are flattened row-major in declared
  variable order, so a cpd table is always a 2-D row-stochastic matrix.

All types are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DuplicateLabel,
    InvalidCpd,
    ShapeMismatch,
    StateSpaceTooLarge,
    UnknownVariable,
)

ROW_SUM_TOL = 1e-9       # constructor rejects rows further than this from 1
JOINT_SUM_TOL = 1e-10    # joint tables must sum to 1 within this
DEGENERATE_TOL = 1e-12   # point-mass detection
DEFAULT_MAX_CELLS = 10**7

INF = math.inf


def validate_confidence(beta: float) -> float:
    """Confidences are nonnegative reals or ``math.inf``."""
    beta = float(beta)
    if math.isnan(beta) or beta < 0:
        raise InvalidCpd(f"confidence must be >= 0 or inf, got {beta}")
    return beta


@dataclass(frozen=True)
class Variable:
    """A named finite variable with an ordered domain of value labels."""

    name: str
    domain: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(self.domain))
        if len(self.domain) < 1:
            raise InvalidCpd(f"variable {self.name!r} has an empty domain")
        if len(set(self.domain)) != len(self.domain):
            raise InvalidCpd(f"variable {self.name!r} repeats a value label")

    @property
    def size(self) -> int:
        return len(self.domain)


class Cpd:
    """A conditional probability table from a source variable set (possibly
    empty) to a nonempty target variable set.

    ``table`` has one row per source assignment and one column per target
    assignment, both enumerated row-major over the per-variable shapes.
    Rows are renormalized exactly at construction; rows whose sum deviates
    from 1 by more than ``ROW_SUM_TOL`` are rejected.

    ``row_defined`` marks rows that carry probabilistic content; rows
    flagged undefined (from conditioning on zero-mass assignments) must be
    skipped by scoring.
    """

    __slots__ = ("sources", "targets", "table", "source_shape",
                 "target_shape", "row_defined")

    def __init__(self, sources, targets, table, source_shape=None,
                 target_shape=None, row_defined=None):
        sources = tuple(sources)
        targets = tuple(targets)
        if not targets:
            raise InvalidCpd("a cpd needs at least one target variable")
        table = np.asarray(table, dtype=np.float64)
        if table.ndim != 2:
            raise InvalidCpd("cpd table must be 2-D (rows = source states)")
        if source_shape is None:
            source_shape = () if not sources else (table.shape[0],)
        if target_shape is None:
            target_shape = (table.shape[1],)
        source_shape = tuple(int(s) for s in source_shape)
        target_shape = tuple(int(s) for s in target_shape)
        if len(source_shape) != len(sources):
            raise ShapeMismatch("source_shape length != number of sources")
        if len(target_shape) != len(targets):
            raise ShapeMismatch("target_shape length != number of targets")
        if int(np.prod(source_shape, dtype=np.int64)) != table.shape[0]:
            raise ShapeMismatch("source_shape does not match table rows")
        if int(np.prod(target_shape, dtype=np.int64)) != table.shape[1]:
            raise ShapeMismatch("target_shape does not match table columns")
        if np.any(table < 0) or not np.all(np.isfinite(table)):
            raise InvalidCpd("cpd entries must be finite and >= 0")
        if row_defined is None:
            row_defined = np.ones(table.shape[0], dtype=bool)
        else:
            row_defined = np.asarray(row_defined, dtype=bool)
        sums = table.sum(axis=1)
        bad = row_defined & (np.abs(sums - 1.0) > ROW_SUM_TOL)
        if np.any(bad):
            r = int(np.flatnonzero(bad)[0])
            raise InvalidCpd(f"cpd row {r} sums to {sums[r]:.12g}, not 1")
        table = table.copy()
        pos = row_defined & (sums > 0)
        table[pos] /= sums[pos, None]
        table.setflags(write=False)
        row_defined.setflags(write=False)
        self.sources = sources
        self.targets = targets
        self.table = table
        self.source_shape = source_shape
        self.target_shape = target_shape
        self.row_defined = row_defined

    @property
    def n_source_states(self) -> int:
        return self.table.shape[0]

    @property
    def n_target_states(self) -> int:
        return self.table.shape[1]

    def is_degenerate(self, tol: float = DEGENERATE_TOL) -> bool:
        """True when every defined row is a point mass (an event or a
        deterministic function)."""
        rows = self.table[self.row_defined]
        return bool(np.all(rows.max(axis=1) >= 1.0 - tol))

    @staticmethod
    def point_mass(target: str, size: int, index: int) -> "Cpd":
        """The degenerate unconditional distribution for an event X = x."""
        row = np.zeros((1, size))
        row[0, index] = 1.0
        return Cpd((), (target,), row)

    @staticmethod
    def from_function(source: str, target: str, n_source: int,
                      n_target: int, mapping) -> "Cpd":
        """Deterministic cpd for a function of the source value index."""
        table = np.zeros((n_source, n_target))
        for i in range(n_source):
            table[i, mapping(i)] = 1.0
        return Cpd((source,), (target,), table)

    def __repr__(self):
        src = ",".join(self.sources) or "()"
        return f"Cpd({src} -> {','.join(self.targets)})"


@dataclass(frozen=True)
class Edge:
    """A labeled edge: a cpd with confidence ``beta`` and structural weight
    ``alpha``."""

    label: str
    cpd: Cpd
    beta: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "beta", validate_confidence(self.beta))
        alpha = float(self.alpha)
        if math.isnan(alpha) or alpha < 0 or math.isinf(alpha):
            raise InvalidCpd(f"alpha must be a finite nonnegative real, "
                             f"got {alpha}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def is_hard(self) -> bool:
        return math.isinf(self.beta)


class JointTable:
    """A dense probability table over an ordered list of variables."""

    __slots__ = ("variables", "probs")

    def __init__(self, variables, probs, normalize: bool = False):
        variables = tuple(variables)
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != len(variables):
            raise ShapeMismatch("probs must have one axis per variable")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise InvalidCpd("joint probabilities must be finite and >= 0")
        total = probs.sum()
        if normalize:
            if total <= 0:
                raise InvalidCpd("cannot normalize an all-zero table")
            probs = probs / total
        elif abs(total - 1.0) > JOINT_SUM_TOL:
            raise InvalidCpd(f"joint table sums to {total:.12g}, not 1")
        probs = probs.copy()
        probs.setflags(write=False)
        self.variables = variables
        self.probs = probs

    @property
    def shape(self) -> tuple[int, ...]:
        return self.probs.shape

    def reorder(self, variables) -> "JointTable":
        """The same distribution with axes permuted to the given order."""
        variables = tuple(variables)
        if set(variables) != set(self.variables):
            raise UnknownVariable("reorder must use exactly the same "
                                  "variables")
        perm = [self.variables.index(v) for v in variables]
        return JointTable(variables, np.transpose(self.probs, perm))

    def __repr__(self):
        return f"JointTable({','.join(self.variables)})"


def marginal(joint: JointTable, subset) -> JointTable:
    """Sum out every variable not in ``subset``; axis order follows
    ``subset``."""
    subset = tuple(subset)
    for v in subset:
        if v not in joint.variables:
            raise UnknownVariable(f"variable {v!r} not in joint table")
    if len(set(subset)) != len(subset):
        raise UnknownVariable("marginal subset repeats a variable")
    drop = tuple(i for i, v in enumerate(joint.variables) if v not in subset)
    probs = joint.probs.sum(axis=drop) if drop else joint.probs
    kept = tuple(v for v in joint.variables if v in subset)
    perm = [kept.index(v) for v in subset]
    return JointTable(subset, np.transpose(probs, perm), normalize=False)


def conditional(joint: JointTable, targets, sources) -> Cpd:
    """The conditional marginal of ``targets`` given ``sources``.

    Rows for zero-probability source assignments are filled uniform and
    flagged undefined; they carry zero weight under any expectation over
    the joint, so scoring skips them.
    """
    targets = tuple(targets)
    sources = tuple(sources)
    if set(targets) & set(sources):
        raise UnknownVariable("targets and sources must be disjoint")
    sub = marginal(joint, sources + targets)
    n_src = int(np.prod(sub.shape[:len(sources)], dtype=np.int64))
    n_tgt = int(np.prod(sub.shape[len(sources):], dtype=np.int64))
    m = sub.probs.reshape(n_src, n_tgt)
    row_sums = m.sum(axis=1)
    defined = row_sums > 0
    table = np.full_like(m, 1.0 / n_tgt)
    table[defined] = m[defined] / row_sums[defined, None]
    return Cpd(sources, targets, table,
               source_shape=sub.shape[:len(sources)],
               target_shape=sub.shape[len(sources):],
               row_defined=defined)


def pushforward(cpd: Cpd, dist: JointTable) -> JointTable:
    """Push a distribution over the cpd's sources through the cpd:
    result(y) = sum_x dist(x) * cpd(y | x)."""
    if dist.variables != cpd.sources:
        raise ShapeMismatch(
            f"distribution is over {dist.variables}, cpd expects "
            f"{cpd.sources}")
    if dist.probs.shape != cpd.source_shape:
        raise ShapeMismatch("distribution shape does not match cpd sources")
    if not np.all(cpd.row_defined):
        raise InvalidCpd("cannot push forward through undefined rows")
    flat = dist.probs.reshape(-1)
    out = flat @ cpd.table
    return JointTable(cpd.targets, out.reshape(cpd.target_shape))


@dataclass(frozen=True)
class _EdgeIndex:
    """Precomputed flat-state index maps for one edge.

    ``pair_index[w]`` locates state ``w``'s (source, target) cell in the
    edge's flattened (n_src * n_tgt) marginal; ``src_index[w]`` its source
    row.
    """

    n_src: int
    n_tgt: int
    src_index: np.ndarray
    pair_index: np.ndarray
    p_flat: np.ndarray  # cpd table flattened to n_src * n_tgt


class Pdg:
    """A validated probabilistic dependency graph.

    Use :func:`build_pdg` to construct one. The edge list is
    order-insensitive for scoring (accumulation is canonicalized by label),
    but preserved as given for display.

    Index maps and shape metadata are cached on first use; the
    computation is idempotent and the underlying tables are frozen, so
    instances are safe to share across concurrent readers.
    """

    __slots__ = ("variables", "edges", "max_cells", "__dict__")

    def __init__(self, variables, edges, max_cells: int = DEFAULT_MAX_CELLS):
        self.variables = tuple(variables)
        self.edges = tuple(edges)
        self.max_cells = int(max_cells)

    @cached_property
    def var_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @cached_property
    def var_axis(self) -> dict:
        return {v.name: i for i, v in enumerate(self.variables)}

    @cached_property
    def shape(self) -> tuple[int, ...]:
        return tuple(v.size for v in self.variables)

    @cached_property
    def n_states(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @cached_property
    def sorted_edges(self) -> tuple[Edge, ...]:
        """Canonical accumulation order: sort by label."""
        return tuple(sorted(self.edges, key=lambda e: e.label))

    def variable(self, name: str) -> Variable:
        try:
            return self.variables[self.var_axis[name]]
        except KeyError:
            raise UnknownVariable(f"unknown variable {name!r}") from None

    def state_coords(self, names) -> np.ndarray:
        """Coordinate of each flat joint state along each named axis,
        stacked as a (len(names), n_states) array. Flat states enumerate
        the joint shape in C order."""
        n = self.n_states
        idx = np.arange(n, dtype=np.int64)
        rows = []
        for name in names:
            axis = self.var_axis[name]
            stride = int(np.prod(self.shape[axis + 1:], dtype=np.int64))
            rows.append((idx // stride) % self.shape[axis])
        return np.vstack(rows) if rows else np.zeros((0, n), dtype=np.int64)

    def flatten_assignment(self, names) -> np.ndarray:
        """Row-major compound index over ``names`` for each flat joint
        state."""
        coords = self.state_coords(names)
        sizes = [self.variable(nm).size for nm in names]
        out = np.zeros(self.n_states, dtype=np.int64)
        for c, size in zip(coords, sizes):
            out = out * size + c
        return out

    @cached_property
    def edge_indices(self) -> tuple[_EdgeIndex, ...]:
        """Index maps for :attr:`sorted_edges`, in the same order."""
        out = []
        for edge in self.sorted_edges:
            cpd = edge.cpd
            n_src, n_tgt = cpd.n_source_states, cpd.n_target_states
            src = self.flatten_assignment(cpd.sources)
            tgt = self.flatten_assignment(cpd.targets)
            out.append(_EdgeIndex(
                n_src=n_src, n_tgt=n_tgt, src_index=src,
                pair_index=src * n_tgt + tgt,
                p_flat=cpd.table.reshape(-1)))
        return tuple(out)

    def uniform_joint(self) -> JointTable:
        return JointTable(self.var_names,
                          np.full(self.shape, 1.0 / self.n_states))

    def joint_from_flat(self, flat: np.ndarray) -> JointTable:
        return JointTable(self.var_names, flat.reshape(self.shape))

    @property
    def hard_edges(self) -> tuple[Edge, ...]:
        return tuple(e for e in self.sorted_edges if e.is_hard)

    @property
    def soft_edges(self) -> tuple[Edge, ...]:
        return tuple(e for e in self.sorted_edges if not e.is_hard)

    def __repr__(self):
        return (f"Pdg({len(self.variables)} variables, "
                f"{len(self.edges)} edges)")


def build_pdg(variables, edges, max_cells: int = DEFAULT_MAX_CELLS) -> Pdg:
    """Validate and assemble a PDG.

    Raises ``UnknownVariable`` for edges touching undeclared variables,
    ``InvalidCpd`` for malformed tables or shape mismatches against the
    declared domains, ``DuplicateLabel`` for repeated edge labels or
    variable names, and ``StateSpaceTooLarge`` when the product state
    space exceeds ``max_cells``.
    """
    variables = tuple(variables)
    names = [v.name for v in variables]
    if len(set(names)) != len(names):
        raise DuplicateLabel("variable names must be unique")
    sizes = {v.name: v.size for v in variables}

    total = 1
    for v in variables:
        total *= v.size
        if total > max_cells:
            raise StateSpaceTooLarge(
                f"joint state space exceeds {max_cells} cells")

    edges = tuple(edges)
    labels = [e.label for e in edges]
    if len(set(labels)) != len(labels):
        raise DuplicateLabel("edge labels must be unique")
    for e in edges:
        for name in e.cpd.sources + e.cpd.targets:
            if name not in sizes:
                raise UnknownVariable(
                    f"edge {e.label!r} references undeclared variable "
                    f"{name!r}")
        if set(e.cpd.sources) & set(e.cpd.targets):
            raise InvalidCpd(
                f"edge {e.label!r} has overlapping sources and targets")
        expected_src = tuple(sizes[n] for n in e.cpd.sources)
        expected_tgt = tuple(sizes[n] for n in e.cpd.targets)
        if e.cpd.source_shape != expected_src:
            raise InvalidCpd(
                f"edge {e.label!r}: cpd rows cover {e.cpd.source_shape}, "
                f"declared domains give {expected_src}")
        if e.cpd.target_shape != expected_tgt:
            raise InvalidCpd(
                f"edge {e.label!r}: cpd columns cover {e.cpd.target_shape}, "
                f"declared domains give {expected_tgt}")
        if not np.all(e.cpd.row_defined):
            raise InvalidCpd(
                f"edge {e.label!r}: cpds attached to edges must have all "
                f"rows defined")
    return Pdg(variables, edges, max_cells=max_cells)
