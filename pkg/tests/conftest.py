"""Shared generators for randomized suites."""

import numpy as np
import pytest

from pdgloss.core import Cpd, Edge, Variable, build_pdg


def make_var(name, size):
    return Variable(name, tuple(f"{name.lower()}{i}" for i in range(size)))


def random_simplex(rng, n, floor=0.0):
    p = rng.dirichlet(np.ones(n))
    if floor:
        p = (1 - n * floor) * p + floor
    return p


def random_cpd(rng, sources, targets, sizes, floor=0.0):
    n_src = int(np.prod([sizes[s] for s in sources])) if sources else 1
    n_tgt = int(np.prod([sizes[t] for t in targets]))
    table = np.vstack([random_simplex(rng, n_tgt, floor)
                       for _ in range(n_src)])
    return Cpd(sources, targets, table,
               source_shape=tuple(sizes[s] for s in sources),
               target_shape=tuple(sizes[t] for t in targets))


def random_soft_pdg(rng, n_vars=2, max_size=3, n_edges=3, beta_range=(0.5, 2.5),
                    alpha_range=(0.0, 1.0), floor=0.0):
    """A PDG with finite confidences only: random unconditional and
    conditional edges over a small variable set."""
    variables = [make_var(chr(ord("A") + i), int(rng.integers(2, max_size + 1)))
                 for i in range(n_vars)]
    sizes = {v.name: v.size for v in variables}
    names = [v.name for v in variables]
    edges = []
    for j in range(n_edges):
        tgt = names[int(rng.integers(0, len(names)))]
        others = [n for n in names if n != tgt]
        if others and rng.random() < 0.5:
            src = (others[int(rng.integers(0, len(others)))],)
        else:
            src = ()
        edges.append(Edge(
            f"e{j}", random_cpd(rng, src, (tgt,), sizes, floor),
            beta=float(rng.uniform(*beta_range)),
            alpha=float(rng.uniform(*alpha_range))))
    return build_pdg(variables, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(20240)
