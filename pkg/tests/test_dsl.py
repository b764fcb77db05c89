"""Parser, serializer, document semantics, and the committed corpus."""

import math
import os

import numpy as np
import pytest

from pdgloss import dsl, losses
from pdgloss.core import Cpd, Variable
from pdgloss.errors import (
    DuplicateName,
    PdgError,
    SpecSemanticError,
    SpecSyntaxError,
)

EXAMPLES = os.path.join(os.path.dirname(__file__), os.pardir,
                        "pdg_examples")

SURPRISAL_TEXT = """\
var X {x0, x1}
cpd p : -> X = [0.25, 0.75]
edge p beta=1
event X = x0 beta=inf
"""


def edge_signature(pdg):
    """Structure of the edge set, ignoring labels and order."""
    sig = []
    for e in pdg.edges:
        sig.append((e.cpd.sources, e.cpd.targets, e.beta, e.alpha,
                    np.round(e.cpd.table, 9).tobytes()))
    return sorted(sig)


def assert_equivalent(a, b):
    assert {v.name: v.domain for v in a.variables} \
        == {v.name: v.domain for v in b.variables}
    assert edge_signature(a) == edge_signature(b)


class TestParse:
    def test_surprisal_document(self):
        doc = dsl.parse(SURPRISAL_TEXT)
        assert len(doc.of_kind("var")) == 1
        assert len(doc.of_kind("cpd")) == 1
        assert len(doc.of_kind("edge")) == 1
        assert len(doc.of_kind("event")) == 1
        pdg = dsl.to_pdg(doc)
        assert len(pdg.edges) == 2

    def test_wrong_row_arity_names_cpd(self):
        text = "var X {x0, x1}\ncpd p : -> X = [0.2, 0.3, 0.5]\n"
        with pytest.raises(SpecSemanticError) as err:
            dsl.validate_document(dsl.parse(text))
        msg = str(err.value)
        assert "p" in msg and "2" in msg

    def test_two_belief_confidences_roundtrip(self):
        text = ("var X {x0, x1}\n"
                "cpd p : -> X = [0.5, 0.5]\n"
                "cpd q : -> X = [0.25, 0.75]\n"
                "edge p beta=2\n"
                "edge q beta=0.5\n")
        pdg = dsl.to_pdg(dsl.parse(text))
        betas = sorted(e.beta for e in pdg.edges)
        assert betas == [0.5, 2.0]
        again = dsl.to_pdg(dsl.parse(dsl.serialize(dsl.parse(text))))
        assert_equivalent(pdg, again)

    def test_comment_and_blank_lines(self):
        doc = dsl.parse("# nothing\n\nvar X {a}\n  # trailing\n")
        assert len(doc.declarations) == 1

    def test_located_syntax_error(self):
        with pytest.raises(SpecSyntaxError) as err:
            dsl.parse("var X {x0, x1}\ncpd p : -> X = [0.25 0.75]\n")
        assert err.value.line == 2
        assert err.value.column > 0

    def test_duplicate_declaration(self):
        with pytest.raises(DuplicateName):
            dsl.parse("var X {a}\nvar X {b}\n")

    def test_infinite_beta_keyword(self):
        doc = dsl.parse("var X {a, b}\ncpd p : -> X = [0.5, 0.5]\n"
                        "edge p beta=inf\n")
        pdg = dsl.to_pdg(doc)
        assert math.isinf(pdg.edges[0].beta)

    def test_undeclared_variable_in_cpd(self):
        with pytest.raises(SpecSemanticError):
            dsl.validate_document(
                dsl.parse("var X {a}\ncpd p : -> Z = [1]\n"))

    def test_event_value_must_be_in_domain(self):
        with pytest.raises(SpecSemanticError):
            dsl.to_pdg(dsl.parse("var X {a, b}\nevent X = c\n"))


class TestSerialize:
    def corpus_files(self):
        return sorted(f for f in os.listdir(EXAMPLES)
                      if f.endswith(".pdg"))

    def test_fixed_point_on_corpus(self):
        assert self.corpus_files(), "corpus missing"
        for name in self.corpus_files():
            with open(os.path.join(EXAMPLES, name)) as fh:
                text = fh.read()
            once = dsl.serialize(dsl.parse(text))
            twice = dsl.serialize(dsl.parse(once))
            assert once == twice, name

    def test_corpus_validates(self):
        for name in self.corpus_files():
            with open(os.path.join(EXAMPLES, name)) as fh:
                dsl.validate_document(dsl.parse(fh.read()))

    def test_inf_round_trips(self):
        text = ("var X {a, b}\ncpd p : -> X = [0.5, 0.5]\n"
                "edge p beta=inf alpha=0\n")
        out = dsl.serialize(dsl.parse(text))
        assert "beta=inf" in out
        assert math.isinf(dsl.to_pdg(dsl.parse(out)).edges[0].beta)

    def test_third_probabilities_round_trip(self):
        third = 1.0 / 3.0
        text = f"var X {{a, b, c}}\ncpd p : -> X = [{third!r}, {third!r}, {third!r}]\n"
        doc = dsl.parse(text)
        out = dsl.serialize(doc)
        back = dsl.parse(out).of_kind("cpd")[0]
        np.testing.assert_allclose(back.rows[0], [third] * 3, atol=1e-12)


class TestCorpusEquivalence:
    """Committed example files parse to the same PDG the loss
    constructors build."""

    X = Variable("X", ("x0", "x1"))
    Y = Variable("Y", ("y0", "y1"))
    Z = Variable("Z", ("z0", "z1"))

    def from_file(self, name):
        with open(os.path.join(EXAMPLES, name)) as fh:
            return dsl.to_pdg(dsl.parse(fh.read()))

    def test_surprisal(self):
        rep = losses.surprisal_pdg(self.X, Cpd((), ("X",), [[0.25, 0.75]]),
                                   "x0")
        assert_equivalent(rep.pdg, self.from_file("surprisal.pdg"))

    def test_cross_entropy(self):
        xv = Variable("X", ("a", "b"))
        ds = losses.Dataset([xv], [("a",), ("a",), ("b",)])
        rep = losses.cross_entropy_pdg(xv, Cpd((), ("X",), [[0.5, 0.5]]),
                                       ds)
        assert_equivalent(rep.pdg, self.from_file("cross_entropy.pdg"))

    def test_marginal_nll(self):
        p = Cpd((), ("X", "Z"), [[0.4, 0.15, 0.25, 0.2]],
                target_shape=(2, 2))
        rep = losses.marginal_nll_pdg(self.X, self.Z, p, "x0")
        assert_equivalent(rep.pdg, self.from_file("marginal_nll.pdg"))

    def test_supervised_ce(self):
        ds = losses.Dataset([self.X, self.Y],
                            [("x0", "y0"), ("x0", "y1"),
                             ("x1", "y1"), ("x1", "y1")])
        h = Cpd(("X",), ("Y",), [[0.9, 0.1], [0.2, 0.8]])
        rep = losses.supervised_ce_pdg(self.X, self.Y, h, ds)
        assert_equivalent(rep.pdg, self.from_file("supervised_ce.pdg"))

    def test_accuracy(self):
        X4 = Variable("X", ("a", "b", "c", "d"))
        f = Cpd.from_function("X", "Y", 4, 2, lambda i: 0)
        h = Cpd.from_function("X", "Y", 4, 2, lambda i: 0 if i < 3 else 1)
        d = Cpd((), ("X",), [[0.25] * 4])
        rep = losses.accuracy_pdg(X4, self.Y, f, h, d)
        assert_equivalent(rep.pdg, self.from_file("accuracy.pdg"))

    def test_regularized(self):
        theta = Variable("Theta", ("t0", "t1"))
        p = Cpd(("Theta",), ("Y",), [[0.7, 0.3], [0.4, 0.6]])
        q = Cpd((), ("Theta",), [[0.6, 0.4]])
        ds = losses.Dataset([self.Y], [("y0",), ("y0",), ("y1",)])
        rep = losses.regularized_pdg(theta, self.Y, p, q, "t0", ds)
        assert_equivalent(rep.pdg, self.from_file("regularized.pdg"))

    def test_elbo(self):
        p = Cpd((), ("X", "Z"), [[0.4, 0.15, 0.25, 0.2]],
                target_shape=(2, 2))
        q = Cpd((), ("Z",), [[0.6, 0.4]])
        rep = losses.elbo_pdg(self.X, self.Z, p, q, "x0")
        assert_equivalent(rep.pdg, self.from_file("elbo.pdg"))

    def test_vae_elbo(self):
        prior = Cpd((), ("Z",), [[0.5, 0.5]])
        e = Cpd(("X",), ("Z",), [[0.7, 0.3], [0.4, 0.6]])
        d = Cpd(("Z",), ("X",), [[0.8, 0.2], [0.3, 0.7]])
        rep = losses.vae_elbo_pdg(self.X, self.Z, prior, e, d, "x0")
        assert_equivalent(rep.pdg, self.from_file("vae_elbo.pdg"))

    def test_expected_cost(self):
        rep = losses.expected_cost_pdg(self.X,
                                       Cpd((), ("X",), [[0.5, 0.5]]),
                                       [0.0, 2.0])
        assert_equivalent(rep.pdg, self.from_file("expected_cost.pdg"))

    def test_scenario(self):
        s = Cpd((), ("X", "Y"), [[0.3, 0.2, 0.1, 0.4]],
                target_shape=(2, 2))
        d = Cpd((), ("X", "Y"), [[0.25, 0.25, 0.3, 0.2]],
                target_shape=(2, 2))
        h = Cpd(("X",), ("Y",), [[0.6, 0.4], [0.3, 0.7]])
        rep = losses.scenario_losses(self.X, self.Y, s, d, h, 0.5, 0.5)
        assert_equivalent(rep.pdg_l3, self.from_file("scenario.pdg"))

    def test_supervised_limit(self):
        Xs = Variable("X", ("a",))
        ds = losses.Dataset([Xs, self.Y], [("a", "y0"), ("a", "y1")])
        h = Cpd(("X",), ("Y",), [[0.5, 0.5]])
        rep = losses.supervised_limit_pdg(
            Xs, self.Y, ds, h, np.ones((2, 2)) - np.eye(2))
        assert_equivalent(rep.pdg, self.from_file("supervised_limit.pdg"))

    def test_mse_dataset_file(self):
        # the squared-error construction has no finite PDG; its file
        # carries the dataset the CLI needs
        with open(os.path.join(EXAMPLES, "mse.pdg")) as fh:
            doc = dsl.parse(fh.read())
        ds = dsl.to_dataset(doc, "D")
        assert len(ds) == 2


class TestFuzz:
    TOKENS = ["var", "cpd", "edge", "event", "data", "factor", "query",
              "{", "}", "(", ")", "[", "]", ",", ":", "=", "->", "inf",
              "0.5", "X", "p", "beta", "#", "1e3", "-", "@"]

    def test_token_mutations_never_crash(self):
        rng = np.random.default_rng(99)
        base = SURPRISAL_TEXT + (
            "data D over X {x0, x1}\nfactor J over X = [1, 3] theta=1\n")
        for _ in range(500):
            chars = list(base)
            for _ in range(int(rng.integers(1, 6))):
                mode = rng.integers(0, 3)
                pos = int(rng.integers(0, len(chars)))
                if mode == 0 and chars:
                    chars[pos] = str(rng.choice(self.TOKENS))
                elif mode == 1:
                    chars.insert(pos, str(rng.choice(self.TOKENS)))
                elif chars:
                    del chars[pos]
            text = "".join(chars)
            try:
                doc = dsl.parse(text)
                dsl.validate_document(doc)
            except (SpecSyntaxError, SpecSemanticError, DuplicateName):
                pass  # a located error is the contract
