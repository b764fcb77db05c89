"""Command-line behavior: values, JSON determinism, exit codes."""

import json
import math
import os

import pytest

from pdgloss.cli import main

EXAMPLES = os.path.join(os.path.dirname(__file__), os.pardir,
                        "pdg_examples")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def path(name):
    return os.path.join(EXAMPLES, name)


class TestInconsistency:
    def test_surprisal_value(self, capsys):
        code, out, _ = run(capsys, "inconsistency", path("surprisal.pdg"),
                           "--gamma", "0")
        assert code == 0
        assert "1.386294" in out

    def test_consistent_file_scores_zero(self, tmp_path, capsys):
        f = tmp_path / "consistent.pdg"
        f.write_text("var X {a, b}\n"
                     "cpd p : -> X = [0.5, 0.5]\n"
                     "cpd q : -> X = [0.5, 0.5]\n"
                     "edge p\nedge q\n")
        code, out, _ = run(capsys, "inconsistency", str(f))
        assert code == 0
        assert "0.000000" in out

    def test_gamma_from_query_line(self, capsys):
        code, out, _ = run(capsys, "inconsistency", path("surprisal.pdg"))
        assert code == 0 and "<M>_0" in out

    def test_show_argmin(self, capsys):
        code, out, _ = run(capsys, "inconsistency",
                           path("marginal_nll.pdg"), "--show-argmin")
        assert code == 0
        assert "argmin Z" in out

    def test_parse_error_exit_1(self, tmp_path, capsys):
        f = tmp_path / "bad.pdg"
        f.write_text("var X {a,\n")
        code, _, err = run(capsys, "inconsistency", str(f))
        assert code == 1
        assert "line 1" in err

    def test_unsupported_hard_structure_exit_3(self, tmp_path, capsys):
        f = tmp_path / "clash.pdg"
        f.write_text("var X {a, b}\n"
                     "cpd p : -> X = [0.5, 0.5]\n"
                     "cpd q : -> X = [0.25, 0.75]\n"
                     "edge p beta=inf\nedge q beta=inf\n")
        code, _, err = run(capsys, "inconsistency", str(f))
        assert code == 3
        assert "target" in err

    def test_json_deterministic_for_seed(self, capsys):
        argv = ["inconsistency", path("two_belief.pdg"), "--json",
                "--seed", "5"]
        _, out1, _ = run(capsys, *argv)
        _, out2, _ = run(capsys, *argv)
        a, b = json.loads(out1), json.loads(out2)
        a.pop("wall_time_s"), b.pop("wall_time_s")
        assert json.dumps(a, sort_keys=True) \
            == json.dumps(b, sort_keys=True)

    def test_json_schema_fields(self, capsys):
        _, out, _ = run(capsys, "inconsistency", path("surprisal.pdg"),
                        "--json")
        doc = json.loads(out)
        assert doc["schema"] == "pdgloss.report/1"
        assert doc["units"] == "nats"
        assert set(doc) >= {"command", "inputs_digest", "results",
                            "solver", "wall_time_s"}
        assert doc["results"]["inconsistency_nats"] == pytest.approx(
            1.3862943611198906, abs=1e-9)


class TestDivergence:
    def test_closed_form(self, capsys):
        code, out, _ = run(capsys, "divergence", "--p", "0.5,0.5",
                           "--q", "0.25,0.75", "--r", "1", "--s", "1")
        assert code == 0
        assert "0.069336" in out

    def test_verify_against_solver(self, capsys):
        code, out, _ = run(capsys, "divergence", "--p", "0.5,0.5",
                           "--q", "0.25,0.75", "--verify")
        assert code == 0
        assert "solver check" in out

    def test_alpha_form_matches(self, capsys):
        _, out, _ = run(capsys, "divergence", "--p", "0.5,0.5",
                        "--q", "0.25,0.75", "--alpha", "0.5", "--json")
        doc = json.loads(out)
        assert doc["results"]["renyi_nats"] == pytest.approx(
            0.06933646419507408, abs=1e-12)

    def test_chernoff(self, capsys):
        _, out, _ = run(capsys, "divergence", "--p", "0.5,0.5",
                        "--q", "0.25,0.75", "--chernoff", "--json")
        doc = json.loads(out)
        assert doc["results"]["chernoff_nats"] == pytest.approx(
            0.0346881852, abs=1e-8)
        assert 0.5 < doc["results"]["beta_star"] < 0.52

    def test_not_a_simplex(self, capsys):
        code, _, err = run(capsys, "divergence", "--p", "0.5,0.8",
                           "--q", "0.25,0.75")
        assert code == 1
        assert "sum to 1" in err


class TestLoss:
    def test_elbo_file(self, capsys):
        code, out, _ = run(capsys, "loss", "elbo", path("elbo.pdg"),
                           "--json")
        doc = json.loads(out)
        assert code == 0
        assert doc["results"]["discrepancy"] < 1e-6

    def test_vae_beta_zero_is_reconstruction(self, capsys):
        _, out, _ = run(capsys, "loss", "vae-elbo", path("vae_elbo.pdg"),
                        "--beta", "0", "--json")
        doc = json.loads(out)
        assert doc["results"]["direct_nats"] == pytest.approx(
            0.5173923272177277, abs=1e-9)

    def test_accuracy_identical_predictors(self, tmp_path, capsys):
        f = tmp_path / "acc.pdg"
        f.write_text("var X {a, b}\nvar Y {y0, y1}\n"
                     "cpd f : X -> Y = [[1, 0], [0, 1]]\n"
                     "cpd h : X -> Y = [[1, 0], [0, 1]]\n"
                     "cpd D : -> X = [0.5, 0.5]\n")
        _, out, _ = run(capsys, "loss", "accuracy", str(f), "--json")
        doc = json.loads(out)
        assert doc["results"]["direct_nats"] == 0.0
        assert doc["results"]["inconsistency_nats"] == pytest.approx(
            0.0, abs=1e-9)

    def test_unknown_loss(self, capsys):
        code, _, err = run(capsys, "loss", "nonsense",
                           path("surprisal.pdg"))
        assert code == 1
        assert "unknown loss" in err

    def test_supervised_limit_default_zero_one(self, capsys):
        _, out, _ = run(capsys, "loss", "supervised-limit",
                        path("supervised_limit.pdg"), "--json")
        doc = json.loads(out)
        assert doc["results"]["inconsistency_nats"] == pytest.approx(
            0.5, abs=1e-9)

    def test_scenario(self, capsys):
        code, out, _ = run(capsys, "loss", "scenario",
                           path("scenario.pdg"), "--json")
        doc = json.loads(out)
        assert code == 0
        assert doc["results"]["l1_discrepancy"] < 1e-6
        assert doc["results"]["l2_discrepancy"] < 1e-2

    def test_mse_flags(self, capsys):
        _, out, _ = run(capsys, "loss", "mse", path("mse.pdg"),
                        "--f", "0,1", "--h", "2,4", "--json")
        doc = json.loads(out)
        assert doc["results"]["direct_nats"] == pytest.approx(
            0.25 * (0.5 * 4 + 0.5 * 9), abs=1e-12)


class TestFg:
    def test_partition(self, capsys):
        _, out, _ = run(capsys, "fg", path("factor_chain.pdg"), "--json")
        doc = json.loads(out)
        assert doc["results"]["z"] == pytest.approx(16.89949493661167,
                                                    rel=1e-9)

    def test_json_input(self, capsys):
        _, out, _ = run(capsys, "fg", path("factor_chain.json"), "--json")
        doc = json.loads(out)
        assert doc["results"]["log_z"] == pytest.approx(
            math.log(16.89949493661167), rel=1e-9)

    def test_free_energy_residual(self, capsys):
        _, out, _ = run(capsys, "fg", path("factor_chain.pdg"),
                        "--check-free-energy", "--json")
        doc = json.loads(out)
        assert doc["results"]["identity_residual"] < 1e-5
        assert doc["results"]["argmin_tv"] < 1e-4


class TestCheckAll:
    def test_corpus_is_green(self, capsys):
        code, out, _ = run(capsys, "check-all", EXAMPLES)
        assert code == 0
        assert "0 failures" in out
