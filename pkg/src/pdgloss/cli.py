"""Command-line interface.

Subcommands:

* ``inconsistency FILE``: parse a .pdg file and minimize the gamma score.
* ``divergence``: closed-form two-belief divergences (confidence pair,
  Renyi order, or the Chernoff point), with an optional solver check.
* ``loss NAME FILE``: build a loss-zoo construction from the file's
  declarations and report direct loss, inconsistency, correction, and
  discrepancy.
* ``fg FILE``: partition function of a factor graph (.pdg with factor
  declarations, or the JSON schema), optionally checking the free-energy
  identity.
* ``check-all DIR``: parse and evaluate every example in a directory.

Values print in nats with a bits column; ``--json`` emits a
``pdgloss.report/1`` object (nats only) that is byte-identical across
runs for a fixed ``--seed``, except for the wall_time_s field.

Exit codes: 1 parse/usage error, 2 solver did not converge, 3
unsupported hard-edge structure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

from . import closedform, dsl, factorgraph, losses, solver
from .core import Cpd, Variable
from .errors import (
    NotASimplex,
    PdgError,
    SpecSemanticError,
    SpecSyntaxError,
    UnknownLoss,
    UnsupportedHardStructure,
)
from .scoring import to_bits

SCHEMA = "pdgloss.report/1"

LOSS_NAMES = ("surprisal", "cross-entropy", "supervised-ce", "accuracy",
              "mse", "regularized", "elbo", "vae-elbo", "beta-elbo",
              "expected-cost", "scenario", "supervised-limit")


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _fmt_val(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return f"{x:.6f}"


def _print_value(name: str, nats: float, bits: bool):
    if bits:
        print(f"{name}: {_fmt_val(to_bits(nats))} bits")
    else:
        print(f"{name}: {_fmt_val(nats)} nats "
              f"({_fmt_val(to_bits(nats))} bits)")


def _digest(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(str(p).encode())
        h.update(b"\0")
    return h.hexdigest()[:16]


def _report(command: str, digest: str, results: dict,
            solver_info: dict | None, started: float) -> dict:
    return {
        "schema": SCHEMA,
        "command": command,
        "inputs_digest": digest,
        "units": "nats",
        "results": results,
        "solver": solver_info or {},
        "wall_time_s": round(time.time() - started, 6),
    }


def _emit(report: dict, as_json: bool):
    if as_json:
        print(json.dumps(report, sort_keys=True))


def _load_doc(path: str) -> dsl.SpecDocument:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise _Exit(1, f"cannot read {path}: {err}") from err
    try:
        doc = dsl.parse(text)
        dsl.validate_document(doc)
        return doc
    except (SpecSyntaxError, SpecSemanticError) as err:
        raise _Exit(1, f"{path}: {err}") from err


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return float(x)
    if isinstance(x, np.ndarray):
        return [float(v) for v in x]
    return x


# ---------------------------------------------------------------------
# inconsistency
# ---------------------------------------------------------------------

def cmd_inconsistency(args) -> int:
    started = time.time()
    doc = _load_doc(args.file)
    try:
        pdg = dsl.to_pdg(doc)
    except SpecSemanticError as err:
        raise _Exit(1, str(err)) from err
    gamma = args.gamma
    if gamma is None:
        q = doc.lookup("query", "inconsistency")
        gamma = dict(q.params).get("gamma", 0.0) if q else 0.0
    try:
        res = solver.min_gamma_score(
            pdg, gamma, tol=args.tol, restarts=args.restarts,
            seed=args.seed, threads=args.threads)
    except UnsupportedHardStructure as err:
        raise _Exit(3, str(err)) from err
    results = {"gamma": gamma, "inconsistency_nats": res.inconsistency}
    sinfo = {"iterations": res.iterations, "converged": res.converged,
             "restarts": res.restarts_used, "seed": args.seed}
    if not args.json:
        _print_value(f"<M>_{gamma:g}", res.inconsistency, args.bits)
        print(f"solver: iterations={res.iterations} "
              f"restarts={res.restarts_used} converged={res.converged}")
    if args.show_argmin:
        marg = {}
        for v in pdg.variables:
            axis = [i for i, w in enumerate(pdg.variables) if w != v]
            m = res.argmin.probs.sum(axis=tuple(axis)) if axis \
                else res.argmin.probs
            marg[v.name] = [float(x) for x in np.atleast_1d(m)]
            if not args.json:
                print(f"argmin {v.name}: "
                      + ", ".join(f"{x:.6f}" for x in marg[v.name]))
        results["argmin_marginals"] = marg
    digest = _digest(open(args.file, "rb").read(), gamma, args.seed,
                     args.restarts, args.tol)
    _emit(_report("inconsistency", digest, results, sinfo, started),
          args.json)
    if not res.converged:
        return 2
    return 0


# ---------------------------------------------------------------------
# divergence
# ---------------------------------------------------------------------

def _parse_simplex(text: str, flag: str) -> np.ndarray:
    try:
        v = np.asarray([float(x) for x in text.split(",")])
    except ValueError as err:
        raise _Exit(1, f"{flag}: not a comma-separated vector") from err
    if v.size < 1 or np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
        raise _Exit(1, str(NotASimplex(
            f"{flag} must be nonnegative and sum to 1")))
    return v


def cmd_divergence(args) -> int:
    started = time.time()
    p = _parse_simplex(args.p, "--p")
    q = _parse_simplex(args.q, "--q")
    if p.size != q.size:
        raise _Exit(1, "--p and --q must have the same length")
    results: dict = {}
    sinfo = None
    if args.chernoff:
        value, beta_star = solver.chernoff_divergence(p, q)
        results["chernoff_nats"] = value
        results["beta_star"] = beta_star
        if not args.json:
            _print_value("chernoff", value, args.bits)
            print(f"beta*: {beta_star:.8f}")
    elif args.alpha is not None:
        value = closedform.renyi_divergence(p, q, args.alpha)
        results["renyi_nats"] = value
        results["alpha"] = args.alpha
        if not args.json:
            _print_value(f"D_{args.alpha:g}", value, args.bits)
    else:
        value = closedform.pdg_divergence(p, q, args.r, args.s)
        results["pdg_divergence_nats"] = value
        results["r"], results["s"] = args.r, args.s
        if not args.json:
            _print_value(f"D^pdg_({args.r:g},{args.s:g})", value,
                         args.bits)
        if args.verify:
            x = Variable("X", tuple(f"x{i}" for i in range(p.size)))
            from .core import Edge, build_pdg
            pdg = build_pdg([x], [
                Edge("p", Cpd((), ("X",), p[None, :]), beta=args.r),
                Edge("q", Cpd((), ("X",), q[None, :]), beta=args.s),
            ])
            res = solver.min_gamma_score(pdg, 0.0, seed=args.seed)
            results["solver_nats"] = res.inconsistency
            results["solver_gap"] = abs(res.inconsistency - value) \
                if math.isfinite(value) else 0.0
            sinfo = {"iterations": res.iterations,
                     "converged": res.converged,
                     "restarts": res.restarts_used, "seed": args.seed}
            if not args.json:
                print(f"solver check: {_fmt_val(res.inconsistency)} "
                      f"(gap {results['solver_gap']:.2e})")
    digest = _digest(args.p, args.q, args.r, args.s, args.alpha,
                     args.chernoff, args.seed)
    _emit(_report("divergence", digest, results, sinfo, started),
          args.json)
    return 0


# ---------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------

def _doc_variable(pdgvars, name) -> Variable:
    for v in pdgvars:
        if v.name == name:
            return v
    raise _Exit(1, f"variable {name!r} not declared")


def _need_cpd(doc, variables, name) -> Cpd:
    decl = doc.lookup("cpd", name)
    if decl is None:
        raise _Exit(1, f"this loss needs a cpd named {name!r}")
    return dsl._cpd_of(decl, {v.name: v for v in variables})


def _need_data(doc, name="D") -> losses.Dataset:
    if doc.lookup("data", name) is None:
        raise _Exit(1, f"this loss needs a data declaration named "
                       f"{name!r}")
    return dsl.to_dataset(doc, name)


def _need_event(doc) -> dsl.EventDecl:
    events = doc.of_kind("event")
    if len(events) != 1:
        raise _Exit(1, "this loss needs exactly one event declaration")
    return events[0]


def _values_flag(text, flag, var) -> dict:
    try:
        vals = [float(x) for x in text.split(",")]
    except (ValueError, AttributeError):
        raise _Exit(1, f"{flag} must be a comma-separated vector over "
                       f"{var.name}'s domain") from None
    if len(vals) != var.size:
        raise _Exit(1, f"{flag} needs {var.size} values")
    return dict(zip(var.domain, vals))


def _build_loss_report(args, doc):
    variables = tuple(dsl._variables_of(doc).values())

    def var(name):
        return _doc_variable(variables, name)

    name = args.name
    if name == "surprisal":
        ev = _need_event(doc)
        return losses.surprisal_pdg(var(ev.variable),
                                    _need_cpd(doc, variables, "p"),
                                    ev.value)
    if name == "cross-entropy":
        data = _need_data(doc)
        return losses.cross_entropy_pdg(var(data.var_names[0]),
                                        _need_cpd(doc, variables, "p"),
                                        data)
    if name == "supervised-ce":
        data = _need_data(doc)
        h = _need_cpd(doc, variables, "h")
        return losses.supervised_ce_pdg(var(data.var_names[0]),
                                        var(data.var_names[1]), h, data)
    if name == "accuracy":
        f = _need_cpd(doc, variables, "f")
        h = _need_cpd(doc, variables, "h")
        d = _need_cpd(doc, variables, "D")
        return losses.accuracy_pdg(var(f.sources[0]), var(f.targets[0]),
                                   f, h, d, beta_d=args.beta_d,
                                   beta_f=args.beta_f, beta_h=args.beta_h)
    if name == "mse":
        data = _need_data(doc)
        xv = var(data.var_names[0])
        if args.f is None or getattr(args, "h", None) is None:
            raise _Exit(1, "mse needs --f and --h value vectors")
        return losses.mse_pdg(xv, _values_flag(args.f, "--f", xv),
                              _values_flag(args.h, "--h", xv), data)
    if name == "regularized":
        ev = _need_event(doc)
        p = _need_cpd(doc, variables, "p")
        q = _need_cpd(doc, variables, "q")
        data = _need_data(doc)
        return losses.regularized_pdg(var(ev.variable),
                                      var(data.var_names[0]), p, q,
                                      ev.value, data, beta_q=args.beta_q)
    if name == "elbo":
        ev = _need_event(doc)
        p = _need_cpd(doc, variables, "p")
        q = _need_cpd(doc, variables, "q")
        zname = [t for t in p.targets if t != ev.variable][0]
        return losses.elbo_pdg(var(ev.variable), var(zname), p, q,
                               ev.value)
    if name in ("vae-elbo", "beta-elbo"):
        ev = _need_event(doc)
        prior = _need_cpd(doc, variables, "p")
        e = _need_cpd(doc, variables, "e")
        d = _need_cpd(doc, variables, "d")
        beta = args.beta if name == "beta-elbo" or args.beta != 1.0 \
            else 1.0
        return losses.vae_elbo_pdg(var(ev.variable),
                                   var(prior.targets[0]), prior, e, d,
                                   ev.value, beta=beta)
    if name == "expected-cost":
        p = _need_cpd(doc, variables, "p")
        xv = var(p.targets[0])
        if args.cost is None:
            raise _Exit(1, "expected-cost needs --cost")
        return losses.expected_cost_pdg(
            xv, p, _values_flag(args.cost, "--cost", xv))
    if name == "supervised-limit":
        data = _need_data(doc)
        h = _need_cpd(doc, variables, "h")
        xv, yv = var(data.var_names[0]), var(data.var_names[1])
        if args.loss_table:
            table = {}
            for item in args.loss_table.split(";"):
                pair, _, val = item.partition(":")
                a, _, b = pair.partition(",")
                table[(a.strip(), b.strip())] = float(val)
        else:
            table = np.ones((yv.size, yv.size)) - np.eye(yv.size)
        return losses.supervised_limit_pdg(xv, yv, data, h, table)
    raise _Exit(1, str(UnknownLoss(
        f"unknown loss {name!r}; choose from {', '.join(LOSS_NAMES)}")))


def cmd_loss(args) -> int:
    started = time.time()
    if args.name not in LOSS_NAMES:
        raise _Exit(1, f"unknown loss {args.name!r}; choose from "
                       f"{', '.join(LOSS_NAMES)}")
    doc = _load_doc(args.file)
    if args.name == "scenario":
        return _cmd_scenario(args, doc, started)
    try:
        report = _build_loss_report(args, doc)
    except (PdgError, SpecSemanticError) as err:
        raise _Exit(1, str(err)) from err
    results = {
        "loss": args.name,
        "direct_nats": report.direct_loss,
        "inconsistency_nats": report.pdg_inconsistency,
        "correction_nats": report.correction,
        "discrepancy": report.discrepancy,
    }
    for k, v in report.extras.items():
        results[f"extra_{k}"] = _jsonable(v)
    sinfo = None
    if report.solve is not None:
        sinfo = {"iterations": report.solve.iterations,
                 "converged": report.solve.converged,
                 "restarts": report.solve.restarts_used,
                 "seed": args.seed}
    if not args.json:
        _print_value("direct", report.direct_loss, args.bits)
        _print_value("inconsistency", report.pdg_inconsistency, args.bits)
        _print_value("correction", report.correction, args.bits)
        print(f"discrepancy: {report.discrepancy:.3e}")
    digest = _digest(open(args.file, "rb").read(), args.name, args.seed,
                     args.beta, args.beta_q, args.f, args.h, args.cost)
    _emit(_report("loss", digest, results, sinfo, started), args.json)
    return 0


def _cmd_scenario(args, doc, started) -> int:
    variables = tuple(dsl._variables_of(doc).values())
    s = _need_cpd(doc, variables, "s")
    d = _need_cpd(doc, variables, "d")
    h = _need_cpd(doc, variables, "h")
    xv = _doc_variable(variables, h.sources[0])
    yv = _doc_variable(variables, h.targets[0])
    try:
        rep = losses.scenario_losses(xv, yv, s, d, h, args.lambda_s,
                                     args.lambda_d, gamma=args.gamma)
    except PdgError as err:
        raise _Exit(1, str(err)) from err
    results = {
        "loss": "scenario",
        "l1_direct_nats": rep.l1_direct,
        "l1_inconsistency_nats": rep.l1_inconsistency,
        "l1_correction_nats": rep.l1_correction,
        "l1_discrepancy": rep.l1_discrepancy,
        "l2_direct_nats": rep.l2_direct,
        "l2_gamma_value_nats": rep.l2_gamma_value,
        "l2_discrepancy": rep.l2_discrepancy,
        "l3_value_nats": rep.l3_value,
        "l3_optimal_h": [[float(v) for v in row]
                         for row in rep.l3_optimal_h.table],
    }
    if not args.json:
        print(f"mixture loss:   direct {_fmt_val(rep.l1_direct)}  "
              f"inconsistency {_fmt_val(rep.l1_inconsistency)}  "
              f"(+{_fmt_val(rep.l1_correction)})")
        print(f"product loss:   direct {_fmt_val(rep.l2_direct)}  "
              f"gap {rep.l2_discrepancy:.2e} at gamma={args.gamma:g}")
        print(f"blended loss:   {_fmt_val(rep.l3_value)}")
        print("optimal predictor rows:",
              [[round(float(v), 6) for v in row]
               for row in rep.l3_optimal_h.table])
    digest = _digest(open(args.file, "rb").read(), "scenario",
                     args.lambda_s, args.lambda_d, args.gamma, args.seed)
    _emit(_report("loss", digest, results, None, started), args.json)
    return 0


# ---------------------------------------------------------------------
# factor graphs
# ---------------------------------------------------------------------

def _load_fg(path: str) -> factorgraph.WeightedFactorGraph:
    if path.endswith(".json"):
        try:
            with open(path, encoding="utf-8") as fh:
                return factorgraph.fg_from_json(fh.read())
        except (OSError, KeyError, ValueError, PdgError) as err:
            raise _Exit(1, f"{path}: {err}") from err
    doc = _load_doc(path)
    try:
        fg = dsl.to_factor_graph(doc)
    except SpecSemanticError as err:
        raise _Exit(1, str(err)) from err
    if not fg.factors:
        raise _Exit(1, f"{path}: no factor declarations")
    return fg


def cmd_fg(args) -> int:
    started = time.time()
    fg = _load_fg(args.file)
    try:
        z, logz = factorgraph.partition_function(fg)
    except PdgError as err:
        raise _Exit(1, str(err)) from err
    results = {"z": z, "log_z": logz}
    sinfo = None
    if not args.json:
        print(f"Z: {z:.10g}")
        print(f"log Z: {logz:.10g}")
    if args.check_free_energy:
        rep = factorgraph.free_energy_identity(fg, seed=args.seed)
        results["free_energy_nats"] = rep.neg_log_z
        results["solver_nats"] = rep.solver_value
        results["normalizer_sum_nats"] = rep.normalizer_sum
        results["pdg_side_nats"] = rep.pdg_side
        results["identity_residual"] = rep.difference
        results["argmin_tv"] = rep.argmin_tv
        sinfo = {"iterations": rep.solve.iterations,
                 "converged": rep.solve.converged,
                 "restarts": rep.solve.restarts_used, "seed": args.seed}
        if not args.json:
            print(f"free energy -log Z:  {rep.neg_log_z:.10g}")
            print(f"solver <PDG>_1:      {rep.solver_value:.10g}")
            print(f"factor normalizers:  {rep.normalizer_sum:.10g}")
            print(f"identity residual:   {rep.difference:.3e}")
            print(f"argmin TV distance:  {rep.argmin_tv:.3e}")
    digest = _digest(open(args.file, "rb").read(),
                     args.check_free_energy, args.seed)
    _emit(_report("fg", digest, results, sinfo, started), args.json)
    return 0


# ---------------------------------------------------------------------
# check-all
# ---------------------------------------------------------------------

def cmd_check_all(args) -> int:
    started = time.time()
    try:
        names = sorted(os.listdir(args.dir))
    except OSError as err:
        raise _Exit(1, str(err)) from err
    failures = 0
    checked = 0
    lines = []
    for name in names:
        path = os.path.join(args.dir, name)
        if not (name.endswith(".pdg") or name.endswith(".json")):
            continue
        checked += 1
        try:
            if name.endswith(".json"):
                fg = _load_fg(path)
                _, logz = factorgraph.partition_function(fg)
                lines.append(f"ok   {name}: log Z = {logz:.6f}")
                continue
            doc = _load_doc(path)
            if doc.of_kind("factor"):
                fg = dsl.to_factor_graph(doc)
                rep = factorgraph.free_energy_identity(fg, seed=args.seed)
                lines.append(f"ok   {name}: free energy "
                             f"{rep.neg_log_z:.6f} "
                             f"(residual {rep.difference:.2e})")
                continue
            pdg = dsl.to_pdg(doc)
            q = doc.lookup("query", "inconsistency")
            gamma = dict(q.params).get("gamma", 0.0) if q else 0.0
            res = solver.min_gamma_score(pdg, gamma, seed=args.seed)
            status = "ok  " if res.converged else "WARN"
            lines.append(f"{status} {name}: <M>_{gamma:g} = "
                         f"{_fmt_val(res.inconsistency)}")
        except (_Exit, PdgError) as err:
            failures += 1
            lines.append(f"FAIL {name}: {err}")
    for line in lines:
        print(line)
    print(f"checked {checked} files, {failures} failures "
          f"({time.time() - started:.1f}s)")
    return 1 if failures else 0


# ---------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------

def _add_common(sp, seed=True):
    sp.add_argument("--json", action="store_true",
                    help="emit a pdgloss.report/1 JSON object")
    sp.add_argument("--bits", action="store_true",
                    help="display values in bits")
    if seed:
        sp.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pdgloss",
        description="Inconsistency of probabilistic dependency graphs, "
                    "and the losses it generates.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("inconsistency", help="minimize the gamma score")
    sp.add_argument("file")
    sp.add_argument("--gamma", type=float, default=None)
    sp.add_argument("--tol", type=float, default=solver.DEFAULT_TOL)
    sp.add_argument("--restarts", type=int, default=None)
    sp.add_argument("--threads", type=int,
                    default=max(1, os.cpu_count() or 1))
    sp.add_argument("--show-argmin", action="store_true")
    _add_common(sp)
    sp.set_defaults(func=cmd_inconsistency)

    sp = sub.add_parser("divergence", help="two-belief divergences")
    sp.add_argument("--p", required=True)
    sp.add_argument("--q", required=True)
    sp.add_argument("--r", type=float, default=1.0)
    sp.add_argument("--s", type=float, default=1.0)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--chernoff", action="store_true")
    sp.add_argument("--verify", action="store_true",
                    help="cross-check the closed form with the solver")
    _add_common(sp)
    sp.set_defaults(func=cmd_divergence)

    sp = sub.add_parser("loss", help="loss-zoo constructions")
    sp.add_argument("name", metavar="NAME",
                    help=f"one of: {', '.join(LOSS_NAMES)}")
    sp.add_argument("file")
    sp.add_argument("--beta", type=float, default=1.0,
                    help="prior confidence for (beta-)elbo")
    sp.add_argument("--beta-q", type=float, default=1.0)
    sp.add_argument("--beta-d", type=float, default=1.0)
    sp.add_argument("--beta-f", type=float, default=1.0)
    sp.add_argument("--beta-h", type=float, default=1.0)
    sp.add_argument("--gamma", type=float, default=1e3,
                    help="gamma for the scenario product loss")
    sp.add_argument("--lambda-s", type=float, default=0.5)
    sp.add_argument("--lambda-d", type=float, default=0.5)
    sp.add_argument("--f", help="real values over X (comma-separated)")
    sp.add_argument("--h", help="real values over X (comma-separated)")
    sp.add_argument("--cost", help="costs over X (comma-separated)")
    sp.add_argument("--loss-table",
                    help="y,y':v;... pairs for supervised-limit")
    _add_common(sp)
    sp.set_defaults(func=cmd_loss)

    sp = sub.add_parser("fg", help="factor-graph partition function")
    sp.add_argument("file")
    sp.add_argument("--check-free-energy", action="store_true")
    _add_common(sp)
    sp.set_defaults(func=cmd_fg)

    sp = sub.add_parser("check-all",
                        help="evaluate every example in a directory")
    sp.add_argument("dir")
    _add_common(sp)
    sp.set_defaults(func=cmd_check_all)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Exit as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code
    except UnsupportedHardStructure as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except PdgError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
