"""A line-oriented text format for PDGs, datasets, and factor graphs.

Grammar (one declaration per line, ``#`` comments):

    var X {x0, x1}
    cpd p : -> X = [0.25, 0.75]
    cpd h : X -> Y = [[0.9, 0.1], [0.2, 0.8]]
    cpd m : Z -> (X, Y) = [[...], [...]]
    edge p beta=1 alpha=1
    event X = x0 beta=inf
    data D over (X, Y) { (x0, y0), (x0, y1) }
    factor J over (X) = [1, 3] theta=1
    query inconsistency gamma=0

Rows of a cpd table are indexed row-major by source assignment in the
declared variable order, columns row-major by target assignment.  ``inf``
is a keyword for infinite confidence.  The serializer is canonical (one
fixed ordering and number format), and parse(serialize(parse(text)))
equals parse(serialize(...)) at the AST level.

All errors carry a line, a column, and the offending token.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .core import Cpd, Edge, Pdg, Variable, build_pdg
from .errors import (
    DuplicateName,
    InvalidCpd,
    PdgError,
    SpecSemanticError,
    SpecSyntaxError,
)
from .factorgraph import Factor, WeightedFactorGraph
from .losses import Dataset

_TOKEN_RE = re.compile(r"""
    (?P<arrow>->)
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|[+-]?inf\b)
  | (?P<name>[A-Za-z_][A-Za-z0-9_.'-]*)
  | (?P<punct>[{}()\[\],:=])
  | (?P<space>\s+)
  | (?P<bad>.)
""", re.VERBOSE)

_KINDS = ("var", "cpd", "data", "factor", "edge", "event", "query")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(line: str, lineno: int) -> list[Token]:
    out = []
    for m in _TOKEN_RE.finditer(line):
        kind = m.lastgroup
        if kind == "space":
            continue
        if kind == "bad":
            raise SpecSyntaxError("unexpected character", lineno,
                                  m.start() + 1, m.group())
        out.append(Token(kind, m.group(), lineno, m.start() + 1))
    return out


class _Stream:
    def __init__(self, tokens: list[Token], lineno: int):
        self.tokens = tokens
        self.pos = 0
        self.lineno = lineno

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self, expect: str | None = None, kind: str | None = None) \
            -> Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else None
            col = (last.column + len(last.text)) if last else 1
            raise SpecSyntaxError(
                f"expected {expect or kind or 'more input'} at end of line",
                self.lineno, col)
        if expect is not None and tok.text != expect:
            raise SpecSyntaxError(f"expected {expect!r}", tok.line,
                                  tok.column, tok.text)
        if kind is not None and tok.kind != kind:
            raise SpecSyntaxError(f"expected a {kind}", tok.line,
                                  tok.column, tok.text)
        self.pos += 1
        return tok

    def done(self):
        tok = self.peek()
        if tok is not None:
            raise SpecSyntaxError("trailing input", tok.line, tok.column,
                                  tok.text)


def _number(tok: Token) -> float:
    text = tok.text
    if text.lstrip("+-") == "inf":
        return -math.inf if text.startswith("-") else math.inf
    return float(text)


# -- declarations --------------------------------------------------------

@dataclass(frozen=True)
class VarDecl:
    kind = "var"
    name: str
    domain: tuple[str, ...]
    line: int = 0


@dataclass(frozen=True)
class CpdDecl:
    kind = "cpd"
    name: str
    sources: tuple[str, ...]
    targets: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]
    line: int = 0


@dataclass(frozen=True)
class EdgeDecl:
    kind = "edge"
    name: str   # references a cpd or data declaration; doubles as label
    beta: float = 1.0
    alpha: float = 1.0
    line: int = 0


@dataclass(frozen=True)
class EventDecl:
    kind = "event"
    name: str   # auto label "X=value"
    variable: str
    value: str
    beta: float = math.inf
    line: int = 0


@dataclass(frozen=True)
class DataDecl:
    kind = "data"
    name: str
    variables: tuple[str, ...]
    records: tuple[tuple[str, ...], ...]
    line: int = 0


@dataclass(frozen=True)
class FactorDecl:
    kind = "factor"
    name: str
    scope: tuple[str, ...]
    values: tuple[float, ...]
    theta: float = 1.0
    line: int = 0


@dataclass(frozen=True)
class QueryDecl:
    kind = "query"
    name: str
    params: tuple[tuple[str, float], ...] = ()
    line: int = 0


Declaration = (VarDecl | CpdDecl | EdgeDecl | EventDecl | DataDecl
               | FactorDecl | QueryDecl)


@dataclass
class SpecDocument:
    declarations: list = field(default_factory=list)

    def of_kind(self, kind: str) -> list:
        return [d for d in self.declarations if d.kind == kind]

    def lookup(self, kind: str, name: str):
        for d in self.declarations:
            if d.kind == kind and d.name == name:
                return d
        return None


# -- parsing --------------------------------------------------------------

def _parse_name_tuple(ts: _Stream) -> tuple[str, ...]:
    """Either a bare name or a parenthesized comma list of names."""
    tok = ts.peek()
    if tok is not None and tok.text == "(":
        ts.next("(")
        names = [ts.next(kind="name").text]
        while ts.peek() is not None and ts.peek().text == ",":
            ts.next(",")
            names.append(ts.next(kind="name").text)
        ts.next(")")
        return tuple(names)
    return (ts.next(kind="name").text,)


def _parse_number_list(ts: _Stream) -> tuple[float, ...]:
    ts.next("[")
    vals = [_number(ts.next(kind="number"))]
    while ts.peek() is not None and ts.peek().text == ",":
        ts.next(",")
        vals.append(_number(ts.next(kind="number")))
    ts.next("]")
    return tuple(vals)


def _label(ts: _Stream) -> str:
    """A domain value label: an identifier or a bare number."""
    tok = ts.peek()
    if tok is not None and tok.kind in ("name", "number"):
        ts.pos += 1
        return tok.text
    return ts.next(kind="name").text  # raises with a precise location


def _parse_kwargs(ts: _Stream, allowed: tuple[str, ...]) -> dict:
    out = {}
    while ts.peek() is not None:
        key = ts.next(kind="name")
        if key.text not in allowed:
            raise SpecSyntaxError(
                f"unknown option (expected one of {', '.join(allowed)})",
                key.line, key.column, key.text)
        if key.text in out:
            raise SpecSyntaxError("option repeated", key.line, key.column,
                                  key.text)
        ts.next("=")
        out[key.text] = _number(ts.next(kind="number"))
    return out


def _parse_var(ts: _Stream, lineno: int) -> VarDecl:
    name = ts.next(kind="name").text
    ts.next("{")
    labels = [_label(ts)]
    while ts.peek() is not None and ts.peek().text == ",":
        ts.next(",")
        labels.append(_label(ts))
    ts.next("}")
    ts.done()
    return VarDecl(name=name, domain=tuple(labels), line=lineno)


def _parse_cpd(ts: _Stream, lineno: int) -> CpdDecl:
    name = ts.next(kind="name").text
    ts.next(":")
    tok = ts.peek()
    sources: tuple[str, ...] = ()
    if tok is not None and tok.kind != "arrow":
        sources = _parse_name_tuple(ts)
    ts.next("->")
    targets = _parse_name_tuple(ts)
    ts.next("=")
    ts.next("[")
    first = ts.peek()
    rows: list[tuple[float, ...]] = []
    if first is not None and first.text == "[":
        rows.append(_parse_number_list(ts))
        while ts.peek() is not None and ts.peek().text == ",":
            ts.next(",")
            rows.append(_parse_number_list(ts))
        ts.next("]")
    else:
        vals = [_number(ts.next(kind="number"))]
        while ts.peek() is not None and ts.peek().text == ",":
            ts.next(",")
            vals.append(_number(ts.next(kind="number")))
        ts.next("]")
        rows.append(tuple(vals))
    ts.done()
    return CpdDecl(name=name, sources=sources, targets=targets,
                   rows=tuple(rows), line=lineno)


def _parse_edge(ts: _Stream, lineno: int) -> EdgeDecl:
    name = ts.next(kind="name").text
    kw = _parse_kwargs(ts, ("beta", "alpha"))
    return EdgeDecl(name=name, beta=kw.get("beta", 1.0),
                    alpha=kw.get("alpha", 1.0), line=lineno)


def _parse_event(ts: _Stream, lineno: int) -> EventDecl:
    variable = ts.next(kind="name").text
    ts.next("=")
    value = _label(ts)
    kw = _parse_kwargs(ts, ("beta",))
    return EventDecl(name=f"{variable}={value}", variable=variable,
                     value=value, beta=kw.get("beta", math.inf),
                     line=lineno)


def _parse_data(ts: _Stream, lineno: int) -> DataDecl:
    name = ts.next(kind="name").text
    ts.next("over")
    variables = _parse_name_tuple(ts)
    ts.next("{")
    records = []

    def one_record():
        tok = ts.peek()
        if tok is not None and tok.text == "(":
            ts.next("(")
            rec = [_label(ts)]
            while ts.peek() is not None and ts.peek().text == ",":
                ts.next(",")
                rec.append(_label(ts))
            ts.next(")")
            return tuple(rec)
        return (_label(ts),)

    tok = ts.peek()
    if tok is None or tok.text != "}":
        records.append(one_record())
        while ts.peek() is not None and ts.peek().text == ",":
            ts.next(",")
            records.append(one_record())
    ts.next("}")
    ts.done()
    return DataDecl(name=name, variables=variables,
                    records=tuple(records), line=lineno)


def _parse_factor(ts: _Stream, lineno: int) -> FactorDecl:
    name = ts.next(kind="name").text
    ts.next("over")
    scope = _parse_name_tuple(ts)
    ts.next("=")
    values = _parse_number_list(ts)
    kw = _parse_kwargs(ts, ("theta",))
    return FactorDecl(name=name, scope=scope, values=values,
                      theta=kw.get("theta", 1.0), line=lineno)


def _parse_query(ts: _Stream, lineno: int) -> QueryDecl:
    name = ts.next(kind="name").text
    kw = _parse_kwargs(ts, ("gamma", "seed", "tol", "restarts"))
    return QueryDecl(name=name, params=tuple(sorted(kw.items())),
                     line=lineno)


_PARSERS = {
    "var": _parse_var,
    "cpd": _parse_cpd,
    "edge": _parse_edge,
    "event": _parse_event,
    "data": _parse_data,
    "factor": _parse_factor,
    "query": _parse_query,
}


def parse(text: str) -> SpecDocument:
    """Parse a .pdg document.  Total: any input either parses or raises
    a located SpecSyntaxError / SpecSemanticError / DuplicateName."""
    doc = SpecDocument()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        tokens = _tokenize(line, lineno)
        head = tokens[0]
        if head.kind != "name" or head.text not in _PARSERS:
            raise SpecSyntaxError(
                f"expected one of: {', '.join(_KINDS)}",
                lineno, head.column, head.text)
        ts = _Stream(tokens[1:], lineno)
        try:
            decl = _PARSERS[head.text](ts, lineno)
        except SpecSyntaxError:
            raise
        except PdgError as err:
            raise SpecSemanticError(str(err), lineno, head.column) from err
        doc.declarations.append(decl)
    _check_names(doc)
    return doc


def _check_names(doc: SpecDocument):
    seen: dict[str, int] = {}
    for d in doc.declarations:
        if d.kind == "query":
            continue
        key = f"var:{d.name}" if d.kind == "var" else d.name
        if d.kind in ("edge", "event"):
            key = f"edge:{d.name}"
        if key in seen:
            raise DuplicateName(
                f"{d.kind} {d.name!r} already declared on line "
                f"{seen[key]}", d.line, 1, d.name)
        seen[key] = d.line


# -- semantic assembly ----------------------------------------------------

def _variables_of(doc: SpecDocument) -> dict[str, Variable]:
    out = {}
    for d in doc.of_kind("var"):
        try:
            out[d.name] = Variable(d.name, d.domain)
        except PdgError as err:
            raise SpecSemanticError(str(err), d.line) from err
    return out


def _require_vars(names, variables, decl):
    for n in names:
        if n not in variables:
            raise SpecSemanticError(f"undeclared variable {n!r}",
                                    decl.line, 1, n)


def _cpd_of(decl: CpdDecl, variables) -> Cpd:
    _require_vars(decl.sources + decl.targets, variables, decl)
    src_shape = tuple(variables[n].size for n in decl.sources)
    tgt_shape = tuple(variables[n].size for n in decl.targets)
    n_src = int(np.prod(src_shape)) if src_shape else 1
    n_tgt = int(np.prod(tgt_shape)) if tgt_shape else 1
    if len(decl.rows) != n_src:
        raise SpecSemanticError(
            f"cpd {decl.name!r} has {len(decl.rows)} rows; its sources "
            f"have {n_src} assignments", decl.line, 1, decl.name)
    for r in decl.rows:
        if len(r) != n_tgt:
            raise SpecSemanticError(
                f"cpd {decl.name!r} rows need {n_tgt} entries, got "
                f"{len(r)}", decl.line, 1, decl.name)
    try:
        return Cpd(decl.sources, decl.targets, np.asarray(decl.rows),
                   source_shape=src_shape, target_shape=tgt_shape)
    except PdgError as err:
        raise SpecSemanticError(str(err), decl.line, 1, decl.name) from err


def to_dataset(doc: SpecDocument, name: str) -> Dataset:
    decl = doc.lookup("data", name)
    if decl is None:
        raise SpecSemanticError(f"no data declaration named {name!r}")
    variables = _variables_of(doc)
    _require_vars(decl.variables, variables, decl)
    try:
        return Dataset([variables[n] for n in decl.variables],
                       decl.records)
    except PdgError as err:
        raise SpecSemanticError(str(err), decl.line, 1, name) from err


def validate_document(doc: SpecDocument) -> None:
    """Semantic check of every declaration, referenced or not."""
    variables = _variables_of(doc)
    for d in doc.of_kind("cpd"):
        _cpd_of(d, variables)
    for d in doc.of_kind("data"):
        to_dataset(doc, d.name)
    if doc.of_kind("factor"):
        to_factor_graph(doc)
    to_pdg(doc)


def to_pdg(doc: SpecDocument) -> Pdg:
    """Assemble the PDG: every edge and event declaration becomes an
    edge; edge declarations may reference cpds or datasets by name.
    Declared cpds are validated whether or not an edge uses them."""
    variables = _variables_of(doc)
    cpds = {d.name: d for d in doc.of_kind("cpd")}
    datas = {d.name: d for d in doc.of_kind("data")}
    for decl in cpds.values():
        _cpd_of(decl, variables)
    edges = []
    for d in doc.declarations:
        if d.kind == "edge":
            if d.name in cpds:
                cpd = _cpd_of(cpds[d.name], variables)
            elif d.name in datas:
                cpd = to_dataset(doc, d.name).empirical_cpd()
            else:
                raise SpecSemanticError(
                    f"edge references unknown cpd or data {d.name!r}",
                    d.line, 1, d.name)
            try:
                edges.append(Edge(d.name, cpd, beta=d.beta, alpha=d.alpha))
            except PdgError as err:
                raise SpecSemanticError(str(err), d.line, 1,
                                        d.name) from err
        elif d.kind == "event":
            _require_vars((d.variable,), variables, d)
            var = variables[d.variable]
            if d.value not in var.domain:
                raise SpecSemanticError(
                    f"value {d.value!r} not in domain of {d.variable!r}",
                    d.line, 1, d.value)
            cpd = Cpd.point_mass(var.name, var.size,
                                 var.domain.index(d.value))
            try:
                edges.append(Edge(d.name, cpd, beta=d.beta))
            except PdgError as err:
                raise SpecSemanticError(str(err), d.line, 1,
                                        d.name) from err
    try:
        return build_pdg(list(variables.values()), edges)
    except PdgError as err:
        raise SpecSemanticError(str(err)) from err


def to_factor_graph(doc: SpecDocument) -> WeightedFactorGraph:
    variables = _variables_of(doc)
    factors = []
    for d in doc.of_kind("factor"):
        _require_vars(d.scope, variables, d)
        cells = 1
        for n in d.scope:
            cells *= variables[n].size
        if len(d.values) != cells:
            raise SpecSemanticError(
                f"factor {d.name!r} needs {cells} values, got "
                f"{len(d.values)}", d.line, 1, d.name)
        try:
            factors.append(Factor(d.name, d.scope,
                                  np.asarray(d.values), d.theta))
        except PdgError as err:
            raise SpecSemanticError(str(err), d.line, 1, d.name) from err
    try:
        return WeightedFactorGraph(tuple(variables.values()),
                                   tuple(factors))
    except PdgError as err:
        raise SpecSemanticError(str(err)) from err


# -- serialization ---------------------------------------------------------

def _fmt(x: float) -> str:
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return f"{x:.12g}"


def _fmt_tuple(names) -> str:
    if len(names) == 1:
        return names[0]
    return "(" + ", ".join(names) + ")"


def serialize(doc: SpecDocument) -> str:
    """Canonical text: declarations sorted by kind then name, 12
    significant digits, `inf` keyword."""
    lines = []
    order = {k: i for i, k in enumerate(_KINDS)}

    def sort_key(d):
        return (order[d.kind], d.name)

    for d in sorted(doc.declarations, key=sort_key):
        if d.kind == "var":
            lines.append(f"var {d.name} {{{', '.join(d.domain)}}}")
        elif d.kind == "cpd":
            src = (_fmt_tuple(d.sources) + " ") if d.sources else ""
            rows = [", ".join(_fmt(v) for v in r) for r in d.rows]
            if d.sources:
                body = "[" + ", ".join(f"[{r}]" for r in rows) + "]"
            else:
                body = f"[{rows[0]}]"
            lines.append(f"cpd {d.name} : {src}-> "
                         f"{_fmt_tuple(d.targets)} = {body}")
        elif d.kind == "data":
            recs = ", ".join("(" + ", ".join(r) + ")" for r in d.records)
            lines.append(f"data {d.name} over {_fmt_tuple(d.variables)} "
                         f"{{{recs}}}")
        elif d.kind == "factor":
            vals = ", ".join(_fmt(v) for v in d.values)
            lines.append(f"factor {d.name} over {_fmt_tuple(d.scope)} = "
                         f"[{vals}] theta={_fmt(d.theta)}")
        elif d.kind == "edge":
            lines.append(f"edge {d.name} beta={_fmt(d.beta)} "
                         f"alpha={_fmt(d.alpha)}")
        elif d.kind == "event":
            lines.append(f"event {d.variable} = {d.value} "
                         f"beta={_fmt(d.beta)}")
        elif d.kind == "query":
            params = "".join(f" {k}={_fmt(v)}" for k, v in d.params)
            lines.append(f"query {d.name}{params}")
    return "\n".join(lines) + "\n"
