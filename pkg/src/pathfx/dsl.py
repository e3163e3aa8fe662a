"""Text format for CPT models and SCMs (``.scm.txt``).

Example::

    model "chain"
    var A : {0, 1}
    var Y : {0, 1}
    cpt A | : [0.5, 0.5]
    cpt Y | A : {
      (0): [0.9, 0.1]
      (1): [0.2, 0.8]
    }

SCM files use ``noise`` and ``mech`` declarations instead of ``cpt``::

    noise U_Y : {u0, u1} ~ [0.7, 0.3]
    mech Y <- (A; U_Y) {
      (0; u0) -> 0
      (0; u1) -> 1
      ...
    }

The ``model`` header line is optional.  A file is either all-``cpt`` or
all-``noise``/``mech``.  ``#`` comments run to
end of line.  Every error carries a 1-based line and column.
"""

from __future__ import annotations

import itertools
import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Mapping, NamedTuple, Union

from .errors import ModelError, ParseError, SemanticError
from .model import (
    NORMALIZATION_TOL,
    Cpt,
    CptModel,
    Domain,
    Mechanism,
    Model,
    NoiseSpec,
    Scm,
    VariableSpec,
)

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_NUMBER = r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?(?![A-Za-z0-9_.])"
_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>->)
  | (?P<larrow><-)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<number>""" + _NUMBER + r""")
  | (?P<word>[A-Za-z0-9_][A-Za-z0-9_.]*)
  | (?P<punct>[:{},|\[\]();~])
    """,
    re.VERBOSE,
)

KEYWORDS = ("var", "cpt", "noise", "mech")


class Token(NamedTuple):
    kind: str  # word | number | string | arrow | larrow | punct | eof
    text: str
    line: int
    column: int


def tokenize(text: str) -> Iterator[Token]:
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(line, pos - line_start + 1, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            yield Token(kind, m.group(), line, pos - line_start + 1)
        chunk = m.group()
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    yield Token("eof", "", line, pos - line_start + 1)


def _eof_position(text: str) -> tuple[int, int]:
    """Last character of the input (1,1 for empty input)."""
    if not text:
        return 1, 1
    last = len(text) - 1
    line = text.count("\n", 0, last) + 1
    return line, last - (text.rfind("\n", 0, last) + 1) + 1


# -- declarations ---------------------------------------------------------------


@dataclass(frozen=True)
class VarDecl:
    name: str
    values: tuple[str, ...]


@dataclass(frozen=True)
class CptDecl:
    child: str
    parents: tuple[str, ...]
    rows: Mapping[tuple[str, ...], tuple[float, ...]] = field(hash=False)


@dataclass(frozen=True)
class NoiseDecl:
    name: str
    values: tuple[str, ...]
    probs: tuple[float, ...]


@dataclass(frozen=True)
class MechDecl:
    child: str
    parents: tuple[str, ...]
    noise: str
    rows: Mapping[tuple[tuple[str, ...], str], str] = field(hash=False)


Declaration = Union[VarDecl, CptDecl, NoiseDecl, MechDecl]


@dataclass(frozen=True)
class ModelFile:
    """Parsed model file.  Equality ignores comments, whitespace and row order."""

    name: str
    declarations: tuple[Declaration, ...]
    kind: str  # "cpt-model" | "scm"

    def build(self) -> Model:
        return _build(self)

    @property
    def variables(self) -> tuple[VarDecl, ...]:
        return tuple(d for d in self.declarations if isinstance(d, VarDecl))


def _build(mf: ModelFile) -> Model:
    variables = tuple(VariableSpec(d.name, Domain(d.values)) for d in mf.variables)
    if mf.kind == "cpt-model":
        cpts = tuple(Cpt(d.child, d.parents, dict(d.rows)) for d in mf.declarations if isinstance(d, CptDecl))
        return CptModel(variables, cpts)
    noises = tuple(NoiseSpec(d.name, Domain(d.values), d.probs) for d in mf.declarations if isinstance(d, NoiseDecl))
    mechs = tuple(Mechanism(d.child, d.parents, d.noise, dict(d.rows)) for d in mf.declarations if isinstance(d, MechDecl))
    return Scm(variables, noises, mechs)


# -- parser ---------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = list(tokenize(text))
        self.pos = 0
        self.domains: dict[str, Domain] = {}  # variables
        self.noise_domains: dict[str, Domain] = {}
        self.where: dict[str, Token] = {}  # first declaration of each name
        self.defined: dict[str, Token] = {}  # cpt/mech per child
        self.noise_users: dict[str, str] = {}
        self.kind: str | None = None
        self.kind_token: Token | None = None

    # token helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def _pos_of(self, tok: Token) -> tuple[int, int]:
        if tok.kind == "eof":
            return _eof_position(self.text)
        return tok.line, tok.column

    def error(self, message: str, tok: Token | None = None, expected: str | None = None) -> ParseError:
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return ParseError(*self._pos_of(tok), f"{message}, found {found}", expected)

    def semantic(self, message: str, tok: Token) -> SemanticError:
        return SemanticError(*self._pos_of(tok), message)

    def advance(self) -> Token:
        tok = self.tok
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        return self.tok.kind in ("punct", "arrow", "larrow") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error("unexpected token", expected=repr(text))
        return self.advance()

    def ident(self) -> Token:
        tok = self.tok
        if tok.kind != "word" or not IDENT_RE.match(tok.text):
            raise self.error("expected an identifier", expected="identifier")
        return self.advance()

    def value(self) -> tuple[str, Token]:
        tok = self.tok
        if tok.kind in ("word", "number"):
            self.advance()
            return tok.text, tok
        if tok.kind == "string":
            self.advance()
            return _unquote(tok), tok
        raise self.error("expected a value", expected="value")

    def number(self) -> tuple[float, Token]:
        tok = self.tok
        if tok.kind != "number":
            raise self.error("expected a probability", expected="number")
        self.advance()
        return float(tok.text), tok

    def comma_list(self, item, close: str, allow_empty: bool = True) -> list:
        items = []
        if self.at(close):
            if not allow_empty:
                raise self.error("empty list")
            return items
        items.append(item())
        while self.at(","):
            self.advance()
            items.append(item())
        return items

    # grammar

    def parse(self) -> ModelFile:
        head = self.tok
        name = "model"  # the header is optional
        if head.kind == "word" and head.text == "model":
            self.advance()
            if self.tok.kind not in ("string", "word"):
                raise self.error("expected the model name", expected="string")
            name = _unquote(self.tok) if self.tok.kind == "string" else self.tok.text
            self.advance()
        decls: list[Declaration] = []
        while self.tok.kind != "eof":
            tok = self.tok
            if tok.kind != "word" or tok.text not in KEYWORDS:
                raise self.error("expected a declaration", expected="var, cpt, noise or mech")
            self.advance()
            decls.append(getattr(self, "_" + tok.text)(tok))
        if not self.domains:
            raise self.semantic("model declares no variables", self.tok)
        kind = self.kind or "cpt-model"
        for name_, tok in self.where.items():
            if name_ in self.domains and name_ not in self.defined:
                what = "cpt" if kind == "cpt-model" else "mech"
                raise self.semantic(f"variable {name_} has no {what} declaration", tok)
        for u, tok in self.where.items():
            if u in self.noise_domains and u not in self.noise_users:
                raise self.semantic(f"noise {u} is not used by any mechanism", tok)
        mf = ModelFile(name, tuple(decls), kind)
        try:
            mf.build()
        except ModelError as exc:
            tok = self.defined.get(exc.variable) or self.where.get(exc.variable) or head
            raise self.semantic(str(exc), tok) from None
        return mf

    def _set_kind(self, kind: str, tok: Token):
        if self.kind is None:
            self.kind, self.kind_token = kind, tok
        elif self.kind != kind:
            raise self.semantic(
                f"cannot mix cpt and noise/mech declarations (file is a {self.kind} "
                f"since line {self.kind_token.line})",
                tok,
            )

    def _new_name(self, tok: Token):
        if tok.text in self.where:
            raise self.semantic(f"name {tok.text} already declared on line {self.where[tok.text].line}", tok)
        self.where[tok.text] = tok

    def _domain(self) -> tuple[tuple[str, ...], list[Token]]:
        self.expect("{")
        pairs = self.comma_list(self.value, "}", allow_empty=False)
        self.expect("}")
        seen = set()
        for v, t in pairs:
            if v in seen:
                raise self.semantic(f"duplicate domain value {v!r}", t)
            seen.add(v)
        return tuple(v for v, _ in pairs), [t for _, t in pairs]

    def _probs(self, size: int, what: str) -> tuple[float, ...]:
        open_tok = self.expect("[")
        pairs = self.comma_list(self.number, "]")
        self.expect("]")
        probs = tuple(p for p, _ in pairs)
        if len(probs) != size:
            raise self.semantic(f"{what}: {len(probs)} probabilities for a domain of size {size}", open_tok)
        for p, t in pairs:
            if not math.isfinite(p) or p < 0:
                raise self.semantic(f"{what}: invalid probability {t.text}", t)
        total = math.fsum(probs)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise self.semantic(f"{what}: probabilities sum to {total!r}, not 1", open_tok)
        return probs

    def _var_ref(self) -> Token:
        tok = self.ident()
        if tok.text not in self.domains:
            raise self.semantic(f"undeclared variable {tok.text}", tok)
        return tok

    def _var(self, kw: Token) -> VarDecl:
        name = self.ident()
        self._new_name(name)
        self.expect(":")
        values, _ = self._domain()
        self.domains[name.text] = Domain(values)
        return VarDecl(name.text, values)

    def _child(self) -> Token:
        child = self._var_ref()
        if child.text in self.defined:
            raise self.semantic(f"{child.text} already defined on line {self.defined[child.text].line}", child)
        return child

    def _parents(self, close: str) -> list[Token]:
        parents = self.comma_list(self._var_ref, close)
        seen = set()
        for p in parents:
            if p.text in seen:
                raise self.semantic(f"parent {p.text} listed twice", p)
            seen.add(p.text)
        return parents

    def _key(self, parents: list[Token], close: str) -> tuple[tuple[str, ...], Token]:
        open_tok = self.expect("(")
        pairs = self.comma_list(self.value, close)
        if len(pairs) != len(parents):
            raise self.semantic(f"row has {len(pairs)} values for {len(parents)} parents", open_tok)
        for (v, t), p in zip(pairs, parents):
            if v not in self.domains[p.text]:
                raise self.semantic(f"{v!r} is not in the domain of {p.text}", t)
        return tuple(v for v, _ in pairs), open_tok

    def _check_total(self, child: Token, parents: list[Token], keys, close: Token, noise: Domain | None = None):
        doms = [self.domains[p.text].values for p in parents]
        if noise is not None:
            doms.append(noise.values)
        for combo in itertools.product(*doms):
            key = (combo[:-1], combo[-1]) if noise is not None else combo
            if key not in keys:
                shown = f"({','.join(combo[:-1])};{combo[-1]})" if noise is not None else f"({','.join(combo)})"
                raise self.semantic(f"{child.text}: missing row for input {shown}", close)

    def _cpt(self, kw: Token) -> CptDecl:
        self._set_kind("cpt-model", kw)
        child = self._child()
        self.expect("|")
        parents = self._parents(":")
        self.expect(":")
        size = len(self.domains[child.text])
        rows: dict[tuple[str, ...], tuple[float, ...]] = {}
        if self.at("["):
            if parents:
                raise self.error("a CPT with parents needs a row table", expected="'{'")
            rows[()] = self._probs(size, f"{child.text}")
        else:
            self.expect("{")
            while not self.at("}"):
                key, key_tok = self._key(parents, ")")
                self.expect(")")
                self.expect(":")
                if key in rows:
                    raise self.semantic(f"{child.text}: duplicate row ({','.join(key)})", key_tok)
                rows[key] = self._probs(size, f"{child.text} row ({','.join(key)})")
                if self.at(","):
                    self.advance()
            close = self.expect("}")
            self._check_total(child, parents, rows, close)
        self.defined[child.text] = child
        return CptDecl(child.text, tuple(p.text for p in parents), rows)

    def _noise(self, kw: Token) -> NoiseDecl:
        self._set_kind("scm", kw)
        name = self.ident()
        self._new_name(name)
        self.expect(":")
        values, _ = self._domain()
        self.expect("~")
        probs = self._probs(len(values), f"noise {name.text}")
        self.noise_domains[name.text] = Domain(values)
        return NoiseDecl(name.text, values, probs)

    def _mech(self, kw: Token) -> MechDecl:
        self._set_kind("scm", kw)
        child = self._child()
        self.expect("<-")
        self.expect("(")
        parents = self._parents(";")
        self.expect(";")
        noise = self.ident()
        if noise.text not in self.noise_domains:
            raise self.semantic(f"undeclared noise {noise.text}", noise)
        if noise.text in self.noise_users:
            raise self.semantic(f"noise {noise.text} already used by {self.noise_users[noise.text]}", noise)
        self.expect(")")
        ndom = self.noise_domains[noise.text]
        cdom = self.domains[child.text]
        rows: dict[tuple[tuple[str, ...], str], str] = {}
        self.expect("{")
        while not self.at("}"):
            key, key_tok = self._key(parents, ";")
            self.expect(";")
            u, u_tok = self.value()
            if u not in ndom:
                raise self.semantic(f"{u!r} is not in the domain of {noise.text}", u_tok)
            self.expect(")")
            self.expect("->")
            out, out_tok = self.value()
            if out not in cdom:
                raise self.semantic(f"{out!r} is not in the domain of {child.text}", out_tok)
            if (key, u) in rows:
                raise self.semantic(f"{child.text}: duplicate row ({','.join(key)};{u})", key_tok)
            rows[(key, u)] = out
            if self.at(","):
                self.advance()
        close = self.expect("}")
        self._check_total(child, parents, rows, close, ndom)
        self.noise_users[noise.text] = child.text
        self.defined[child.text] = child
        return MechDecl(child.text, tuple(p.text for p in parents), noise.text, rows)


def _unquote(tok: Token) -> str:
    try:
        return json.loads(tok.text)
    except ValueError:
        raise ParseError(tok.line, tok.column, "malformed string literal") from None


def parse_model(text: str) -> ModelFile:
    """Parse and validate a model file; raises :class:`ParseError` or :class:`SemanticError`."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(1, 1, f"input is not UTF-8: {exc.reason}") from None
    return _Parser(text).parse()


def load_model(text: str) -> Model:
    return parse_model(text).build()


# -- serializer -------------------------------------------------------------------


_BARE_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.]*\Z|" + _NUMBER + r"\Z")


def _fmt_value(v: str) -> str:
    if _BARE_RE.match(v):
        toks = list(tokenize(v))
        if len(toks) == 2 and toks[0].text == v:
            return v
    return json.dumps(v, ensure_ascii=False)


def _fmt_probs(probs) -> str:
    return "[" + ", ".join(format(p, ".12g") for p in probs) + "]"


def serialize_model(mf: ModelFile | Model, name: str | None = None) -> str:
    """Canonical text; table rows sorted by input tuple in domain order."""
    if not isinstance(mf, ModelFile):
        mf = to_model_file(mf, name or "model")
    doms = {d.name: Domain(d.values) for d in mf.declarations if isinstance(d, (VarDecl, NoiseDecl))}

    def order(parents, key):
        return tuple(doms[p].index(v) for p, v in zip(parents, key))

    out = [f"model {json.dumps(mf.name, ensure_ascii=False)}", ""]
    for d in mf.declarations:
        if isinstance(d, VarDecl):
            out.append(f"var {d.name} : {{{', '.join(_fmt_value(v) for v in d.values)}}}")
        elif isinstance(d, NoiseDecl):
            out.append(
                f"noise {d.name} : {{{', '.join(_fmt_value(v) for v in d.values)}}} ~ {_fmt_probs(d.probs)}"
            )
        elif isinstance(d, CptDecl):
            head = f"cpt {d.child} | {', '.join(d.parents)}".rstrip() + " :"
            if not d.parents:
                out.append(f"{head} {_fmt_probs(d.rows[()])}")
                continue
            out.append(head + " {")
            for key in sorted(d.rows, key=lambda k: order(d.parents, k)):
                out.append(f"  ({', '.join(_fmt_value(v) for v in key)}): {_fmt_probs(d.rows[key])}")
            out.append("}")
        else:
            out.append(f"mech {d.child} <- ({', '.join(d.parents)}; {d.noise}) {{")
            keys = sorted(d.rows, key=lambda k: order(d.parents, k[0]) + (doms[d.noise].index(k[1]),))
            for pa, u in keys:
                out.append(f"  ({', '.join(_fmt_value(v) for v in pa)}; {_fmt_value(u)}) -> {_fmt_value(d.rows[(pa, u)])}")
            out.append("}")
    return "\n".join(out) + "\n"


def to_model_file(model: Model, name: str) -> ModelFile:
    """Declarations for an in-memory model: variables first, then tables in variable order."""
    decls: list[Declaration] = [VarDecl(v.name, v.domain.values) for v in model.variables]
    if isinstance(model, CptModel):
        decls += [CptDecl(n, model.parents(n), dict(model.cpt(n).rows)) for n in model.names]
        return ModelFile(name, tuple(decls), "cpt-model")
    for n in model.names:
        u = model.noise_of(n)
        decls.append(NoiseDecl(u.name, u.domain.values, u.dist))
    for n in model.names:
        m = model.mechanism(n)
        decls.append(MechDecl(n, m.parents, m.noise, dict(m.table)))
    return ModelFile(name, tuple(decls), "scm")
