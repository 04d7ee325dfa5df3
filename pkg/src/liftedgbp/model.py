"""Parfactor models: declarations, the text format, shattering and grounding.

Model files are line oriented::

    # friends and smokers
    domain person = 3
    predicate smokes(person)
    predicate friends(person, person)
    parfactor smokes(X), smokes(Y), friends(X, Y) where X != Y values [...]

A domain may also list object names (``domain person = {alice, bob}``); the
names are mapped to indices 1..N in declaration order. Logical variables start
with an upper-case letter. Tables are row-major with the first atom as the most
significant axis, and are kept in natural space here.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    ArityUnsupported,
    ConstantTerm,
    DomainTooSmall,
    ModelError,
    ModelSyntaxError,
    NonPositiveValue,
    TableLengthMismatch,
    UnknownDomain,
    UnknownPredicate,
)
from .factor import FactorTable


class GroundAtom(NamedTuple):
    predicate: str
    objects: tuple

    def __str__(self) -> str:
        return f"{self.predicate}({','.join(str(o) for o in self.objects)})"


class Atom(NamedTuple):
    predicate: str
    terms: tuple

    def __str__(self) -> str:
        return f"{self.predicate}({', '.join(self.terms)})"

    def substitute(self, theta: Mapping[str, object]):
        return GroundAtom(self.predicate, tuple(theta[t] for t in self.terms))


@dataclass(frozen=True)
class DomainDecl:
    name: str
    size: int
    objects: tuple = ()  # optional object names, index i+1 <-> objects[i]


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    arg_domains: tuple
    range: int = 2

    @property
    def arity(self) -> int:
        return len(self.arg_domains)


@dataclass(frozen=True, eq=False)
class Parfactor:
    atoms: tuple
    constraints: frozenset  # of frozenset({X, Y}) meaning X != Y
    values: np.ndarray  # natural space, one axis per atom

    def lvars(self) -> tuple:
        seen = []
        for atom in self.atoms:
            for t in atom.terms:
                if t not in seen:
                    seen.append(t)
        return tuple(seen)

    def __str__(self) -> str:
        body = ", ".join(str(a) for a in self.atoms)
        if self.constraints:
            pairs = sorted(tuple(sorted(c)) for c in self.constraints)
            body += " | " + ", ".join(f"{x} != {y}" for x, y in pairs)
        return f"phi({body})"


@dataclass(frozen=True)
class ParfactorModel:
    domains: Mapping[str, DomainDecl]
    predicates: Mapping[str, PredicateDecl]
    parfactors: tuple = field(default_factory=tuple)

    def lvar_domains(self, pf: Parfactor) -> dict:
        """Map every lvar of ``pf`` to its domain name."""
        out = {}
        for atom in pf.atoms:
            decl = self.predicates[atom.predicate]
            for term, dom in zip(atom.terms, decl.arg_domains):
                if out.setdefault(term, dom) != dom:
                    raise ModelError(
                        f"lvar {term} used with domains {out[term]} and {dom}")
        return out

    def arg_domains(self) -> dict:
        return {name: p.arg_domains for name, p in self.predicates.items()}

    def ranges(self) -> dict:
        return {name: p.range for name, p in self.predicates.items()}

    def domain_sizes(self) -> dict:
        return {name: d.size for name, d in self.domains.items()}

    def with_domain_size(self, sizes) -> "ParfactorModel":
        """Copy with new domain sizes; ``sizes`` is an int (all domains) or a mapping."""
        if isinstance(sizes, Mapping):
            new = {k: replace(d, size=int(sizes.get(k, d.size)), objects=()) for k, d in self.domains.items()}
        else:
            new = {k: replace(d, size=int(sizes), objects=()) for k, d in self.domains.items()}
        for d in new.values():
            if d.size < 1:
                raise ModelError(f"domain {d.name} must have at least one object")
        return replace(self, domains=new)

    def is_shattered(self) -> bool:
        for pf in self.parfactors:
            doms = self.lvar_domains(pf)
            lv = pf.lvars()
            for x, y in itertools.combinations(lv, 2):
                if doms[x] == doms[y] and frozenset((x, y)) not in pf.constraints:
                    return False
            if len(set(pf.atoms)) != len(pf.atoms):
                return False
            if any(len(a.terms) == 2 and a.terms[0] == a.terms[1] for a in pf.atoms):
                return False
        return True

    def object_index(self, domain: str, token: str) -> int:
        decl = self.domains[domain]
        if token in decl.objects:
            return decl.objects.index(token) + 1
        try:
            idx = int(token)
        except ValueError:
            raise ModelError(f"unknown object {token!r} in domain {domain}") from None
        if not 1 <= idx <= decl.size:
            raise ModelError(f"object {idx} outside domain {domain} (1..{decl.size})")
        return idx


@dataclass
class GroundMrf:
    """A flat MRF: factor tables whose scopes are hashable, orderable variables."""

    factors: list
    cardinalities: dict
    arg_domains: dict = field(default_factory=dict)

    @property
    def variables(self) -> tuple:
        return tuple(sorted(self.cardinalities))

    @classmethod
    def from_factors(cls, factors: Sequence[FactorTable], arg_domains=None) -> "GroundMrf":
        cards = {}
        for f in factors:
            for v, c in zip(f.scope, f.cardinalities):
                if cards.setdefault(v, c) != c:
                    raise ModelError(f"variable {v!r} has inconsistent cardinalities")
        return cls(list(factors), cards, dict(arg_domains or {}))


# -- parsing ---------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<number>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>!=|[(),\[\]{}=|])
""", re.VERBOSE)


class _Token(NamedTuple):
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list:
    """Split into tokens; newlines inside brackets are dropped so tables may wrap."""
    tokens = []
    pos, line, line_start, depth = 0, 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ModelSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "newline":
            if depth == 0:
                tokens.append(_Token("newline", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind == "op":
            if m.group() in "([{":
                depth += 1
            elif m.group() in ")]}":
                depth = max(depth - 1, 0)
            tokens.append(_Token("op", m.group(), line, col))
        elif kind in ("number", "ident"):
            tokens.append(_Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(_Token("newline", "\n", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ModelSyntaxError(message, tok.line, tok.col)

    def expect(self, kind, text=None) -> _Token:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            shown = "end of line" if tok.kind == "newline" else repr(tok.text)
            raise self.error(f"expected {want!r}, found {shown}", tok)
        return tok

    def accept(self, kind, text=None):
        tok = self.peek()
        if tok.kind == kind and (text is None or tok.text == text):
            self.i += 1
            return tok
        return None

    def at_end(self) -> bool:
        return self.i >= len(self.tokens)


def parse_model(text: str) -> ParfactorModel:
    """Parse and validate a model file.

    Raises:
        ModelSyntaxError: malformed input (carries line and column).
        UnknownPredicate, UnknownDomain, TableLengthMismatch, NonPositiveValue,
        ArityUnsupported, ConstantTerm: semantic validation failures.
    """
    p = _Parser(_tokenize(text))
    domains: dict = {}
    predicates: dict = {}
    parfactors = []
    while not p.at_end():
        if p.accept("newline"):
            continue
        head = p.expect("ident")
        if head.text == "domain":
            decl = _parse_domain(p)
            if decl.name in domains:
                raise ModelSyntaxError(f"domain {decl.name} declared twice", head.line, head.col)
            domains[decl.name] = decl
        elif head.text == "predicate":
            decl = _parse_predicate(p, domains, head)
            if decl.name in predicates:
                raise ModelSyntaxError(f"predicate {decl.name} declared twice", head.line, head.col)
            predicates[decl.name] = decl
        elif head.text == "parfactor":
            parfactors.append(_parse_parfactor(p, predicates, head))
        else:
            raise p.error(f"unknown statement {head.text!r}", head)
        p.expect("newline")
    model = ParfactorModel(domains, predicates, tuple(parfactors))
    for pf in model.parfactors:
        model.lvar_domains(pf)
    return model


def _parse_domain(p: _Parser) -> DomainDecl:
    name = p.expect("ident").text
    p.expect("op", "=")
    if p.accept("op", "{"):
        objects = [p.expect("ident").text]
        while p.accept("op", ","):
            objects.append(p.expect("ident").text)
        p.expect("op", "}")
        if len(set(objects)) != len(objects):
            raise p.error(f"duplicate object names in domain {name}")
        return DomainDecl(name, len(objects), tuple(objects))
    tok = p.expect("number")
    try:
        size = int(tok.text)
    except ValueError:
        raise p.error("domain size must be an integer", tok) from None
    if size < 1:
        raise p.error("domain size must be positive", tok)
    return DomainDecl(name, size)


def _parse_predicate(p: _Parser, domains, head) -> PredicateDecl:
    name = p.expect("ident").text
    p.expect("op", "(")
    args = [p.expect("ident")]
    while p.accept("op", ","):
        args.append(p.expect("ident"))
    p.expect("op", ")")
    for tok in args:
        if tok.text not in domains:
            raise UnknownDomain(f"line {tok.line}: unknown domain {tok.text!r}")
    if len(args) > 2:
        raise ArityUnsupported(f"line {head.line}: predicate {name} has arity {len(args)} (max 2)")
    k = 2
    if p.accept("ident", "range"):
        tok = p.expect("number")
        try:
            k = int(tok.text)
        except ValueError:
            raise p.error("range must be an integer", tok) from None
        if k < 2:
            raise p.error("range must be at least 2", tok)
    return PredicateDecl(name, tuple(t.text for t in args), k)


def _parse_atom(p: _Parser, predicates) -> Atom:
    tok = p.expect("ident")
    p.expect("op", "(")
    terms = [p.next()]
    while p.accept("op", ","):
        terms.append(p.next())
    p.expect("op", ")")
    for t in terms:
        if t.kind == "number" or (t.kind == "ident" and not t.text[0].isupper()):
            raise ConstantTerm(
                f"line {t.line}, column {t.col}: constant {t.text!r} in atom {tok.text}; only lvars allowed")
        if t.kind != "ident":
            raise ModelSyntaxError(f"bad term {t.text!r}", t.line, t.col)
    if tok.text not in predicates:
        raise UnknownPredicate(f"line {tok.line}: unknown predicate {tok.text!r}")
    decl = predicates[tok.text]
    if len(terms) != decl.arity:
        raise ModelSyntaxError(
            f"{tok.text} takes {decl.arity} argument(s), got {len(terms)}", tok.line, tok.col)
    return Atom(tok.text, tuple(t.text for t in terms))


def _parse_parfactor(p: _Parser, predicates, head) -> Parfactor:
    atoms = [_parse_atom(p, predicates)]
    while p.accept("op", ","):
        atoms.append(_parse_atom(p, predicates))
    constraints = set()
    if p.accept("ident", "where"):
        while True:
            x = p.expect("ident")
            p.expect("op", "!=")
            y = p.expect("ident")
            if x.text == y.text:
                raise p.error(f"constraint {x.text} != {x.text} is unsatisfiable", x)
            constraints.add(frozenset((x.text, y.text)))
            if not p.accept("op", ","):
                break
    p.expect("ident", "values")
    p.expect("op", "[")
    numbers = []
    if not p.accept("op", "]"):
        numbers.append(p.expect("number"))
        while p.accept("op", ","):
            numbers.append(p.expect("number"))
        p.expect("op", "]")
    shape = tuple(predicates[a.predicate].range for a in atoms)
    expected = int(np.prod(shape))
    if len(numbers) != expected:
        raise TableLengthMismatch(
            f"line {head.line}: table has {len(numbers)} values, expected {expected} for shape {shape}")
    for tok in numbers:
        if float(tok.text) <= 0:
            raise NonPositiveValue(f"line {tok.line}, column {tok.col}: table value {tok.text} is not positive")
    lvars = {t for a in atoms for t in a.terms}
    for c in constraints:
        for v in c:
            if v not in lvars:
                raise ModelError(f"line {head.line}: constraint lvar {v} does not occur in any atom")
    values = np.array([float(t.text) for t in numbers]).reshape(shape)
    return Parfactor(tuple(atoms), frozenset(constraints), values)


def load_model(path) -> ParfactorModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def format_model(model: ParfactorModel) -> str:
    """Serialize back to the text format (round-trips through :func:`parse_model`)."""
    lines = []
    for d in model.domains.values():
        if d.objects:
            lines.append(f"domain {d.name} = {{{', '.join(d.objects)}}}")
        else:
            lines.append(f"domain {d.name} = {d.size}")
    for pr in model.predicates.values():
        rng = f" range {pr.range}" if pr.range != 2 else ""
        lines.append(f"predicate {pr.name}({', '.join(pr.arg_domains)}){rng}")
    for pf in model.parfactors:
        s = "parfactor " + ", ".join(f"{a.predicate}({', '.join(a.terms)})" for a in pf.atoms)
        if pf.constraints:
            pairs = sorted(tuple(sorted(c)) for c in pf.constraints)
            s += " where " + ", ".join(f"{x} != {y}" for x, y in pairs)
        s += " values [" + ", ".join(repr(float(v)) for v in pf.values.reshape(-1)) + "]"
        lines.append(s)
    return "\n".join(lines) + "\n"


# -- shattering --------------------------------------------------------------------

def set_partitions(items: Sequence) -> Iterator[list]:
    """All set partitions of ``items`` as lists of blocks (restricted growth order)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def _restrict(pf: Parfactor, theta: Mapping[str, str], doms) -> Parfactor | None:
    atoms = [Atom(a.predicate, tuple(theta[t] for t in a.terms)) for a in pf.atoms]
    if any(len(a.terms) == 2 and a.terms[0] == a.terms[1] for a in atoms):
        return None  # binary atoms are irreflexive
    letters = {}
    for a in atoms:
        letters.setdefault(a, chr(ord("a") + len(letters)))
    src = "".join(letters[a] for a in atoms)
    dst = "".join(letters.values())
    values = np.einsum(f"{src}->{dst}", pf.values) if src != dst else pf.values
    kept = tuple(letters)
    lv = []
    for a in kept:
        for t in a.terms:
            if t not in lv:
                lv.append(t)
    constraints = frozenset(
        frozenset((x, y)) for x, y in itertools.combinations(lv, 2) if doms[x] == doms[y])
    return Parfactor(kept, constraints, np.ascontiguousarray(values))


def shatter(model: ParfactorModel) -> ParfactorModel:
    """Split every parfactor into all-distinct cases.

    Each partition of a parfactor's lvars into equality classes (respecting
    existing ``!=`` constraints and domains) yields one parfactor over the class
    representatives with pairwise inequality constraints. Atoms that become
    identical are merged by taking the table diagonal, and cases that would make
    a binary atom reflexive are dropped.
    """
    out = []
    for pf in model.parfactors:
        doms = model.lvar_domains(pf)
        lvars = pf.lvars()
        for blocks in set_partitions(lvars):
            ok = True
            for block in blocks:
                if len({doms[v] for v in block}) > 1:
                    ok = False
                if any(frozenset(c) in pf.constraints for c in itertools.combinations(block, 2)):
                    ok = False
            if not ok:
                continue
            theta = {}
            for block in blocks:
                rep = min(block, key=lvars.index)
                for v in block:
                    theta[v] = rep
            new = _restrict(pf, theta, doms)
            if new is not None:
                out.append(new)
    return replace(model, parfactors=tuple(out))


# -- grounding ----------------------------------------------------------------------

def falling_factorial(n: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= n - i
    return out


def injective_substitutions(lvar_domains: Mapping[str, str], sizes: Mapping[str, int],
                            objects: Mapping[str, Sequence] | None = None) -> Iterator[dict]:
    """Yield every lvar -> object map that is injective within each domain.

    ``objects`` restricts the candidate objects per domain (default 1..N).
    """
    by_domain: dict = {}
    for v, d in lvar_domains.items():
        by_domain.setdefault(d, []).append(v)
    doms = sorted(by_domain)
    pools = []
    for d in doms:
        pool = objects[d] if objects is not None else range(1, sizes[d] + 1)
        pools.append(list(itertools.permutations(pool, len(by_domain[d]))))
    for combo in itertools.product(*pools):
        theta = {}
        for d, assignment in zip(doms, combo):
            theta.update(zip(by_domain[d], assignment))
        yield theta


def ground(model: ParfactorModel) -> GroundMrf:
    """Ground a shattered model: one factor per injective substitution."""
    if not model.is_shattered():
        raise ModelError("model must be shattered before grounding")
    sizes = model.domain_sizes()
    ranges = model.ranges()
    factors = []
    for pf in model.parfactors:
        doms = model.lvar_domains(pf)
        need: dict = {}
        for d in doms.values():
            need[d] = need.get(d, 0) + 1
        for d, k in need.items():
            if sizes[d] < k:
                raise DomainTooSmall(f"domain {d} has {sizes[d]} objects but {pf} needs {k}")
        shape = tuple(ranges[a.predicate] for a in pf.atoms)
        for theta in injective_substitutions(doms, sizes):
            scope = [a.substitute(theta) for a in pf.atoms]
            factors.append(FactorTable.from_natural(scope, shape, pf.values))
    return GroundMrf.from_factors(factors, model.arg_domains())


def parse_ground_atom(model: ParfactorModel, text: str) -> GroundAtom:
    """Parse ``friends(1,2)`` or ``friends(alice,bob)`` against ``model``."""
    m = re.fullmatch(r"\s*([A-Za-z_]\w*)\s*\(([^)]*)\)\s*", text)
    if not m:
        raise ModelError(f"cannot parse ground atom {text!r}")
    name = m.group(1)
    if name not in model.predicates:
        raise UnknownPredicate(f"unknown predicate {name!r}")
    args = [a.strip() for a in m.group(2).split(",")]
    decl = model.predicates[name]
    if len(args) != decl.arity:
        raise ModelError(f"{name} takes {decl.arity} argument(s)")
    return GroundAtom(name, tuple(model.object_index(d, a) for d, a in zip(decl.arg_domains, args)))
