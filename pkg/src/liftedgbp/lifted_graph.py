"""Lifted region graphs.

Nodes are canonical clusters. An edge ``alpha -> beta*`` carries ``sigma``, the
atom map from a subset of ``alpha`` onto ``beta*`` (the role the child plays in
the parent), and the object counts from which the cardinality ``kappa`` is
computed for any domain size. Nothing stored here depends on domain sizes.

Generation walks region sizes downwards: each subset of a size-``d`` region
that is one atom smaller is canonized, added as a node, and linked once per
CSG isomorphism onto its canonical form, after discarding maps related by an
automorphism of the parent.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

from .csg import (
    Csg,
    atom_map_from_nodes,
    build_csg,
    canonize,
    enumerate_isomorphisms,
    extends_to_automorphism,
)
from .errors import DomainTooSmall, ModelError
from .factor import FactorTable
from .model import GroundAtom, ParfactorModel, falling_factorial, injective_substitutions, shatter


@dataclass(frozen=True)
class LiftedRegion:
    atoms: tuple  # canonical ground atoms, sorted
    canon_form: str
    csg: Csg
    factors: FactorTable  # log product of every factor inside the region

    def objects(self) -> dict:
        """Objects per domain referenced by the region."""
        return _objects_by_domain(self.atoms, self.csg.arg_domains())


@dataclass(frozen=True)
class LiftedEdge:
    parent: int
    child: int
    sigma: tuple  # (parent atom, child atom) pairs in the child's atom order
    kappa_counts: tuple  # (domain, n_child_objects, n_other_objects) per domain

    @property
    def subset(self) -> tuple:
        """Parent atoms playing the child's role, in the child's atom order."""
        return tuple(a for a, _ in self.sigma)

    def sigma_map(self) -> dict:
        return dict(self.sigma)


def _objects_by_domain(atoms, arg_domains) -> dict:
    out: dict = defaultdict(set)
    for a in atoms:
        for d, o in zip(arg_domains[a.predicate], a.objects):
            out[d].add(o)
    return {d: frozenset(s) for d, s in out.items()}


def kappa(edge: LiftedEdge, n) -> int:
    """Number of ground parents of one ground child in the role of ``edge``.

    ``n`` is a domain size applied to every domain, or a mapping per domain.
    """
    total = 1
    for dom, n_beta, n_rest in edge.kappa_counts:
        size = n[dom] if isinstance(n, Mapping) else int(n)
        if size < n_beta + n_rest:
            raise DomainTooSmall(f"domain {dom or 'default'} of size {size} < {n_beta + n_rest}")
        total *= falling_factorial(size - n_beta, n_rest)
    return total


def kappa_symbolic(edge: LiftedEdge) -> str:
    """Human-readable form such as ``N-1`` or ``(N-1)(N-2)``; ``1`` for the empty product."""
    doms = {d for d, _, r in edge.kappa_counts if r}
    parts = []
    for dom, n_beta, n_rest in edge.kappa_counts:
        sym = f"N_{dom}" if len(doms) > 1 else "N"
        for i in range(1, n_rest + 1):
            off = n_beta + i - 1
            parts.append(f"({sym}-{off})" if off else sym)
    if len(parts) == 1:
        return parts[0].strip("()")
    return "".join(parts) or "1"


def _serialize_map(mapping: Mapping) -> str:
    return ";".join(f"{a}->{b}" for a, b in sorted(mapping.items()))


class LiftedRegionGraph:
    def __init__(self, model: ParfactorModel) -> None:
        self.model = model
        self.arg_domains = model.arg_domains()
        self.ranges = model.ranges()
        self.regions: list = []
        self.edges: list = []
        self.index: dict = {}
        self.in_edges: list = []
        self.out_edges: list = []

    def add_region(self, atoms: Sequence[GroundAtom]) -> int:
        """Insert the canonical class of ``atoms`` (if new) and return its id."""
        cc, _ = canonize(build_csg(atoms, self.arg_domains))
        if cc.canon_form in self.index:
            return self.index[cc.canon_form]
        region = LiftedRegion(cc.atoms, cc.canon_form, build_csg(cc.atoms, self.arg_domains),
                              region_factor(self.model, cc.atoms))
        self.regions.append(region)
        self.in_edges.append([])
        self.out_edges.append([])
        self.index[cc.canon_form] = len(self.regions) - 1
        return len(self.regions) - 1

    def add_edge(self, parent: int, child: int, mapping: Mapping) -> int:
        child_atoms = self.regions[child].atoms
        inverse = {b: a for a, b in mapping.items()}
        sigma = tuple((inverse[c], c) for c in child_atoms)
        alpha_objs = self.regions[parent].objects()
        beta_objs = _objects_by_domain([a for a, _ in sigma], self.arg_domains)
        counts = tuple(
            (d, len(beta_objs.get(d, ())), len(alpha_objs[d] - beta_objs.get(d, frozenset())))
            for d in sorted(alpha_objs))
        edge = LiftedEdge(parent, child, sigma, counts)
        self.edges.append(edge)
        k = len(self.edges) - 1
        self.in_edges[child].append(k)
        self.out_edges[parent].append(k)
        return k

    def lookup(self, cluster: Sequence[GroundAtom]):
        """Region id of ``cluster``'s class and one atom map canonical -> cluster."""
        cc, mapping = canonize(build_csg(cluster, self.arg_domains))
        if cc.canon_form not in self.index:
            raise KeyError(f"no lifted region for {sorted(map(str, cluster))}")
        inverse = {v: k for k, v in mapping.items()}
        atom_map = atom_map_from_nodes(cc.atoms, inverse, self.arg_domains)
        return self.index[cc.canon_form], atom_map

    def isomorphisms_to(self, region: int, cluster: Sequence[GroundAtom]) -> list:
        """Every atom map from canonical region ``region`` onto ``cluster``, sorted."""
        src = self.regions[region]
        maps = []
        seen = set()
        for iso in enumerate_isomorphisms(src.csg, build_csg(cluster, self.arg_domains)):
            m = atom_map_from_nodes(src.atoms, iso, self.arg_domains)
            key = _serialize_map(m)
            if key not in seen:
                seen.add(key)
                maps.append((key, m))
        return [m for _, m in sorted(maps, key=lambda km: km[0])]

    def max_objects(self) -> dict:
        out: dict = {}
        for r in self.regions:
            for d, objs in r.objects().items():
                out[d] = max(out.get(d, 0), len(objs))
        return out

    # -- export -------------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "regions": [
                {"id": i, "atoms": [str(a) for a in r.atoms], "canonForm": r.canon_form,
                 "factorTable": r.factors.natural().reshape(-1).tolist()}
                for i, r in enumerate(self.regions)
            ],
            "edges": [
                {"id": k, "parent": e.parent, "child": e.child,
                 "sigma": [[str(a), str(b)] for a, b in e.sigma],
                 "kappa": kappa_symbolic(e),
                 "kappaCounts": [list(c) for c in e.kappa_counts]}
                for k, e in enumerate(self.edges)
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def to_dot(self, name: str = "lifted_region_graph") -> str:
        lines = [f"digraph {name} {{"]
        for i, r in enumerate(self.regions):
            label = ", ".join(str(a) for a in r.atoms)
            lines.append(f'  r{i} [label="{{{label}}}"];')
        for e in self.edges:
            sig = ", ".join(f"{a}->{b}" for a, b in e.sigma)
            lines.append(f'  r{e.parent} -> r{e.child} [label="{sig}\\nk={kappa_symbolic(e)}"];')
        lines.append("}")
        return "\n".join(lines)


def region_factor(model: ParfactorModel, atoms: Sequence[GroundAtom]) -> FactorTable:
    """Log product of every ground factor whose scope lies inside ``atoms``.

    Only substitutions into the region's own objects can qualify, so the work
    does not depend on domain sizes.
    """
    atoms = tuple(atoms)
    atom_set = set(atoms)
    ranges = model.ranges()
    objs = _objects_by_domain(atoms, model.arg_domains())
    pools = {d: sorted(s) for d, s in objs.items()}
    acc = FactorTable.ones(atoms, [ranges[a.predicate] for a in atoms])
    for pf in model.parfactors:
        doms = model.lvar_domains(pf)
        if any(d not in pools for d in doms.values()):
            continue
        shape = tuple(ranges[a.predicate] for a in pf.atoms)
        for theta in injective_substitutions(doms, {}, pools):
            scope = [a.substitute(theta) for a in pf.atoms]
            if all(s in atom_set for s in scope):
                acc = acc.multiply(FactorTable.from_natural(scope, shape, pf.values))
    return acc


def canonical_outer_regions(model: ParfactorModel) -> list:
    """Atom sets of the canonical outer regions, one per distinct parfactor class.

    Each lvar is replaced by its position among the lvars of its domain, which
    is a valid grounding because shattered parfactors are all-distinct.
    """
    if not model.is_shattered():
        raise ModelError("canonical outer regions need a shattered model")
    arg_domains = model.arg_domains()
    seen = {}
    for pf in model.parfactors:
        doms = model.lvar_domains(pf)
        counters: dict = defaultdict(int)
        theta = {}
        for v in pf.lvars():
            counters[doms[v]] += 1
            theta[v] = counters[doms[v]]
        cluster = [a.substitute(theta) for a in pf.atoms]
        cc, _ = canonize(build_csg(cluster, arg_domains))
        seen.setdefault(cc.canon_form, cc.atoms)
    return list(seen.values())


def filter_redundant_mappings(alpha_csg: Csg, candidates: list, arg_domains: Mapping | None) -> list:
    """Keep one candidate per orbit of the parent's automorphism group.

    ``candidates`` are ``(beta, mapping)`` pairs with ``beta`` a tuple of parent
    atoms and ``mapping`` an atom map from ``beta`` onto a common canonical
    child. Candidates are scanned in order of their serialized mapping, so the
    survivor of each orbit is the lexicographically smallest.
    """
    ordered = sorted(candidates, key=lambda c: _serialize_map(c[1]))
    kept = []
    for beta, m in ordered:
        if not any(_related(alpha_csg, (beta, m), k, arg_domains) for k in kept):
            kept.append((beta, m))
    return kept


def _related(alpha_csg: Csg, c1, c2, arg_domains) -> bool:
    (beta1, m1), (_, m2) = c1, c2
    inv2 = {b: a for a, b in m2.items()}
    partial: dict = {}
    for a in beta1:
        target = inv2[m1[a]]
        doms = arg_domains[a.predicate] if arg_domains is not None else ("",) * len(a.objects)
        for d, src, dst in zip(doms, a.objects, target.objects):
            if partial.setdefault((d, src), (d, dst)) != (d, dst):
                return False
    return extends_to_automorphism(alpha_csg, partial)


def generate_lifted_region_graph(model: ParfactorModel, outer: Sequence | None = None) -> LiftedRegionGraph:
    """Build the lifted region graph of a shattered model.

    ``outer`` defaults to :func:`canonical_outer_regions`.
    """
    if outer is None:
        outer = canonical_outer_regions(model)
    g = LiftedRegionGraph(model)
    for atoms in outer:
        g.add_region(atoms)
    if not g.regions:
        return g
    d_max = max(len(r.atoms) for r in g.regions)
    for d in range(d_max, 1, -1):
        layer = [i for i, r in enumerate(g.regions) if len(r.atoms) == d]
        for ai in layer:
            alpha = g.regions[ai]
            by_child: dict = defaultdict(list)
            for drop in range(d):
                beta = alpha.atoms[:drop] + alpha.atoms[drop + 1:]
                child = g.add_region(beta)
                seen = set()
                for iso in enumerate_isomorphisms(build_csg(beta, g.arg_domains), g.regions[child].csg):
                    m = atom_map_from_nodes(beta, iso, g.arg_domains)
                    key = _serialize_map(m)
                    if key not in seen:
                        seen.add(key)
                        by_child[child].append((beta, m))
            for child in sorted(by_child):
                for _, m in filter_redundant_mappings(alpha.csg, by_child[child], g.arg_domains):
                    g.add_edge(ai, child, m)
    return g


def build_lifted_region_graph(model: ParfactorModel) -> LiftedRegionGraph:
    """Shatter if needed, then generate."""
    if not model.is_shattered():
        model = shatter(model)
    return generate_lifted_region_graph(model)
