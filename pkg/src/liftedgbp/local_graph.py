"""Local graphs of canonical regions.

The local graph of a canonical region ``alpha`` has every non-empty subset of
``alpha`` as a node and links each subset to those one atom smaller, i.e. it is
the slice of the ground region graph below one ground copy of ``alpha``.

For the lifted belief of ``alpha`` we need, for every proper subset ``gamma``
and every lifted edge ``e`` into ``gamma``'s class, how many of ``gamma``'s
local parents reach it through ``e``. A local parent ``lam`` is matched to
``e`` by comparing tagged signature graphs: atoms of ``gamma`` are colored with
their position in the canonical class (pulled through a fixed isomorphism
``mu``), and the parent region of ``e`` is colored through ``sigma(e)``. The
two tagged graphs are isomorphic exactly when some object permutation maps the
edge's parent onto ``lam`` while agreeing with ``mu`` on ``gamma``.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from .csg import build_csg, canonize
from .errors import NoAssociation
from .lifted_graph import LiftedRegionGraph

MuChooser = Callable[[list], dict]


def _first(maps: list) -> dict:
    return maps[0]


@dataclass
class LocalGraph:
    root: int
    nodes: list  # atom tuples; nodes[0] is the root
    edges: list  # (parent node, child node)
    node_class: list  # lifted region id per node
    mu: list  # per node: atom map canonical class -> node atoms
    assoc: dict = field(default_factory=dict)  # local edge -> lifted edge id

    def parents_of(self, node: int) -> list:
        return [p for p, c in self.edges if c == node]


@dataclass
class LocalParTable:
    root: int
    local: LocalGraph
    counts: dict  # (node, lifted edge id) -> number of local parents

    def to_dict(self, lifted: LiftedRegionGraph | None = None) -> dict:
        rows = []
        for (node, k), n in sorted(self.counts.items()):
            rows.append({"region": self.root, "subset": [str(a) for a in self.local.nodes[node]],
                         "liftedEdge": k, "count": n})
        return {"region": self.root, "entries": rows}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def build_local_graph(alpha: int, lifted: LiftedRegionGraph, choose_mu: MuChooser = _first) -> LocalGraph:
    """Local graph of lifted region ``alpha`` with all edge associations.

    ``choose_mu`` picks the isomorphism canonical class -> subset from the
    sorted list of candidates (default: the lexicographically smallest).
    """
    atoms = lifted.regions[alpha].atoms
    nodes = []
    for k in range(len(atoms), 0, -1):
        nodes.extend(itertools.combinations(atoms, k))
    index = {frozenset(n): i for i, n in enumerate(nodes)}
    edges = []
    for i, n in enumerate(nodes):
        if len(n) > 1:
            for drop in range(len(n)):
                edges.append((i, index[frozenset(n[:drop] + n[drop + 1:])]))
    node_class, mu = [], []
    for n in nodes:
        cid, _ = lifted.lookup(n)
        node_class.append(cid)
        mu.append(choose_mu(lifted.isomorphisms_to(cid, n)))
    local = LocalGraph(alpha, nodes, edges, node_class, mu)
    for gamma in range(1, len(nodes)):
        for parent, k in associate_edges(alpha, local, lifted, gamma).items():
            local.assoc[(parent, gamma)] = k
    return local


def _tagged_form(cluster, tags: dict, arg_domains) -> str:
    def color(a):
        return f"{a.predicate}={tags[a]}" if a in tags else a.predicate

    cc, _ = canonize(build_csg(cluster, arg_domains, color_of=color))
    return cc.canon_form


def associate_edges(alpha: int, local: LocalGraph, lifted: LiftedRegionGraph, gamma: int) -> dict:
    """Map each local parent of node ``gamma`` to the lifted edge it realizes.

    Raises:
        NoAssociation: a local parent matches zero or several lifted edges.
    """
    cls = local.node_class[gamma]
    canon_atoms = lifted.regions[cls].atoms
    mu = local.mu[gamma]
    tag_of_canon = {c: i + 1 for i, c in enumerate(canon_atoms)}
    local_tags = {mu[c]: tag_of_canon[c] for c in canon_atoms}
    by_form: dict = {}
    for k in lifted.in_edges[cls]:
        e = lifted.edges[k]
        tags = {a: tag_of_canon[c] for a, c in e.sigma}
        form = _tagged_form(lifted.regions[e.parent].atoms, tags, lifted.arg_domains)
        by_form.setdefault(form, []).append(k)
    out = {}
    for parent in local.parents_of(gamma):
        form = _tagged_form(local.nodes[parent], local_tags, lifted.arg_domains)
        hits = by_form.get(form, [])
        if len(hits) != 1:
            raise NoAssociation(
                f"local parent {[str(a) for a in local.nodes[parent]]} of "
                f"{[str(a) for a in local.nodes[gamma]]} matches {len(hits)} lifted edges")
        out[parent] = hits[0]
    return out


def local_par_counts(alpha: int, lifted: LiftedRegionGraph, local: LocalGraph | None = None) -> LocalParTable:
    """Count, per proper subset and lifted in-edge, the local parents using that edge."""
    local = local or build_local_graph(alpha, lifted)
    counts: Counter = Counter()
    for (parent, child), k in local.assoc.items():
        counts[(child, k)] += 1
    return LocalParTable(alpha, local, dict(counts))
