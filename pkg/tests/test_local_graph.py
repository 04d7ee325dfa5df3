import random

import numpy as np
import pytest
from helpers import BENCHMARKS, ground_graph, ground_parent_classes, lifted_graph, min_size

from liftedgbp.lifted_gbp import LiftedGBP
from liftedgbp.lifted_graph import kappa
from liftedgbp.local_graph import build_local_graph, local_par_counts


def region_with(lifted, predicates):
    return next(i for i, r in enumerate(lifted.regions) if sorted(a.predicate for a in r.atoms) == predicates)


def test_pq_local_graph():
    g = lifted_graph("pq")
    alpha = region_with(g, ["p", "q"])
    local = build_local_graph(alpha, g)
    assert len(local.nodes) == 3 and len(local.edges) == 2
    table = local_par_counts(alpha, g, local)
    p_node = next(i for i, n in enumerate(local.nodes) if len(n) == 1 and n[0].predicate == "p")
    (k,) = [k for (node, k) in table.counts if node == p_node]
    assert g.edges[k].subset[0].predicate == "p"
    assert table.counts[(p_node, k)] == 1
    assert kappa(g.edges[k], 4) - table.counts[(p_node, k)] == 2


def test_singleton_has_empty_table():
    g = lifted_graph("pq")
    single = region_with(g, ["p"])
    table = local_par_counts(single, g)
    assert table.local.edges == [] and table.counts == {}


def test_chain_local_graph():
    g = lifted_graph("chain")
    alpha = region_with(g, ["r", "r", "r"])
    local = build_local_graph(alpha, g)
    assert len(local.nodes) == 7 and len(local.edges) == 9
    pairs = [i for i, n in enumerate(local.nodes) if len(n) == 2]
    linked = [i for i in pairs if len({o for a in local.nodes[i] for o in a.objects}) == 3]
    assert len(linked) == 2
    used = {local.assoc[(0, i)] for i in linked}
    assert len(used) == 2


@pytest.mark.parametrize("name", BENCHMARKS)
def test_exponents_match_ground_external_parents(name):
    lifted = lifted_graph(name)
    n = min_size(lifted) + 1
    g = ground_graph(name, n)
    for aid, region in enumerate(lifted.regions):
        table = local_par_counts(aid, lifted)
        local = table.local
        inside = set(region.atoms)
        for node in range(1, len(local.nodes)):
            classes = ground_parent_classes(lifted, g, local.nodes[node], local.mu[node])
            for k in lifted.in_edges[local.node_class[node]]:
                outside = sum(ks == [k] for p, ks in classes.items() if not set(g.scope(p)) <= inside)
                assert kappa(lifted.edges[k], n) - table.counts.get((node, k), 0) == outside


def count_profile(table, lifted):
    """Per local node, the multiset of (parent class, count) over its lifted in-edges.

    Another choice of mu may swap parallel edges that an automorphism of the
    child class exchanges, so edge ids themselves are not invariant.
    """
    out = {}
    for node in range(1, len(table.local.nodes)):
        cls = table.local.node_class[node]
        out[node] = sorted((lifted.edges[k].parent, table.counts.get((node, k), 0)) for k in lifted.in_edges[cls])
    return out


@pytest.mark.parametrize("name", BENCHMARKS)
def test_counts_do_not_depend_on_mu(name):
    lifted = lifted_graph(name)
    rng = random.Random(3)
    for aid in range(len(lifted.regions)):
        base = count_profile(local_par_counts(aid, lifted), lifted)
        for chooser in (lambda maps: maps[-1], lambda maps: rng.choice(maps)):
            local = build_local_graph(aid, lifted, chooser)
            assert count_profile(local_par_counts(aid, lifted, local), lifted) == base


@pytest.mark.parametrize("name", ["friends_smokers", "transitive", "chain"])
def test_beliefs_do_not_depend_on_mu(name):
    lifted = lifted_graph(name)
    n = min_size(lifted) + 1
    a, b = LiftedGBP(lifted, n), LiftedGBP(lifted, n, choose_mu=lambda maps: maps[-1])
    ma, mb = a.initial_messages(), b.initial_messages()
    for _ in range(10):
        ma, ba, _ = a.step(ma, 0.5)
        mb, bb, _ = b.step(mb, 0.5)
        for x, y in zip(ba, bb):
            assert np.max(np.abs(x - y)) < 1e-12


def test_local_par_json():
    g = lifted_graph("pq")
    d = local_par_counts(0, g).to_dict()
    assert d["region"] == 0 and all(e["count"] >= 0 for e in d["entries"])
