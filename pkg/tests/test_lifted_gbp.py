import numpy as np
import pytest
from helpers import BENCHMARKS, ground_graph, lifted_graph, min_size

import liftedgbp.lifted_gbp as lg_mod
from liftedgbp.compare import region_alignment, run_lockstep
from liftedgbp.errors import NegativeExponent, NoContainingRegion
from liftedgbp.exact import exact_marginal
from liftedgbp.ground_gbp import GroundGBP
from liftedgbp.lifted_gbp import (
    LiftedGBP,
    RunConfig,
    lifted_belief,
    lifted_message_update,
    query_marginal,
    run_lifted_gbp,
)
from liftedgbp.lifted_graph import build_lifted_region_graph
from liftedgbp.model import GroundAtom as A
from liftedgbp.model import ground, parse_model, shatter


def advance(engine, msgs, t):
    for _ in range(t):
        msgs, _, _ = engine.step(msgs, 0.5)
    return msgs


def test_zero_iterations_give_factor_products():
    g = lifted_graph("friends_smokers")
    res = run_lifted_gbp(g, RunConfig(4, iterations=0))
    for b, r in zip(res.beliefs, g.regions):
        assert b.max_abs_diff(r.factors.normalize()) < 1e-12


@pytest.mark.parametrize("name, n, t", [("pq", 4, 1), ("friends_smokers", 3, 10)])
def test_beliefs_equal_ground_beliefs(name, n, t):
    lifted, graph = lifted_graph(name), ground_graph(name, n)
    ge, le = GroundGBP(graph), LiftedGBP(lifted, n)
    gm, lm = advance(ge, ge.initial_messages(), t), advance(le, le.initial_messages(), t)
    gb, lb = ge.beliefs(gm), le.beliefs(lm)
    for g, (cid, perm) in zip(gb, region_alignment(graph, lifted)):
        assert np.max(np.abs(g - lb[cid].transpose(perm))) < 1e-12


def test_pq_messages_equal_ground_messages():
    lifted, graph = lifted_graph("pq"), ground_graph("pq", 4)
    ge, le = GroundGBP(graph), LiftedGBP(lifted, 4)
    gm, lm = advance(ge, ge.initial_messages(), 1), advance(le, le.initial_messages(), 1)
    for k, e in enumerate(lifted.edges):
        # the ground parent {p(1), q(2)} and its child holding the role of e
        parent = graph.find(lifted.regions[e.parent].atoms)
        child = graph.find(e.subset)
        m = gm[graph.edge_index[(parent, child)]]
        assert np.max(np.abs(m - lm[k])) < 1e-12


def test_fixed_point_and_undamped_update():
    g = lifted_graph("friends_knows")
    engine = LiftedGBP(g, 4)
    res = run_lifted_gbp(g, RunConfig(4), engine=engine)
    assert res.converged
    for k in range(len(g.edges)):
        upd = lifted_message_update(engine, res.messages, k, 0.5)
        assert np.max(np.abs(upd.table - res.messages[k])) < 1e-8

    msgs = engine.initial_messages()
    e = g.edges[0]
    new = lifted_message_update(engine, msgs, 0, 1.0)
    parent = lifted_belief(engine, msgs, e.parent).marginalize_sum(e.subset).rename(e.sigma_map())
    child = lifted_belief(engine, msgs, e.child)
    ratio = parent.divide(child).normalize()
    assert new.max_abs_diff(ratio) < 1e-12


@pytest.mark.parametrize("name", BENCHMARKS)
def test_lockstep_short(name):
    lifted = lifted_graph(name)
    n = min_size(lifted)
    res = run_lockstep(ground_graph(name, n), lifted, n, iters=15, damping=0.5)
    assert res.max_discrepancy < 1e-9


def test_query_symmetry_and_errors():
    g = lifted_graph("friends_smokers")
    res = run_lifted_gbp(g, RunConfig(5))
    a = query_marginal(res.beliefs, g, A("smokes", (3,)))
    b = query_marginal(res.beliefs, g, A("smokes", (1,)))
    assert np.array_equal(a.table, b.table)
    fr = query_marginal(res.beliefs, g, "friends")
    assert fr.scope == (A("friends", (1, 2)),) and fr.natural().sum() == pytest.approx(1.0)
    with pytest.raises(NoContainingRegion):
        query_marginal(res.beliefs, g, "enemies")


STAR = """
domain d = 4
predicate p(d)
predicate q(d, d)
parfactor p(X), q(X, Y) where X != Y values [2.0, 0.5, 1.0, 3.0]
parfactor p(X) values [1.0, 1.5]
"""


def test_acyclic_relational_model_matches_enumeration():
    model = shatter(parse_model(STAR))
    lifted = build_lifted_region_graph(model)
    res = run_lifted_gbp(lifted, RunConfig(4))
    assert res.converged
    mrf = ground(model)
    for atom in (A("p", (2,)), A("q", (3, 1))):
        want = exact_marginal(mrf, [atom]).natural()
        assert query_marginal(res.beliefs, lifted, atom).natural() == pytest.approx(want, abs=1e-6)


def test_negative_exponent_is_reported(monkeypatch):
    g = lifted_graph("pq")
    real = lg_mod.local_par_counts

    def inflated(alpha, lifted, local=None):
        t = real(alpha, lifted, local)
        t.counts = {key: c + 100 for key, c in t.counts.items()}
        return t

    monkeypatch.setattr(lg_mod, "local_par_counts", inflated)
    with pytest.raises(NegativeExponent):
        LiftedGBP(g, 4)


@pytest.mark.parametrize("name", BENCHMARKS)
def test_operation_counts_ignore_domain_size(name):
    g = lifted_graph(name)
    counts = {n: run_lifted_gbp(g, RunConfig(n, iterations=5, tolerance=1e-300)).op_counts for n in (6, 60, 600)}
    assert counts[6] == counts[60] == counts[600]


def test_parallel_edges_carry_their_own_messages():
    text = ("domain d = 5\npredicate r(d, d)\n"
            "parfactor r(X, Y), r(Y, Z), r(Z, W) where X != Y, X != Z, X != W, Y != Z, Y != W, Z != W "
            "values [1, 2, 3, 4, 5, 6, 7, 8]\n")
    g = build_lifted_region_graph(parse_model(text))
    res = run_lifted_gbp(g, RunConfig(5, iterations=3))
    assert len(res.messages) == len(g.edges)
    pairs = {}
    for k, e in enumerate(g.edges):
        pairs.setdefault((e.parent, e.child), []).append(k)
    parallel = [ks for ks in pairs.values() if len(ks) > 1]
    assert parallel
    assert any(not np.allclose(res.messages[a], res.messages[b]) for a, b in parallel)


def test_beliefs_stay_normalized_and_threads_agree():
    g = lifted_graph("transitive")
    a = run_lifted_gbp(g, RunConfig(5, iterations=30))
    b = run_lifted_gbp(g, RunConfig(5, iterations=30), threads=3)
    for x, y in zip(a.beliefs, b.beliefs):
        assert abs(x.log_partition()) < 1e-10
        assert np.array_equal(x.table, y.table)


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(5, damping=0.0)
    with pytest.raises(ValueError):
        RunConfig(5, iterations=-1)
    with pytest.raises(ValueError):
        RunConfig(5, tolerance=0.0)
