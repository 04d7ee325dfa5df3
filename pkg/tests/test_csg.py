import itertools
import random

from liftedgbp.csg import (
    automorphisms,
    build_csg,
    canonize,
    enumerate_isomorphisms,
    extends_to_automorphism,
    is_isomorphic,
)
from liftedgbp.model import GroundAtom as A


def test_unary_atom_is_a_self_loop():
    g = build_csg([A("sm", (1,))])
    assert g.nodes == (("", 1),)
    assert g.edges == ((("", 1), ("", 1), "sm"),)


def test_chain_is_a_directed_path():
    g = build_csg([A("r", (1, 2)), A("r", (2, 3)), A("r", (3, 4))])
    assert len(g.nodes) == 4
    assert [(s[1], t[1]) for s, t, _ in g.edges] == [(1, 2), (2, 3), (3, 4)]


def test_friends_smokers_triple():
    g = build_csg([A("sm", (1,)), A("sm", (2,)), A("fr", (1, 2))])
    colors = sorted(c for *_, c in g.edges)
    assert len(g.nodes) == 2 and colors == ["fr", "sm", "sm"]


def form(atoms):
    return canonize(build_csg(atoms))[0].canon_form


def test_canon_form_ignores_object_names():
    assert form([A("p", (1,)), A("q", (2,))]) == form([A("p", (7,)), A("q", (3,))])
    assert form([A("r", (1, 2))]) == form([A("r", (2, 1))])


def test_out_fork_differs_from_in_fork():
    assert form([A("r", (1, 2)), A("r", (1, 3))]) != form([A("r", (1, 2)), A("r", (3, 2))])


def test_automorphism_counts():
    assert len(automorphisms(build_csg([A("p", (1,)), A("p", (2,))]))) == 2
    assert len(automorphisms(build_csg([A("r", (1, 2)), A("r", (2, 3))]))) == 1


def test_colors_pin_the_isomorphism():
    isos = enumerate_isomorphisms(build_csg([A("p", (1,)), A("q", (2,))]),
                                  build_csg([A("p", (5,)), A("q", (9,))]))
    assert isos == [{("", 1): ("", 5), ("", 2): ("", 9)}]


def test_extends_to_automorphism():
    pp = build_csg([A("p", (1,)), A("p", (2,))])
    path = build_csg([A("r", (1, 2)), A("r", (2, 3))])
    assert extends_to_automorphism(path, {})
    assert extends_to_automorphism(pp, {("", 1): ("", 2)})
    assert not extends_to_automorphism(path, {("", 1): ("", 3)})


def test_domains_are_never_mixed():
    sig = {"p": ("a",), "q": ("b",)}
    g1 = build_csg([A("p", (1,)), A("q", (1,))], sig)
    assert len(g1.nodes) == 2
    cc, mapping = canonize(g1)
    assert {d for d, _ in mapping.values()} == {"a", "b"}


def random_cluster(rng, n_obj=4, n_atoms=4):
    atoms = set()
    while len(atoms) < n_atoms:
        if rng.random() < 0.3:
            atoms.add(A(rng.choice("pq"), (rng.randint(1, n_obj),)))
        else:
            i, j = rng.sample(range(1, n_obj + 1), 2)
            atoms.add(A(rng.choice("rs"), (i, j)))
    return sorted(atoms)


def brute_isomorphic(c1, c2):
    o1 = sorted({o for a in c1 for o in a.objects})
    o2 = sorted({o for a in c2 for o in a.objects})
    if len(o1) != len(o2):
        return False
    target = set(c2)
    for perm in itertools.permutations(o2):
        m = dict(zip(o1, perm))
        if {A(a.predicate, tuple(m[o] for o in a.objects)) for a in c1} == target:
            return True
    return False


def test_canon_form_agrees_with_brute_force_isomorphism():
    rng = random.Random(11)
    clusters = [random_cluster(rng) for _ in range(60)]
    for c1, c2 in itertools.combinations(clusters[:40], 2):
        same = form(c1) == form(c2)
        assert same == brute_isomorphic(c1, c2)
        assert same == is_isomorphic(build_csg(c1), build_csg(c2))


def test_canonical_mapping_is_sound_and_deterministic():
    rng = random.Random(5)
    for _ in range(30):
        c = random_cluster(rng)
        shuffle = list(range(1, 5))
        rng.shuffle(shuffle)
        renamed = [A(a.predicate, tuple(shuffle[o - 1] for o in a.objects)) for a in c]
        (k1, m1), (k2, m2) = canonize(build_csg(c)), canonize(build_csg(renamed))
        assert k1 == k2
        assert canonize(build_csg(c)) == (k1, m1)
        # composing the canonical maps carries c onto renamed
        back = {v: k for k, v in m2.items()}
        image = {A(a.predicate, tuple(back[m1[("", o)]][1] for o in a.objects)) for a in c}
        assert image == set(renamed)


def test_identity_is_always_an_automorphism():
    rng = random.Random(2)
    for _ in range(20):
        g = build_csg(random_cluster(rng))
        assert {n: n for n in g.nodes} in automorphisms(g)
