import itertools

import numpy as np
import pytest

from cmlab.errors import EnumerationBoundError, UnsupportedRepresentationError
from cmlab.rootsys import (CouplingSpec, check_w_invariant_orbit, invariant_pairing,
                           invariant_pairing_dimension, named_rep, root_system, weyl_act,
                           weyl_group_order)

CATALOG = [("A", 1), ("A", 2), ("A", 3), ("B", 2), ("B", 3), ("C", 2), ("C", 3), ("D", 3),
           ("D", 4), ("G2", 2), ("BC", 2)]
N_ROOTS = {("A", 1): 2, ("A", 2): 6, ("A", 3): 12, ("B", 2): 8, ("B", 3): 18, ("C", 2): 8,
           ("C", 3): 18, ("D", 3): 12, ("D", 4): 24, ("G2", 2): 12, ("BC", 2): 12}


@pytest.fixture(params=CATALOG, ids=lambda k: f"{k[0]}{k[1]}")
def rs(request):
    return root_system(*request.param)


def test_counts(rs):
    assert rs.n_roots == N_ROOTS[(rs.kind, rs.rank)]
    assert rs.roots.shape == (rs.n_roots, rs.rank)
    assert rs.action_matrix.shape == (rs.rank, rs.n_roots)


def test_closed_under_reflections(rs):
    keys = {tuple(np.round(a, 9)) for a in rs.roots}
    for a in range(rs.n_roots):
        S = rs.reflection_matrix(a)
        for b in rs.roots:
            assert tuple(np.round(S @ b, 9)) in keys


def test_involution(rs):
    assert np.allclose(rs.roots[rs.involution], -rs.roots)
    assert np.array_equal(rs.involution[rs.involution], np.arange(rs.n_roots))


def test_positive_first(rs):
    p = rs.n_positive
    assert np.allclose(rs.roots[p:], -rs.roots[:p])


def test_simple_roots_span(rs):
    S = rs.roots[rs.simple]
    assert len(rs.simple) == rs.rank
    assert np.linalg.matrix_rank(S) == rs.rank
    # every positive root is a nonnegative integer combination of simple roots
    coef = np.linalg.lstsq(S.T, rs.roots[: rs.n_positive].T, rcond=None)[0]
    assert np.allclose(coef, np.round(coef), atol=1e-9)
    if rs.kind != "BC":
        assert np.all(np.round(coef) >= 0)


def test_weyl_group(rs):
    if weyl_group_order(rs.kind, rs.rank) > 400:
        pytest.skip("large group")
    W = rs.weyl_group()
    assert len(W) == weyl_group_order(rs.kind, rs.rank)
    assert np.allclose(W[0], np.eye(rs.rank))
    for w in W[:10]:
        assert np.allclose(w @ w.T, np.eye(rs.rank))


def test_weyl_orders():
    assert [weyl_group_order(*k) for k in [("A", 2), ("B", 2), ("G2", 2), ("D", 4), ("BC", 2)]] == [6, 8, 12, 192, 8]


def test_enumeration_bound():
    with pytest.raises(EnumerationBoundError):
        root_system("B", 3).weyl_group(bound=10)


def test_length_classes(rs):
    names = {"A": ["root"], "D": ["root"], "B": ["short", "long"], "C": ["short", "long"],
             "G2": ["short", "long"], "BC": ["short", "middle", "long"]}
    assert list(rs.class_names) == names[rs.kind]
    for cls in rs.length_classes:
        orb = {tuple(np.round(v, 9)) for v in rs.weyl_orbit(rs.roots[cls[0]])}
        assert orb == {tuple(np.round(rs.roots[i], 9)) for i in cls}


def test_root_system_parsing():
    assert root_system("A:2") == root_system("A", 2)
    assert root_system("G2") == root_system("G2:2")
    with pytest.raises(ValueError):
        root_system("B")
    with pytest.raises(ValueError):
        root_system("E", 6)
    with pytest.raises(ValueError):
        root_system("D", 2)


def test_coupling_spec():
    rs = root_system("B", 2)
    c = CouplingSpec(rs, {"short": 0.5, "long": 2.0})
    assert np.allclose(c.m, [-0.25, -4.0])
    short = rs.length_classes[0]
    assert np.allclose(c.per_root[short], 0.5)
    with pytest.raises(ValueError):
        CouplingSpec(rs, [1.0])
    with pytest.raises(ValueError):
        CouplingSpec(rs, {"short": 1.0})


REPS = [("A", 2, "standard", 3), ("A", 3, "standard", 4), ("B", 2, "vector", 4), ("C", 2, "vector", 4),
        ("D", 3, "vector", 6), ("G2", 2, "short", 6), ("BC", 2, "vector", 4), ("B", 2, "long", 4),
        ("D", 4, "roots", 24)]


@pytest.mark.parametrize("kind,rank,name,N", REPS)
def test_representations(kind, rank, name, N):
    rs = root_system(kind, rank)
    rep = named_rep(rs, name)
    assert rep.N == N
    I = np.eye(N)
    for a, P in enumerate(rep.reflections):
        # permutation matrices squaring to one, implementing s_alpha
        assert np.allclose(P.sum(axis=0), 1) and np.allclose(P.sum(axis=1), 1)
        assert np.allclose(P @ P, I)
        S = rs.reflection_matrix(a)
        assert np.allclose(P @ rep.weights, rep.weights @ S.T)
    for (i, j), pairs in rep.shift_index.items():
        for a, n in pairs:
            assert np.allclose(rep.weights[i] - rep.weights[j], n * rs.roots[a])
    # completeness of the shift index
    for i, j in itertools.permutations(range(N), 2):
        d = rep.weights[i] - rep.weights[j]
        for a, alpha in enumerate(rs.roots):
            for n in (1, 2, 3):
                if np.allclose(d, n * alpha):
                    assert (a, n) in rep.shift_index[(i, j)]


def test_bc_double_shifts():
    rep = named_rep(root_system("BC", 2), "vector")
    assert rep.max_shift() == 2
    assert named_rep(root_system("B", 2), "vector").max_shift() == 2
    assert named_rep(root_system("A", 2), "standard").max_shift() == 1


def test_xi():
    rs = root_system("A", 2)
    rep = named_rep(rs, "standard")
    p = np.array([0.3, -0.7])
    assert abs(rep.xi(p).sum()) < 1e-15
    assert np.allclose(rep.xi(p), rep.weights @ p)


def test_overlapping_orbits_rejected():
    rs = root_system("A", 2)
    with pytest.raises(ValueError):
        named_rep(rs, [rs.roots[0], rs.roots[1]])


@pytest.mark.parametrize("kind,rank,dim", [("A", 2, 2), ("B", 2, 3), ("G2", 2, 3), ("BC", 2, 4), ("A", 3, 2)])
def test_invariant_pairing_dimension(kind, rank, dim):
    # one weight per root orbit plus one for h
    assert invariant_pairing_dimension(root_system(kind, rank)) == dim


def test_invariant_pairing_is_invariant():
    rs = root_system("B", 2)
    B = invariant_pairing(rs, {"short": 1.5, "long": -0.5}, delta=2.0)
    rng = np.random.default_rng(0)
    u = (rng.standard_normal(rs.n_roots), rng.standard_normal(2))
    v = (rng.standard_normal(rs.n_roots), rng.standard_normal(2))
    for w, perm in zip(rs.weyl_group(), rs.weyl_permutations()):
        assert abs(B(weyl_act(rs, w, perm, u), weyl_act(rs, w, perm, v)) - B(u, v)) < 1e-12
    bad = np.ones(rs.n_roots)
    bad[rs.length_classes[0][0]] = 2.0
    with pytest.raises(ValueError):
        invariant_pairing(rs, bad)


def test_obstruction_d4():
    rs = root_system("D", 4)
    r = check_w_invariant_orbit(rs, named_rep(rs, "roots"))
    assert r.character_trivial == {0: False}
    assert r.witness[0]["scalar"] == -1.0
    assert r.witness[0]["cycles"] == [(1, 6), (2, 5)]


@pytest.mark.parametrize("kind,rank,name", [("A", 2, "standard"), ("B", 2, "short"), ("B", 3, "short"),
                                            ("A", 2, "roots")])
def test_obstruction_trivial(kind, rank, name):
    rs = root_system(kind, rank)
    r = check_w_invariant_orbit(rs, named_rep(rs, name))
    assert r.character_trivial == {0: True}
    assert r.witness is None


def test_obstruction_b2_long():
    rs = root_system("B", 2)
    r = check_w_invariant_orbit(rs, named_rep(rs, "long"))
    assert r.character_trivial == {0: False}
    assert r.witness


def test_obstruction_splitting():
    assert check_w_invariant_orbit(root_system("B", 2), named_rep(root_system("B", 2), "short")).splits
    rc = root_system("C", 2)
    assert not check_w_invariant_orbit(rc, named_rep(rc, "short")).splits


def test_obstruction_unsupported():
    rs = root_system("G2", 2)
    with pytest.raises(UnsupportedRepresentationError):
        check_w_invariant_orbit(rs, named_rep(rs, "short"))
