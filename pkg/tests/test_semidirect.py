import numpy as np
import pytest
from scipy.linalg import expm

from cmlab.errors import RootSystemMismatchError
from cmlab.rootsys import root_system
from cmlab.semidirect import (GCoElement, GElement, GroupElement, bracket, coAd, coad, coad_matrix,
                              group_exp, orbit_dimension, pairing, random_element)

SYSTEMS = [("A", 2), ("A", 3), ("B", 2), ("B", 3), ("C", 2), ("D", 3), ("D", 4), ("G2", 2), ("BC", 2)]


@pytest.fixture(params=SYSTEMS, ids=lambda k: f"{k[0]}{k[1]}")
def rs(request):
    return root_system(*request.param)


def _matrix(rs, X):
    """Faithful matrix realization: torus acting diagonally on root lines, plus a translation part."""
    n = rs.n_roots
    M = np.zeros((n + 1, n + 1), dtype=complex)
    M[:n, :n] = np.diag(X.tau @ rs.action_matrix)
    M[:n, n] = X.gamma
    return M


def test_duality(rs):
    rng = np.random.default_rng(1)
    for _ in range(50):
        X, Y = random_element(rs, rng), random_element(rs, rng)
        xi = random_element(rs, rng, GCoElement)
        assert abs(pairing(rs, coad(rs, X, xi), Y) + pairing(rs, xi, bracket(rs, X, Y))) < 1e-12


def test_bracket_is_matrix_commutator(rs):
    # oracle: the bracket computed in the affine matrix realization
    rng = np.random.default_rng(2)
    X, Y = random_element(rs, rng), random_element(rs, rng)
    MX, MY = _matrix(rs, X), _matrix(rs, Y)
    C = MX @ MY - MY @ MX
    B = bracket(rs, X, Y)
    assert np.allclose(C, _matrix(rs, B), atol=1e-12)


def test_jacobi(rs):
    rng = np.random.default_rng(3)
    X, Y, Z = (random_element(rs, rng) for _ in range(3))
    J = (bracket(rs, X, bracket(rs, Y, Z)) + bracket(rs, Y, bracket(rs, Z, X))
         + bracket(rs, Z, bracket(rs, X, Y)))
    assert np.max(np.abs(J.as_vector())) < 1e-12


def test_group_exp_matches_expm(rs):
    rng = np.random.default_rng(4)
    X = random_element(rs, rng, scale=0.3)
    g = group_exp(rs, X)
    E = expm(_matrix(rs, X))
    n = rs.n_roots
    assert np.allclose(E[:n, n], g.D, atol=1e-12)
    assert np.allclose(np.diag(E[:n, :n]), np.exp(g.h @ rs.action_matrix), atol=1e-12)


def test_group_law(rs):
    rng = np.random.default_rng(5)
    a, b, c = (group_exp(rs, random_element(rs, rng, scale=0.3)) for _ in range(3))
    lhs, rhs = (a @ b) @ c, a @ (b @ c)
    assert np.allclose(lhs.D, rhs.D) and np.allclose(lhs.h, rhs.h)
    e = a @ a.inverse()
    assert np.allclose(e.D, 0, atol=1e-12) and np.allclose(e.h, 0)


def test_coAd_is_action(rs):
    rng = np.random.default_rng(6)
    a, b = (group_exp(rs, random_element(rs, rng, scale=0.3)) for _ in range(2))
    xi = random_element(rs, rng, GCoElement)
    lhs = coAd(rs, a @ b, xi)
    rhs = coAd(rs, a, coAd(rs, b, xi))
    assert np.allclose(lhs.as_vector(), rhs.as_vector(), atol=1e-11)


def test_coAd_differentiates_to_coad(rs):
    rng = np.random.default_rng(7)
    X = random_element(rs, rng)
    xi = random_element(rs, rng, GCoElement)
    want = coad(rs, X, xi).as_vector()
    errs = []
    for t in (1e-3, 5e-4):
        fd = (coAd(rs, group_exp(rs, t * X), xi).as_vector()
              - coAd(rs, group_exp(rs, -t * X), xi).as_vector()) / (2 * t)
        errs.append(np.max(np.abs(fd - want)))
    assert errs[1] < 1e-5 * np.max(np.abs(want))
    assert errs[1] < 0.3 * errs[0]


def test_coAd_preserves_pairing_with_Ad(rs):
    # <Ad*_g xi, Ad_g Y> = <xi, Y>, with Ad computed from the matrix realization
    rng = np.random.default_rng(8)
    g = group_exp(rs, random_element(rs, rng, scale=0.3))
    Xg = random_element(rs, rng, scale=0.3)
    g = group_exp(rs, Xg)
    Y = random_element(rs, rng)
    xi = random_element(rs, rng, GCoElement)
    E = expm(_matrix(rs, Xg))
    AdY = E @ _matrix(rs, Y) @ np.linalg.inv(E)
    n = rs.n_roots
    Yg = GElement(rs, AdY[:n, n], Y.tau)
    assert abs(pairing(rs, coAd(rs, g, xi), Yg) - pairing(rs, xi, Y)) < 1e-10


def test_orbit_dimension(rs):
    rng = np.random.default_rng(9)
    xi = random_element(rs, rng, GCoElement)
    assert orbit_dimension(rs, xi) == 2 * rs.rank
    zero = GCoElement(rs, np.zeros(rs.n_roots), rng.standard_normal(rs.rank))
    assert orbit_dimension(rs, zero) == 0
    dim, sv = orbit_dimension(rs, xi, return_singular_values=True)
    assert len(sv) == rs.n_roots + rs.rank


def test_coad_matrix_linear(rs):
    rng = np.random.default_rng(10)
    xi = random_element(rs, rng, GCoElement)
    X = random_element(rs, rng)
    assert np.allclose(coad_matrix(rs, xi) @ X.as_vector(), coad(rs, X, xi).as_vector())


def test_mismatch():
    a, b = root_system("A", 2), root_system("B", 2)
    rng = np.random.default_rng(0)
    with pytest.raises(RootSystemMismatchError):
        bracket(a, random_element(a, rng), random_element(b, rng))
    with pytest.raises(ValueError):
        GElement(a, np.zeros(3), np.zeros(2))


def test_group_identity():
    rs = root_system("G2", 2)
    e = GroupElement.identity(rs)
    g = group_exp(rs, random_element(rs, np.random.default_rng(0), scale=0.2))
    assert np.allclose((e @ g).D, g.D) and np.allclose((g @ e).h, g.h)


def test_pure_torus_cases():
    rs = root_system("B", 2)
    rng = np.random.default_rng(11)
    sig = rng.standard_normal(2)
    X = GElement(rs, np.zeros(rs.n_roots), sig)
    xi = random_element(rs, rng, GCoElement)
    out = coad(rs, X, xi)
    assert np.allclose(out.tau, 0)
    assert np.allclose(out.gamma, (sig @ rs.action_matrix) * xi.gamma)
    Y = random_element(rs, rng)
    torus_xi = GCoElement(rs, np.zeros(rs.n_roots), xi.tau)
    assert np.allclose(coad(rs, Y, torus_xi).as_vector(), 0)
    Z = GElement(rs, np.zeros(rs.n_roots), rng.standard_normal(2))
    assert np.allclose(bracket(rs, Z, Y).gamma, (Z.tau @ rs.action_matrix) * Y.gamma)
    assert np.allclose(bracket(rs, Y, Y).as_vector(), 0)


def test_identity_and_root_translations():
    rs = root_system("G2", 2)
    rng = np.random.default_rng(12)
    xi = random_element(rs, rng, GCoElement)
    e = GroupElement.identity(rs)
    assert np.allclose(coAd(rs, e, xi).as_vector(), xi.as_vector())
    g = GroupElement(rs, rng.standard_normal(rs.n_roots), np.zeros(2))
    assert np.allclose(coAd(rs, g, xi).gamma, xi.gamma)


def test_invariant_functions(rs):
    # Gamma_alpha Gamma_{-alpha} is unchanged by the coadjoint action
    rng = np.random.default_rng(13)
    xi = random_element(rs, rng, GCoElement)
    g = group_exp(rs, random_element(rs, rng, scale=0.4))
    out = coAd(rs, g, xi)
    F = lambda v: v.gamma * v.gamma[rs.involution]
    assert np.max(np.abs(F(out) - F(xi))) < 1e-10 * np.max(np.abs(F(xi)))


def test_a1_rank():
    rs = root_system("A", 1)
    xi = GCoElement(rs, np.array([0.7, 0.7]), np.array([0.3]))
    assert orbit_dimension(rs, xi) == 2


def test_pairing_nondegenerate(rs):
    d = rs.n_roots + rs.rank
    G = np.array([[pairing(rs, GElement.from_vector(rs, np.eye(d)[i]), GElement.from_vector(rs, np.eye(d)[j]))
                   for j in range(d)] for i in range(d)])
    assert np.linalg.matrix_rank(G) == d


def test_coAd_first_order():
    rs = root_system("A", 2)
    rng = np.random.default_rng(14)
    X, xi = random_element(rs, rng), random_element(rs, rng, GCoElement)
    want = coad(rs, X, xi).as_vector()
    err = [np.max(np.abs((coAd(rs, group_exp(rs, t * X), xi).as_vector() - xi.as_vector()) / t - want))
           for t in (1e-3, 5e-4)]
    assert np.log2(err[0] / err[1]) >= 0.99
