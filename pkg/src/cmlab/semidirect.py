"""The Lie algebra (+_alpha C_alpha) x| h, its group, and coadjoint actions.

Elements carry a root-line vector ``gamma`` (one complex number per root, in
the order of ``rs.roots``) and a Cartan vector ``tau``.  The torus acts on
the root line of alpha through the character alpha; root lines commute.

g and g* are identified through the pairing
``<(G, t), (G', t')> = sum_alpha G_alpha G'_{-alpha} + t . t'``, and the
coadjoint action is normalized so that ``<coad(X, xi), Y> = -<xi, [X, Y]>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RootSystemMismatchError
from .rootsys import RootSystem


@dataclass(frozen=True)
class GElement:
    """Element (gamma, tau) of the Lie algebra."""

    rs: RootSystem
    gamma: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=complex)
        t = np.asarray(self.tau, dtype=complex)
        if g.shape != (self.rs.n_roots,):
            raise ValueError(f"gamma must have one entry per root ({self.rs.n_roots})")
        if t.shape != (self.rs.rank,):
            raise ValueError(f"tau must have length {self.rs.rank}")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "tau", t)

    def as_vector(self):
        return np.concatenate([self.gamma, self.tau])

    @classmethod
    def from_vector(cls, rs, v):
        v = np.asarray(v)
        return cls(rs, v[: rs.n_roots], v[rs.n_roots:])

    def __add__(self, other):
        _same(self, other)
        return type(self)(self.rs, self.gamma + other.gamma, self.tau + other.tau)

    def __sub__(self, other):
        _same(self, other)
        return type(self)(self.rs, self.gamma - other.gamma, self.tau - other.tau)

    def __mul__(self, s):
        return type(self)(self.rs, s * self.gamma, s * self.tau)

    __rmul__ = __mul__


class GCoElement(GElement):
    """Element of g*, stored through the identification with g."""

    @property
    def gamma_star(self):
        return self.gamma

    @property
    def tau_star(self):
        return self.tau


@dataclass(frozen=True)
class GroupElement:
    """Group element (D, exp(h)); the product is (C, h)(C', h') = (C + e^h C', h + h')."""

    rs: RootSystem
    D: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "D", np.asarray(self.D, dtype=complex))
        object.__setattr__(self, "h", np.asarray(self.h, dtype=complex))

    def __matmul__(self, other):
        _same(self, other)
        return GroupElement(self.rs, self.D + np.exp(self.h @ self.rs.action_matrix) * other.D,
                            self.h + other.h)

    def inverse(self):
        return GroupElement(self.rs, -np.exp(-(self.h @ self.rs.action_matrix)) * self.D, -self.h)

    @classmethod
    def identity(cls, rs):
        return cls(rs, np.zeros(rs.n_roots), np.zeros(rs.rank))


def _same(a, b):
    if a.rs != b.rs:
        raise RootSystemMismatchError(f"elements live on different root systems: {a.rs} vs {b.rs}")


def pairing(rs, u: GElement, v: GElement):
    """The invariant pairing with unit weights on every root orbit and on h."""
    _same(u, v)
    return np.sum(u.gamma * v.gamma[rs.involution]) + u.tau @ v.tau


def bracket(rs, X: GElement, Y: GElement) -> GElement:
    """[X, Y] = ((tau^T A) o gamma' - (tau'^T A) o gamma, 0)."""
    _same(X, Y)
    A = rs.action_matrix
    g = (X.tau @ A) * Y.gamma - (Y.tau @ A) * X.gamma
    return GElement(rs, g, np.zeros(rs.rank))


def coad(rs, X: GElement, xi: GCoElement) -> GCoElement:
    """Infinitesimal coadjoint action of X = (Delta, sigma) on xi = (gamma', tau')."""
    _same(X, xi)
    A = rs.action_matrix
    g = (X.tau @ A) * xi.gamma
    t = A @ (X.gamma * xi.gamma[rs.involution])
    return GCoElement(rs, g, t)


def coAd(rs, g: GroupElement, xi: GCoElement) -> GCoElement:
    """Coadjoint action of a group element, the integrated form of :func:`coad`."""
    _same(g, xi)
    A = rs.action_matrix
    ha = g.h @ A
    gam = np.exp(ha) * xi.gamma
    tau = xi.tau + A @ (np.exp(-ha) * g.D * xi.gamma[rs.involution])
    return GCoElement(rs, gam, tau)


def group_exp(rs, X: GElement) -> GroupElement:
    """exp(X) in the group; the root part is (e^{sigma(alpha)} - 1)/sigma(alpha) * Delta."""
    a = X.tau @ rs.action_matrix
    small = np.abs(a) < 1e-8
    safe = np.where(small, 1.0, a)
    f = np.where(small, 1 + a / 2 + a * a / 6, np.expm1(safe) / safe)
    return GroupElement(rs, f * X.gamma, X.tau)


def coad_matrix(rs, xi: GCoElement):
    """Matrix of the linear map X -> coad(X, xi) on the basis (root lines, then h)."""
    n, r = rs.n_roots, rs.rank
    cols = []
    for k in range(n + r):
        e = np.zeros(n + r, dtype=complex)
        e[k] = 1.0
        cols.append(coad(rs, GElement.from_vector(rs, e), xi).as_vector())
    return np.array(cols).T


def orbit_dimension(rs, xi: GCoElement, rtol=1e-9, return_singular_values=False):
    """Dimension of the coadjoint orbit through xi, as a numerical rank."""
    sv = np.linalg.svd(coad_matrix(rs, xi), compute_uv=False)
    dim = 0 if sv.size == 0 or sv[0] == 0 else int(np.sum(sv > rtol * sv[0]))
    if return_singular_values:
        return dim, sv
    return dim


def random_element(rs, rng, cls=GElement, scale=1.0):
    """Random complex element, for property tests."""
    z = lambda k: scale * (rng.standard_normal(k) + 1j * rng.standard_normal(k))
    return cls(rs, z(rs.n_roots), z(rs.rank))
