"""Root systems, Weyl-group actions, weight representations and invariant pairings.

Weyl groups are never handled through presentations: an element is stored as
the permutation it induces on the root list together with its orthogonal
matrix, and everything downstream only needs orbit and stabilizer data.

Type A_r is realized in the sum-zero hyperplane of R^{r+1} and G_2 in the
sum-zero hyperplane of R^3; in both cases vectors are expressed in a fixed
orthonormal (Helmert) basis of the hyperplane so that ``x`` and ``p`` are
genuinely ``r``-dimensional.  ``RootSystem.basis`` maps ambient coordinates
to these.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from math import factorial
from typing import Mapping, Sequence

import numpy as np

from .errors import EnumerationBoundError, UnsupportedRepresentationError

KINDS = ("A", "B", "C", "D", "BC", "G2")
_ROUND = 9
CLASS_NAMES = {1: ("root",), 2: ("short", "long"), 3: ("short", "middle", "long")}


def helmert_basis(n):
    """Orthonormal basis (rows) of the sum-zero hyperplane in R^n, longest row first."""
    rows = []
    for k in range(n - 1, 0, -1):
        v = np.zeros(n)
        v[:k] = 1.0
        v[k] = -k
        rows.append(v / np.sqrt(k * (k + 1)))
    return np.array(rows)


def _key(v):
    return tuple(np.round(np.asarray(v, dtype=float), _ROUND) + 0.0)


def reflect(alpha, v):
    """Reflection of v in the hyperplane orthogonal to alpha."""
    alpha = np.asarray(alpha, dtype=float)
    v = np.asarray(v, dtype=float)
    return v - 2.0 * (v @ alpha) / (alpha @ alpha) * alpha


def _ambient_roots(kind, r):
    e = np.eye(r + 1 if kind == "A" else (3 if kind == "G2" else r))
    pos = []
    if kind == "A":
        pos = [e[i] - e[j] for i in range(r + 1) for j in range(i + 1, r + 1)]
    elif kind == "G2":
        pos = [e[0] - e[1], e[1] - e[2], e[0] - e[2],
               2 * e[0] - e[1] - e[2], -e[0] + 2 * e[1] - e[2], e[0] + e[1] - 2 * e[2]]
        pos = [v if v @ np.array([3.0, 2.0, 1.0]) > 0 else -v for v in pos]
    else:
        pairs = [(i, j) for i in range(r) for j in range(i + 1, r)]
        pos = [e[i] - e[j] for i, j in pairs] + [e[i] + e[j] for i, j in pairs]
        if kind in ("B", "BC"):
            pos += [e[i] for i in range(r)]
        if kind in ("C", "BC"):
            pos += [2 * e[i] for i in range(r)]
    pos = np.array(pos, dtype=float)
    return np.vstack([pos, -pos])


def weyl_group_order(kind, rank):
    """Classical order of the Weyl group."""
    if kind == "A":
        return factorial(rank + 1)
    if kind in ("B", "C", "BC"):
        return 2 ** rank * factorial(rank)
    if kind == "D":
        return 2 ** (rank - 1) * factorial(rank)
    return 12


class RootSystem:
    """A finite (possibly non-reduced) root system in r-dimensional space.

    Attributes
    ----------
    kind, rank : str, int
    roots : ndarray, shape (n_roots, rank)
        Positive roots first, followed by their negatives in the same order.
    action_matrix : ndarray, shape (rank, n_roots)
        ``A[i, a]`` is the ``i``-th component of root ``a``, so that
        ``tau @ A`` lists ``alpha(tau)`` for every root.
    involution : ndarray of int
        Index of ``-alpha`` for every root ``alpha``.
    length_classes : list of ndarray
        Root indices grouped into Weyl orbits, ordered by increasing length.
    class_of : ndarray of int
        Class index of each root.
    simple : ndarray of int
        Indices of the simple roots.
    """

    def __init__(self, kind: str, rank: int):
        kind = str(kind).upper()
        if kind not in KINDS:
            raise ValueError(f"unknown root system kind {kind!r}; expected one of {KINDS}")
        rank = int(rank)
        if rank < 1:
            raise ValueError("rank must be >= 1")
        if kind == "G2" and rank != 2:
            raise ValueError("G2 has rank 2 only")
        if kind == "D" and rank < 3:
            raise ValueError("D_n requires rank >= 3")
        self.kind = kind
        self.rank = rank
        amb = _ambient_roots(kind, rank)
        if kind in ("A", "G2"):
            self.basis = helmert_basis(amb.shape[1])
        else:
            self.basis = np.eye(rank)
        self.ambient_roots = amb
        self.roots = amb @ self.basis.T
        self.n_roots = len(self.roots)
        self.action_matrix = self.roots.T.copy()
        self.n_positive = self.n_roots // 2
        p = self.n_positive
        self.involution = np.concatenate([np.arange(p, 2 * p), np.arange(p)])
        self._index = {_key(a): i for i, a in enumerate(self.roots)}

        sq = np.round(np.sum(self.roots ** 2, axis=1), 8)
        lengths = sorted(set(sq))
        self.class_of = np.array([lengths.index(s) for s in sq])
        self.length_classes = [np.flatnonzero(self.class_of == k) for k in range(len(lengths))]
        self.class_names = CLASS_NAMES[len(lengths)]
        self.squared_lengths = np.array(lengths)

        pos = self.roots[:p]
        pos_keys = {_key(a) for a in pos}
        simple = []
        for i, a in enumerate(pos):
            decomposable = any(_key(a - b) in pos_keys for b in pos)
            if not decomposable:
                simple.append(i)
        self.simple = np.array(simple)
        self._simple_refl = [self.reflection_matrix(i) for i in self.simple]
        self._group = None

        for k, cls in enumerate(self.length_classes):
            orbit = {_key(v) for v in self.weyl_orbit(self.roots[cls[0]])}
            if orbit != {_key(self.roots[i]) for i in cls}:
                raise AssertionError(f"length class {k} of {kind}{rank} is not a single Weyl orbit")

    def __repr__(self):
        return f"RootSystem({self.kind!r}, {self.rank})"

    def __eq__(self, other):
        return isinstance(other, RootSystem) and (self.kind, self.rank) == (other.kind, other.rank)

    def __hash__(self):
        return hash((self.kind, self.rank))

    @property
    def label(self):
        return f"{self.kind}:{self.rank}"

    def root_index(self, v):
        """Index of the root equal to v; KeyError if v is not a root."""
        return self._index[_key(v)]

    def reflection_matrix(self, a):
        """Matrix of the reflection s_alpha for root index a."""
        alpha = self.roots[a]
        return np.eye(self.rank) - 2.0 * np.outer(alpha, alpha) / (alpha @ alpha)

    def permutation_of(self, w):
        """Permutation of root indices induced by the orthogonal matrix w."""
        return np.array([self.root_index(w @ a) for a in self.roots])

    def weyl_orbit(self, v):
        """Orbit of v under the Weyl group, in breadth-first order starting at v."""
        v = np.asarray(v, dtype=float)
        seen = {_key(v): v}
        queue = deque([v])
        while queue:
            u = queue.popleft()
            for s in self._simple_refl:
                t = s @ u
                k = _key(t)
                if k not in seen:
                    seen[k] = t
                    queue.append(t)
        return np.array(list(seen.values()))

    def weyl_group(self, bound=10 ** 6):
        """All Weyl group elements as orthogonal matrices (identity first).

        Elements are identified by the root permutation they induce.  Raises
        :class:`EnumerationBoundError` if the classical order exceeds ``bound``.
        """
        order = weyl_group_order(self.kind, self.rank)
        if order > bound:
            raise EnumerationBoundError(
                f"|W({self.kind}{self.rank})| = {order} exceeds enumeration bound {bound}")
        if self._group is None:
            ident = np.eye(self.rank)
            gens = [(s, self.permutation_of(s)) for s in self._simple_refl]
            start = tuple(range(self.n_roots))
            seen = {start: ident}
            queue = deque([(ident, np.arange(self.n_roots))])
            while queue:
                m, perm = queue.popleft()
                for s, sp in gens:
                    nperm = sp[perm]
                    k = tuple(nperm)
                    if k not in seen:
                        nm = s @ m
                        seen[k] = nm
                        queue.append((nm, nperm))
            self._group = (list(seen.values()), [np.array(k) for k in seen])
        return self._group[0]

    def weyl_permutations(self, bound=10 ** 6):
        """Root permutations matching :meth:`weyl_group` element by element."""
        self.weyl_group(bound)
        return self._group[1]


def root_system(kind, rank=None):
    """Build a root system from ``("A", 2)`` or the string form ``"A:2"`` (``"G2"`` alone also works)."""
    if rank is None:
        if str(kind).upper() == "G2":
            kind, rank = "G2", 2
        elif ":" not in str(kind):
            raise ValueError(f"root system {kind!r} needs a rank, e.g. 'B:3'")
        else:
            kind, rank = str(kind).split(":")
    return RootSystem(kind, int(rank))


class CouplingSpec:
    """Couplings c_|alpha| per Weyl orbit of roots, with m_|alpha| = -c_|alpha|^2.

    ``c`` may be a scalar (same for every class), a sequence indexed by class,
    or a mapping from class name (``"short"``, ``"long"``, ...) or index.
    """

    def __init__(self, rs: RootSystem, c):
        n = len(rs.length_classes)
        if isinstance(c, Mapping):
            vals = [None] * n
            for key, val in c.items():
                k = rs.class_names.index(key) if isinstance(key, str) else int(key)
                vals[k] = complex(val)
            if any(v is None for v in vals):
                raise ValueError(f"couplings missing for classes; expected {rs.class_names}")
        elif np.ndim(c) == 0:
            vals = [complex(c)] * n
        else:
            vals = [complex(v) for v in c]
            if len(vals) != n:
                raise ValueError(f"expected {n} couplings, got {len(vals)}")
        self.rs = rs
        self.c = np.array(vals)
        self.m = -self.c ** 2

    @property
    def per_root(self):
        """Coupling c_|alpha| for every root index."""
        return self.c[self.rs.class_of]

    def __repr__(self):
        return f"CouplingSpec({self.rs!r}, {dict(zip(self.rs.class_names, self.c))})"


@dataclass(frozen=True)
class Representation:
    """A Weyl-invariant set of weights with its reflection matrices and shifts.

    ``reflections[a]`` is the permutation matrix ``s_alpha`` of root ``a``:
    ``reflections[a][i, j] = 1`` iff ``weights[i] = s_alpha(weights[j])``.
    ``shift_index[(i, j)]`` lists the pairs ``(a, n)`` with
    ``weights[i] - weights[j] = n * roots[a]`` and ``n >= 1``.
    """

    rs: RootSystem
    weights: np.ndarray
    reflections: np.ndarray
    shift_index: dict
    name: str = "custom"
    orbit_sizes: tuple = field(default=())

    @property
    def N(self):
        return len(self.weights)

    def xi(self, tau):
        """Torus embedding: tau -> (w_1(tau), ..., w_N(tau))."""
        return self.weights @ np.asarray(tau)

    def weight_index(self, v):
        keys = [_key(w) for w in self.weights]
        return keys.index(_key(v))

    def max_shift(self):
        return max((n for pairs in self.shift_index.values() for _, n in pairs), default=0)


def weight_rep(rs: RootSystem, generating_weights: Sequence, name="custom"):
    """Representation on the union of Weyl orbits of the generating weights."""
    weights, sizes, seen = [], [], set()
    for g in generating_weights:
        orb = rs.weyl_orbit(np.asarray(g, dtype=float))
        keys = [_key(v) for v in orb]
        if seen.intersection(keys):
            raise ValueError("generated weights coincide: orbits overlap, basis is ambiguous")
        seen.update(keys)
        weights.extend(orb)
        sizes.append(len(orb))
    W = np.array(weights)
    N = len(W)
    index = {_key(w): i for i, w in enumerate(W)}
    refl = np.zeros((rs.n_roots, N, N))
    for a, alpha in enumerate(rs.roots):
        for j, w in enumerate(W):
            refl[a, index[_key(reflect(alpha, w))], j] = 1.0
    shifts = {}
    norms = np.sum(rs.roots ** 2, axis=1)
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            d = W[i] - W[j]
            pairs = []
            for a, alpha in enumerate(rs.roots):
                n = (d @ alpha) / norms[a]
                nr = np.round(n)
                if nr >= 1 and abs(n - nr) < 1e-9 and np.allclose(d, nr * alpha, atol=1e-9):
                    pairs.append((a, int(nr)))
            if pairs:
                shifts[(i, j)] = tuple(pairs)
    return Representation(rs, W, refl, shifts, name, tuple(sizes))


def named_rep(rs: RootSystem, name) -> Representation:
    """Catalog representations: standard, vector, roots, short, long, or explicit weights."""
    if not isinstance(name, str):
        return weight_rep(rs, [np.asarray(w, dtype=float) for w in name])
    key = name.lower()
    if key == "standard":
        if rs.kind != "A":
            return named_rep(rs, "vector")
        e0 = np.zeros(rs.rank + 1)
        e0[0] = 1.0
        return weight_rep(rs, [rs.basis @ e0], "standard")
    if key == "vector":
        if rs.kind == "A":
            return named_rep(rs, "standard")
        if rs.kind == "G2":
            return named_rep(rs, "short")
        e = np.zeros(rs.rank)
        e[0] = 1.0
        return weight_rep(rs, [e], "vector")
    if key in ("roots", "short", "long", "middle"):
        if key == "roots":
            gens = [rs.roots[cls[0]] for cls in rs.length_classes]
        else:
            if key not in rs.class_names:
                raise ValueError(f"{rs.label} has no {key!r} roots")
            gens = [rs.roots[rs.length_classes[rs.class_names.index(key)][0]]]
        return weight_rep(rs, gens, key)
    raise ValueError(f"unknown representation {name!r}")


class InvariantPairing:
    """The bilinear form <(G,t),(G',t')> = G^T D I G' + delta t^T t' on g = (+C_alpha) + h."""

    def __init__(self, rs: RootSystem, D_per_root, delta):
        self.rs = rs
        self.D = np.asarray(D_per_root, dtype=complex)
        self.delta = complex(delta)

    def __call__(self, u, v):
        g1, t1 = u
        g2, t2 = v
        g1 = np.asarray(g1)
        g2 = np.asarray(g2)
        return np.sum(g1 * self.D * g2[self.rs.involution]) + self.delta * (np.asarray(t1) @ np.asarray(t2))

    def gram(self):
        """Matrix of the form on the standard basis (root lines first, then h)."""
        n, r = self.rs.n_roots, self.rs.rank
        G = np.zeros((n + r, n + r), dtype=complex)
        G[np.arange(n), self.rs.involution] = self.D
        G[n:, n:] = self.delta * np.eye(r)
        return G


def invariant_pairing(rs: RootSystem, D_per_class, delta=1.0) -> InvariantPairing:
    """Weyl- and torus-invariant pairing with weight D on each root orbit.

    ``D_per_class`` is a scalar, a per-class sequence/mapping, or a per-root
    array; a per-root array that varies inside one Weyl orbit is rejected.
    """
    n_cls = len(rs.length_classes)
    if isinstance(D_per_class, Mapping):
        per_root = CouplingSpec(rs, D_per_class).per_root
    elif np.ndim(D_per_class) == 0:
        per_root = np.full(rs.n_roots, complex(D_per_class))
    else:
        arr = np.asarray(D_per_class, dtype=complex)
        if arr.shape == (n_cls,):
            per_root = arr[rs.class_of]
        elif arr.shape == (rs.n_roots,):
            for cls in rs.length_classes:
                if not np.allclose(arr[cls], arr[cls[0]], rtol=0, atol=1e-14):
                    raise ValueError("D must be constant on each Weyl orbit of roots")
            per_root = arr
        else:
            raise ValueError("D_per_class must have one entry per class or per root")
    return InvariantPairing(rs, per_root, delta)


def weyl_act(rs: RootSystem, w_matrix, w_perm, u):
    """Action of a Weyl element on (Gamma, tau): Gamma permuted, tau rotated."""
    gamma, tau = u
    gamma = np.asarray(gamma)
    out = np.empty_like(gamma)
    out[w_perm] = gamma
    return out, w_matrix @ np.asarray(tau)


def invariant_pairing_dimension(rs: RootSystem):
    """Dimension of the space of N'-invariant bilinear forms on g, by linear algebra.

    Invariance is imposed under the infinitesimal torus action (root line
    alpha has weight alpha, h has weight 0) and under the simple reflections
    (root lines permuted, h rotated).
    """
    n, r = rs.n_roots, rs.rank
    d = n + r
    mats = []
    for i in range(r):
        X = np.zeros((d, d))
        X[np.arange(n), np.arange(n)] = rs.roots[:, i]
        mats.append(X)
    eq = []
    # torus: X^T B + B X = 0
    for X in mats:
        eq.append(np.kron(np.eye(d), X.T) + np.kron(X.T, np.eye(d)))
    # reflections: g^T B g = B
    for k, s in zip(rs.simple, rs._simple_refl):
        perm = rs.permutation_of(s)
        g = np.zeros((d, d))
        g[perm, np.arange(n)] = 1.0
        g[n:, n:] = s
        eq.append(np.kron(g.T, g.T) - np.eye(d * d))
    system = np.vstack(eq)
    sv = np.linalg.svd(system, compute_uv=False)
    rank = int(np.sum(sv > 1e-9 * sv[0]))
    return d * d - rank


@dataclass
class ObstructionReport:
    """Outcome of the W-invariant H-orbit check for one representation.

    ``splits`` records whether the permutation lift of W closes to a group
    of order |W|.  ``character_trivial[k]`` tells whether the stabilizer of
    the k-th orbit representative acts trivially on its weight line.
    ``witness`` maps each failing orbit to a stabilizer element, written as a
    1-based permutation of the defining basis in cycle notation.
    """

    splits: bool
    character_trivial: dict
    witness: dict | None
    representatives: dict = field(default_factory=dict)
    lift_order: int = 0
    weyl_order: int = 0

    def __post_init__(self):
        failing = [k for k, ok in self.character_trivial.items() if not ok]
        if bool(failing) != bool(self.witness):
            raise AssertionError("witness must be present iff some character is nontrivial")


def _classical_realization(rs: RootSystem):
    """Defining matrix realization: basis weights (ambient) and invariant form J."""
    r = rs.rank
    if rs.kind == "A":
        m = r + 1
        wts = np.eye(m)
        J = None
    elif rs.kind in ("B", "D"):
        m = 2 * r + (1 if rs.kind == "B" else 0)
        wts = np.zeros((m, r))
        wts[:r] = np.eye(r)
        wts[r:2 * r] = -np.eye(r)
        J = np.zeros((m, m))
        J[np.arange(r), np.arange(r, 2 * r)] = 1.0
        J[np.arange(r, 2 * r), np.arange(r)] = 1.0
        if rs.kind == "B":
            J[2 * r, 2 * r] = 1.0
    elif rs.kind == "C":
        m = 2 * r
        wts = np.vstack([np.eye(r), -np.eye(r)])
        J = np.zeros((m, m))
        J[np.arange(r), np.arange(r, 2 * r)] = 1.0
        J[np.arange(r, 2 * r), np.arange(r)] = -1.0
    else:
        raise ValueError(f"{rs.label} has no classical matrix realization")
    return wts, J


def _root_space(rs, wts, J, alpha_amb):
    """A spanning matrix of the root space for ambient root alpha inside g(J)."""
    m = len(wts)
    cells = [(a, b) for a in range(m) for b in range(m)
             if np.allclose(wts[a] - wts[b], alpha_amb)]
    if J is None:
        (a, b), = cells
        X = np.zeros((m, m))
        X[a, b] = 1.0
        return X
    # X^T J + J X = 0 restricted to the allowed cells
    cols = []
    for a, b in cells:
        E = np.zeros((m, m))
        E[a, b] = 1.0
        cols.append((E.T @ J + J @ E).ravel())
    _, s, vh = np.linalg.svd(np.array(cols).T)
    null = vh[len(s[s > 1e-12]):]
    X = np.zeros((m, m))
    for (a, b), c in zip(cells, null[0]):
        X[a, b] = c
    return X / np.max(np.abs(X))


def _cycles(perm):
    seen, out = set(), []
    for i in range(len(perm)):
        if i in seen or perm[i] == i:
            continue
        cyc, j = [], i
        while j not in seen:
            seen.add(j)
            cyc.append(int(j) + 1)
            j = int(perm[j])
        out.append(tuple(cyc))
    return out


def _basis_lift(bw, J, w_matrix):
    """Permutation matrix of the basis induced by w, signed if J requires it."""
    m = len(bw)
    perm = np.empty(m, dtype=int)
    for a in range(m):
        perm[a] = next(b for b in range(m) if np.allclose(bw[b], w_matrix @ bw[a]))
    P = np.zeros((m, m))
    P[perm, np.arange(m)] = 1.0
    if J is not None and not np.allclose(P.T @ J @ P, J):
        # symplectic case: fix the sign on one member of each J-pair
        Jp = P.T @ J @ P
        s = np.ones(m)
        for a in range(m):
            b = int(np.flatnonzero(J[a])[0])
            if a < b:
                s[b] = Jp[a, b] / J[a, b]
        P = P @ np.diag(s)
    return P


def check_w_invariant_orbit(rs: RootSystem, rep: Representation, bound=10 ** 6) -> ObstructionReport:
    """Brute-force test of the W-invariant H-orbit obstruction for a classical group.

    The representation must be a single Weyl orbit of weights, realized either
    on the defining module (weights = basis weights) or on root spaces of the
    matrix Lie algebra.  W is lifted to basis permutations (signed where the
    invariant form requires it).  For the orbit representative alpha the
    stabilizer W_alpha is enumerated inside the lifted group and its scalar on
    the alpha-weight line recorded.
    """
    if rs.kind in ("BC", "G2"):
        raise UnsupportedRepresentationError(f"{rs.label} has no classical matrix group")
    if len(rep.orbit_sizes) != 1:
        raise ValueError("representation must be a single Weyl orbit of weights")
    order = weyl_group_order(rs.kind, rs.rank)
    if order > bound:
        raise EnumerationBoundError(f"|W| = {order} exceeds enumeration bound {bound}")
    wts, J = _classical_realization(rs)
    bw = wts @ rs.basis.T
    m = len(bw)

    alpha = rep.weights[0]
    hit = [b for b in range(m) if np.allclose(bw[b], alpha)]
    if hit:
        adjoint = False
        X = np.zeros(m)
        X[hit[0]] = 1.0
    else:
        adjoint = True
        X = _root_space(rs, wts, J, rs.basis.T @ alpha)

    gens = [_basis_lift(bw, J, s) for s in rs._simple_refl]
    ident = np.eye(m)
    seen = {ident.round(9).tobytes(): ident}
    queue = deque([ident])
    while queue and len(seen) <= 4 * order:
        g = queue.popleft()
        for s in gens:
            h = s @ g
            k = h.round(9).tobytes()
            if k not in seen:
                seen[k] = h
                queue.append(h)
    lifted = list(seen.values())
    # the adjoint action only sees the lift modulo scalars
    if adjoint:
        classes = {}
        for g in lifted:
            k = min(g.round(9).tobytes(), (-g).round(9).tobytes())
            classes[k] = g
        lifted_order = len(classes)
    else:
        lifted_order = len(lifted)
    splits = lifted_order == order

    flat_x = X.ravel()
    piv = int(np.argmax(np.abs(flat_x)))
    trivial = True
    best = None
    for g in lifted:
        img = (g @ X @ g.T if adjoint else g @ X).ravel()
        if np.allclose(np.abs(g), np.eye(m)):
            continue  # torus elements of a non-split lift are not Weyl representatives
        ratio = img[piv] / flat_x[piv]
        if not np.allclose(img, ratio * flat_x, atol=1e-9):
            continue
        if abs(ratio - 1.0) > 1e-9:
            trivial = False
            perm = np.argmax(np.abs(g), axis=0)
            moved = int(np.sum(perm != np.arange(m)))
            if best is None or moved < best[0]:
                best = (moved, perm, ratio)
    witness = None
    if not trivial:
        witness = {0: {"cycles": _cycles(best[1]), "scalar": float(np.round(np.real(best[2]), 12))}}
    return ObstructionReport(
        splits=splits,
        character_trivial={0: trivial},
        witness=witness,
        representatives={0: tuple(float(v) for v in np.round(alpha, 12))},
        lift_order=lifted_order,
        weyl_order=order,
    )
