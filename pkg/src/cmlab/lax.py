"""Matrix Lax pairs with spectral parameter for the elliptic Calogero-Moser flow.

Two embeddings into gl(N) acting on a weight representation are built:

* ``dhp``: a single root-line entry ``C_{w,w'} c_alpha rho0(alpha(x), z)`` at
  every pair of weights differing by a root;
* ``bcs``: entries ``g_alpha n rho0(alpha(x), n z)`` at pairs exchanged by the
  reflection ``s_alpha`` with ``w' - w = n alpha``.

Orientation: the entry in row ``w`` and column ``w'`` carries the root
``alpha = w' - w``, and the Lax equation reads ``dL/dt = [M, L]``.

In the bcs builder the coupling on the root lines is
``g_alpha = c_alpha sqrt(kappa / mult(alpha))`` where
``kappa = tr(xi(e)^2)`` for a unit vector ``e`` and ``mult(alpha)`` is the sum
of ``n^2`` over the entries carrying ``alpha``.  With this choice
``tr L^2 = kappa H + f(z)``, so L is a Lax matrix for the system whose
couplings are the ``c_alpha`` of the given :class:`CMSystem`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import CMSystem, Controls, PhaseState, contour_residue, integrate
from .errors import TorsionPoleError, UnsupportedRepresentationError
from .rootsys import Representation

BUILDERS = ("dhp", "bcs")


def _norm(A):
    return float(np.max(np.abs(A))) if np.size(A) else 0.0


class DhpCoupling:
    """Constants C_{w,w'} on the pairs of weights that differ by a root.

    Defaults to ``C = 1`` on the whole support.  Symmetry is enforced at
    construction; Weyl invariance is reported by :meth:`is_weyl_invariant`
    (an asymmetric or non-invariant C is allowed so that negative controls
    can be expressed).
    """

    def __init__(self, rep: Representation, C=None, require_symmetric=True):
        N = rep.N
        support = np.zeros((N, N), dtype=bool)
        for (i, j), pairs in rep.shift_index.items():
            if any(n == 1 for _, n in pairs):
                support[j, i] = True
        if C is None:
            C = support.astype(complex)
        C = np.asarray(C, dtype=complex)
        if C.shape != (N, N):
            raise ValueError(f"C must be {N}x{N}")
        if require_symmetric and not np.allclose(C, C.T, rtol=0, atol=1e-14):
            raise ValueError("C must be symmetric, C_{w,w'} = C_{w',w}")
        self.rep = rep
        self.C = np.where(support, C, 0.0)
        self.support = support

    def is_weyl_invariant(self, tol=1e-12):
        rep = self.rep
        for a in range(rep.rs.n_roots):
            P = rep.reflections[a]
            if _norm(P @ self.C @ P.T - self.C) > tol:
                return False
        return True


@dataclass
class _Entries:
    rows: np.ndarray
    cols: np.ndarray
    roots: np.ndarray
    n: np.ndarray
    coef: np.ndarray


def _dhp_entries(sys: CMSystem, rep: Representation, coup: DhpCoupling) -> _Entries:
    c = sys.couplings.per_root
    out = []
    for (i, j), pairs in sorted(rep.shift_index.items()):
        for a, n in pairs:
            if n == 1:
                out.append((j, i, a, 1, coup.C[j, i] * c[a]))
    return _pack(out)


def bcs_multiplicities(rep: Representation):
    """kappa and mult(alpha) for the bcs normalization."""
    rs = rep.rs
    mult = np.zeros(rs.n_roots)
    for (i, j), pairs in rep.shift_index.items():
        for a, n in pairs:
            if rep.reflections[a][j, i]:
                mult[a] += n * n
    kappa = float(np.trace(rep.weights.T @ rep.weights)) / rs.rank
    return kappa, mult


def bcs_couplings(sys: CMSystem, rep: Representation):
    """Effective root-line couplings g_alpha = c_alpha sqrt(kappa / mult(alpha))."""
    kappa, mult = bcs_multiplicities(rep)
    c = sys.couplings.per_root
    with np.errstate(divide="ignore"):
        g = np.where(mult > 0, c * np.sqrt(kappa / np.where(mult > 0, mult, 1.0)), 0.0)
    return g


def _bcs_entries(sys: CMSystem, rep: Representation) -> _Entries:
    g = bcs_couplings(sys, rep)
    out = []
    for (i, j), pairs in sorted(rep.shift_index.items()):
        for a, n in pairs:
            if rep.reflections[a][j, i]:
                out.append((j, i, a, n, g[a]))
    return _pack(out)


def _pack(rows):
    if not rows:
        e = np.zeros(0, dtype=int)
        return _Entries(e, e, e, e, np.zeros(0, dtype=complex))
    r, c, a, n, k = zip(*rows)
    return _Entries(np.array(r), np.array(c), np.array(a), np.array(n), np.array(k, dtype=complex))


def _check_torsion(lattice, z, ns):
    for n in sorted(set(int(v) for v in ns)):
        w0 = lattice._reduce(n * np.asarray(z, dtype=complex))[0]
        d = float(np.min(np.abs(w0 - lattice._cell)))
        if d < lattice.pole_radius:
            raise TorsionPoleError(
                f"z = {complex(z)} lies within {lattice.pole_radius:.3g} of an {n}-torsion "
                f"point (offending (n, z) = ({n}, {complex(z)}))", n=n, z=complex(z), distance=d / n)


@dataclass
class LaxPair:
    """L(z), M(z) at a fixed phase-space point with their z -> 0 data.

    ``R``: residue of L at z = 0; ``Q``: constant term of the off-diagonal
    part of L; ``P``: finite part of the off-diagonal part of M at z = 0;
    ``d_prime``: the diagonal of M.
    """

    builder_kind: str
    sys: CMSystem
    rep: Representation
    state: PhaseState
    entries: _Entries
    R: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    d_prime: np.ndarray
    meta: dict = field(default_factory=dict)

    def _u(self):
        return self.sys.root_values(self.state.x)[self.entries.roots]

    def L(self, z):
        e = self.entries
        lat = self.sys.lattice
        _check_torsion(lat, z, e.n)
        out = np.diag(self.rep.xi(self.state.p)).astype(complex)
        if e.rows.size:
            vals = e.coef * e.n * lat.rho0(self._u(), e.n * complex(z))
            np.add.at(out, (e.rows, e.cols), vals)
        return out

    def M(self, z):
        e = self.entries
        lat = self.sys.lattice
        _check_torsion(lat, z, e.n)
        out = np.diag(self.d_prime).astype(complex)
        if e.rows.size:
            vals = e.coef * lat.drho0_dx(self._u(), e.n * complex(z))
            np.add.at(out, (e.rows, e.cols), vals)
        return out

    @property
    def N(self):
        return self.rep.N


def _zdata(sys, rep, entries, x):
    N = rep.N
    u = sys.root_values(x)[entries.roots]
    lat = sys.lattice
    R = np.zeros((N, N), dtype=complex)
    Q = np.zeros((N, N), dtype=complex)
    P = np.zeros((N, N), dtype=complex)
    if entries.rows.size:
        idx = (entries.rows, entries.cols)
        np.add.at(R, idx, -entries.coef)
        np.add.at(Q, idx, entries.coef * entries.n * lat.zeta(u))
        np.add.at(P, idx, -entries.coef * lat.wp(u))
    return R, Q, P


def _comm(A, B):
    return A @ B - B @ A


def _offdiag(A):
    return A - np.diag(np.diag(A))


def solve_dhp_d_prime(P, R):
    """Least-squares diagonal d' with [P + d', R]_od = 0; returns (d', residual).

    The gauge freedom d' -> d' + const is fixed by making d' sum to zero.
    """
    N = len(R)
    rr, cc = np.nonzero(~np.eye(N, dtype=bool))
    target = -_comm(P, R)[rr, cc]
    A = np.zeros((len(rr), N + 1), dtype=complex)
    A[np.arange(len(rr)), rr] = R[rr, cc]
    A[np.arange(len(rr)), cc] -= R[rr, cc]
    A = A[:, :N]
    # gauge row
    A = np.vstack([A, np.ones(N)])
    target = np.concatenate([target, [0.0]])
    d, *_ = np.linalg.lstsq(A, target, rcond=None)
    res = _norm(_offdiag(_comm(P + np.diag(d), R)))
    return d, res


def bcs_d_prime(sys, rep, x):
    """Diagonal of the bcs M: d'_w = sum over positive alpha with s_alpha w = w of g_alpha (-wp(alpha(x)))."""
    rs = rep.rs
    g = bcs_couplings(sys, rep)
    u = sys.root_values(x)
    pos = np.arange(rs.n_positive)
    fixed = np.array([[rep.reflections[a][i, i] for a in pos] for i in range(rep.N)])
    fin = np.where(fixed.any(axis=0), sys.lattice.drho0_dx_origin(u[pos]) if fixed.any() else 0.0, 0.0)
    return fixed @ (g[pos] * fin)


def _check_elliptic(sys):
    if sys.potential != "elliptic":
        raise ValueError("Lax pairs with spectral parameter need the elliptic potential")


def lax_pair(builder, sys: CMSystem, rep: Representation, s: PhaseState, coup: DhpCoupling | None = None,
             d_prime=None, tol=1e-8) -> LaxPair:
    """Assemble the Lax pair of the given builder at state s.

    For ``dhp``, ``d_prime`` may be ``None`` (solve the algebraic constraint
    for a diagonal d'), ``"zero"``, or an explicit N-vector.  For ``bcs`` it
    defaults to the closed-form diagonal of :func:`bcs_d_prime`.
    """
    _check_elliptic(sys)
    if rep.rs != sys.rs:
        raise ValueError("representation and system use different root systems")
    sys.check_walls(s.x, s.t)
    meta = {}
    if builder == "dhp":
        coup = coup or DhpCoupling(rep)
        entries = _dhp_entries(sys, rep, coup)
        R, Q, P = _zdata(sys, rep, entries, s.x)
        if d_prime is None:
            d, res = solve_dhp_d_prime(P, R)
            scale = max(_norm(_comm(P, R)), 1.0)
            meta["d_prime_residual"] = res
            if res > tol * scale:
                raise UnsupportedRepresentationError(
                    f"no diagonal d' satisfies the constraint on this representation "
                    f"(least-squares residual {res:.3g})")
        elif isinstance(d_prime, str) and d_prime == "zero":
            d = np.zeros(rep.N, dtype=complex)
        else:
            d = np.asarray(d_prime, dtype=complex)
    elif builder == "bcs":
        entries = _bcs_entries(sys, rep)
        R, Q, P = _zdata(sys, rep, entries, s.x)
        if d_prime is None:
            d = bcs_d_prime(sys, rep, s.x).astype(complex)
        elif isinstance(d_prime, str) and d_prime == "zero":
            d = np.zeros(rep.N, dtype=complex)
        else:
            d = np.asarray(d_prime, dtype=complex)
    else:
        raise ValueError(f"builder must be one of {BUILDERS}")
    return LaxPair(builder, sys, rep, s, entries, R, Q, P, d, meta)


def dhp_lax(sys, rep, coup, s, z):
    return lax_pair("dhp", sys, rep, s, coup, d_prime="zero").L(z)


def dhp_m(sys, rep, coup, s, z, d_prime=None):
    return lax_pair("dhp", sys, rep, s, coup, d_prime=d_prime).M(z)


def bcs_lax(sys, rep, s, z):
    return lax_pair("bcs", sys, rep, s).L(z)


def bcs_m(sys, rep, s, z, d_prime=None):
    return lax_pair("bcs", sys, rep, s, d_prime=d_prime).M(z)


# -- algebraic constraints ------------------------------------------------------


@dataclass
class ConstraintReport:
    """Residuals of the algebraic constraints on d' (max-abs entry norm).

    ``r_od``: ||[P + d', R]_od||, the z^{-1} coefficient of dL/dt - [M, L];
    ``r_od_printed``: ||[P, R]_od - [d', R]_od||, the same with d' entering
    with the opposite sign; ``r_d``: ||[d', R]_d||; ``a``: the diagonal
    correction, minus its h-part; ``r_a``: ||a - [d', Q]_d||.
    """

    r_od: float
    r_od_printed: float
    r_d: float
    a: float
    r_a: float
    scale: float

    def as_dict(self):
        return dict(self.__dict__)


def a_correction(lp: LaxPair, z=None):
    """a(x) = -pi_{h-perp} diag([M_od(z), L(z)]), which does not depend on z."""
    if z is None:
        z = 0.31 * lp.sys.lattice.omega1 + 0.17 * lp.sys.lattice.omega2
    Mo = _offdiag(lp.M(z))
    v = np.diag(_comm(Mo, lp.L(z)))
    W = lp.rep.weights
    coef, *_ = np.linalg.lstsq(W, v, rcond=None)
    return -(v - W @ coef)


def constraint_check(rep, coup, x, d_prime, sys: CMSystem, builder="dhp") -> ConstraintReport:
    """Evaluate the three algebraic constraints on a diagonal d' at configuration x."""
    s = PhaseState(np.asarray(x), np.zeros(len(x)))
    lp = lax_pair(builder, sys, rep, s, coup, d_prime=np.zeros(rep.N) if d_prime is None else d_prime)
    D = np.diag(lp.d_prime)
    PR = _comm(lp.P, lp.R)
    DR = _comm(D, lp.R)
    a = a_correction(lp)
    return ConstraintReport(
        r_od=_norm(_offdiag(PR + DR)),
        r_od_printed=_norm(_offdiag(PR - DR)),
        r_d=_norm(np.diag(DR)),
        a=_norm(a),
        r_a=_norm(a - np.diag(_comm(D, lp.Q))),
        scale=max(_norm(PR), 1e-300),
    )


def residue_matrix(lp: LaxPair, n_points=64):
    """Residue of L(z) at z = 0 by a contour integral (compares with lp.R)."""
    nmax = int(lp.entries.n.max()) if lp.entries.n.size else 1
    r = 0.4 * lp.sys.lattice.min_period / nmax
    return contour_residue(lp.L, r, n_points)


# -- Lax equation along the flow ------------------------------------------------


@dataclass
class LaxResidual:
    residual: float
    fd_error: float
    h: float
    norm_L: float


def _time_step(sys, s, h0):
    dx, dp = np.abs(s.p), np.abs(sys.force(s.x, True))
    v = float(np.max(dx, initial=0.0) + np.sqrt(np.max(dp, initial=0.0)))
    return h0 / (1.0 + v)


def lax_residual_report(builder, sys, rep, s0, z, controls=None, coup=None, d_prime=None,
                        h=2e-2, levels=4) -> LaxResidual:
    """||dL/dt - [M, L]|| / ||L|| at s0, with dL/dt from the integrated flow.

    dL/dt is a Richardson tableau of central differences with steps h, h/2,
    ..., each from states produced by the integrator (not from the vector
    field), so the check is independent of the hand-coded equations.
    """
    ctl = controls or Controls()
    hh = _time_step(sys, s0, h)
    hs = [hh / 2 ** k for k in range(levels)]
    tight = Controls(rtol=min(ctl.rtol, 1e-13), atol=min(ctl.atol, 1e-13), method="dop853",
                     complex_state=ctl.complex_state, drift_bound=1.0)
    fw = integrate(sys, s0, hs[0], Controls(**{**tight.__dict__, "t_eval": np.array([0.0] + hs[::-1])}))
    bw = integrate(sys, s0, -hs[0], Controls(**{**tight.__dict__, "t_eval": np.array([0.0] + [-t for t in hs[::-1]])}))
    states = {}
    for tr in (fw, bw):
        for k in range(len(tr)):
            states[round(float(tr.t[k] - s0.t) / hs[-1])] = tr.state(k)

    def Lat(t):
        return lax_pair(builder, sys, rep, states[round(t / hs[-1])], coup, d_prime).L(z)

    tab = []
    for i, hk in enumerate(hs):
        row = [(Lat(hk) - Lat(-hk)) / (2 * hk)]
        for j in range(1, i + 1):
            f = 4.0 ** j
            row.append((f * row[j - 1] - tab[i - 1][j - 1]) / (f - 1))
        tab.append(row)
    dL = tab[-1][-1]
    fd_err = _norm(tab[-1][-1] - tab[-1][-2]) if levels > 1 else np.inf
    lp = lax_pair(builder, sys, rep, s0, coup, d_prime)
    Lz = lp.L(z)
    nL = _norm(Lz)
    res = _norm(dL - _comm(lp.M(z), Lz)) / nL
    return LaxResidual(res, fd_err / nL, hh, nL)


def lax_residual(builder, sys, rep, s0, z, controls=None, coup=None, d_prime=None) -> float:
    """Normalized max-abs residual of the Lax equation at s0 and z."""
    return lax_residual_report(builder, sys, rep, s0, z, controls, coup, d_prime).residual


# -- spectral data --------------------------------------------------------------


def charpoly_from_traces(traces):
    """Coefficients c_0..c_N of det(w I - L) = sum c_k w^{N-k} from power traces p_1..p_N."""
    N = len(traces)
    c = np.zeros(N + 1, dtype=complex)
    c[0] = 1.0
    for k in range(1, N + 1):
        c[k] = -np.dot(c[k - 1::-1][:k], traces[:k]) / k
    return c


def faddeev_leverrier(A):
    """Characteristic polynomial coefficients and power traces of A without eigenvalues."""
    N = len(A)
    traces = np.empty(N, dtype=complex)
    Ak = np.eye(N, dtype=complex)
    for k in range(N):
        Ak = Ak @ A
        traces[k] = np.trace(Ak)
    return charpoly_from_traces(traces), traces


@dataclass
class SpectralData:
    """tr L(z)^k (k = 0..k_max) and characteristic-polynomial coefficients on a z-grid."""

    z: np.ndarray
    invariants: np.ndarray
    charpoly_coeffs: np.ndarray
    norm_L: np.ndarray


def spectral_invariants(builder, sys, rep, s, z_grid, k_max=None, coup=None) -> SpectralData:
    lp = lax_pair(builder, sys, rep, s, coup)
    z_grid = np.atleast_1d(np.asarray(z_grid, dtype=complex))
    N = rep.N
    k_max = N if k_max is None else int(k_max)
    kk = max(k_max, N)
    inv = np.empty((k_max + 1, len(z_grid)), dtype=complex)
    cps = np.empty((N + 1, len(z_grid)), dtype=complex)
    norms = np.empty(len(z_grid))
    for j, z in enumerate(z_grid):
        Lz = lp.L(z)
        norms[j] = _norm(Lz)
        tr = np.empty(kk, dtype=complex)
        Ak = np.eye(N, dtype=complex)
        for k in range(kk):
            Ak = Ak @ Lz
            tr[k] = np.trace(Ak)
        inv[0, j] = N
        inv[1:, j] = tr[:k_max]
        cps[:, j] = charpoly_from_traces(tr[:N])
    return SpectralData(z_grid, inv, cps, norms)


def coefficient_drift(c0, c1, norm0):
    """Relative drift per coefficient; structurally vanishing coefficients use ||L||^k as scale."""
    k = np.arange(len(c0))[:, None]
    scale = norm0[None, :] ** k
    base = np.abs(c0)
    denom = np.where(base > 1e-10 * scale, base, scale)
    return np.abs(c1 - c0) / denom


@dataclass
class SpectralConservation:
    max_drift: float
    drift: np.ndarray
    eigen_mismatch: float
    energy_drift: float
    times: np.ndarray


def _match_eigs(a, b):
    from scipy.optimize import linear_sum_assignment

    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(np.max(cost[r, c])) if len(r) else 0.0


def spectral_conservation(builder, sys, rep, s0, T, z_grid, k_max=None, coup=None, controls=None,
                          n_checkpoints=3) -> SpectralConservation:
    """Drift of the characteristic polynomial of L(z) along the flow over [0, T]."""
    ctl = controls or Controls()
    t_eval = np.linspace(0.0, T, n_checkpoints + 1)
    tr = integrate(sys, s0, T, Controls(**{**ctl.__dict__, "t_eval": t_eval}))
    d0 = spectral_invariants(builder, sys, rep, tr.state(0), z_grid, k_max, coup)
    drifts = []
    for k in range(1, len(tr)):
        dk = spectral_invariants(builder, sys, rep, tr.state(k), z_grid, k_max, coup)
        drifts.append(coefficient_drift(d0.charpoly_coeffs, dk.charpoly_coeffs, d0.norm_L))
    drift = np.max(np.array(drifts), axis=0)
    z0 = np.atleast_1d(z_grid)[0]
    e0 = np.linalg.eigvals(lax_pair(builder, sys, rep, tr.state(0), coup).L(z0))
    e1 = np.linalg.eigvals(lax_pair(builder, sys, rep, tr.final, coup).L(z0))
    mism = _match_eigs(e0, e1) / max(float(np.max(np.abs(e0))), 1.0)
    return SpectralConservation(float(np.max(drift[1:])), drift, mism, tr.energy_drift, tr.t)


def trace_z_part(builder, sys, rep, s, z, coup=None):
    """z-dependent part of tr L(z)^2 predicted from rho0(u) rho0(-u) = wp(z) - wp(u)."""
    lp = lax_pair(builder, sys, rep, s, coup)
    e = lp.entries
    key = {(int(r), int(c), int(a), int(n)): k for r, c, a, n, k in zip(e.rows, e.cols, e.roots, e.n, e.coef)}
    inv = rep.rs.involution
    tot = 0.0
    for (r, c, a, n), k in key.items():
        k2 = key.get((c, r, int(inv[a]), n))
        if k2 is not None:
            tot = tot + k * k2 * n * n * sys.lattice.wp(n * z)
    return tot


def trace_residue(builder, sys, rep, s, coup=None, n_points=64):
    """res_{z=0} zeta(z) tr L(z)^2, by a contour integral."""
    lp = lax_pair(builder, sys, rep, s, coup)
    nmax = int(lp.entries.n.max()) if lp.entries.n.size else 1
    lat = sys.lattice
    r = 0.4 * lat.min_period / nmax

    def f(z):
        Lz = lp.L(z)
        return lat.zeta(z) * np.sum(Lz * Lz.T)

    return contour_residue(f, r, n_points)


@dataclass
class AffineFit:
    mu: complex
    nu: complex
    fit_residual: float
    holdout_residual: float
    coefficient_variation: float
    expected_mu: float


def hamiltonian_correspondence(builder, sys, rep, states, holdout, coup=None) -> AffineFit:
    """Fit res(zeta tr L^2) = mu H + nu on ``states``; validate on ``holdout``."""
    from .dynamics import cm_hamiltonian

    def data(ss):
        H = np.array([cm_hamiltonian(sys, s) for s in ss], dtype=complex)
        y = np.array([trace_residue(builder, sys, rep, s, coup) for s in ss])
        return H, y

    H, y = data(states)
    A = np.column_stack([H, np.ones_like(H)])
    (mu, nu), *_ = np.linalg.lstsq(A, y, rcond=None)
    scale = max(float(np.max(np.abs(y))), 1.0)
    fit = float(np.max(np.abs(A @ [mu, nu] - y))) / scale
    H2, y2 = data(holdout)
    A2 = np.column_stack([H2, np.ones_like(H2)])
    (mu2, nu2), *_ = np.linalg.lstsq(A2, y2, rcond=None)
    hold = float(np.max(np.abs(A2 @ [mu, nu] - y2))) / max(float(np.max(np.abs(y2))), 1.0)
    var = max(abs(mu2 - mu) / max(abs(mu), 1e-300), abs(nu2 - nu) / max(abs(mu), 1.0))
    kappa = bcs_multiplicities(rep)[0]
    return AffineFit(complex(mu), complex(nu), fit, hold, float(var), kappa)
