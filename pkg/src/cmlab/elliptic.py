"""Weierstrass functions and the line-bundle sections rho0, rho1 on an elliptic curve.

Everything is evaluated through the Jacobi theta function ``theta_1`` with
nome ``q = exp(i*pi*tau)``.  Two reductions make the q-series converge at a
fixed, small number of terms for any lattice and any argument:

* the period basis is Gauss-reduced internally so that ``tau`` lies in the
  standard fundamental domain (``|q| <= exp(-pi*sqrt(3)/2) ~ 0.066``);
* each argument ``z`` is translated into the period cell centred at the
  origin and the quasi-periodicity factors are applied analytically.

The Weierstrass functions depend only on the lattice, so the reduced basis is
an internal detail; ``eta1``/``eta2`` and ``nome`` are reported for the
generators the caller supplied.

Conventions (periods ``2*omega1``, ``2*omega2``, ``eta_i = zeta(omega_i)``)::

    sigma(z + 2w) = (-1)^(m+n+mn) exp(2 eta_w (z + w)) sigma(z),  w = m omega1 + n omega2
    zeta(z + 2 omega_i) = zeta(z) + 2 eta_i
    rho1(x, z) = sigma(z - x) / (sigma(z) sigma(x)) * exp(x zeta(z))
    rho0(x, z) = exp(-x zeta(z)) rho1(x, z) = sigma(z - x) / (sigma(z) sigma(x))
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DegenerateLatticeError, PoleProximityError

EPS = np.finfo(float).eps

# relative separation below which omega2/omega1 counts as real
_DEGENERACY_TOL = 1e-12
POLE_EXCLUSION = 1e-6


class EllipticValue(NamedTuple):
    """A function value together with an a-posteriori error estimate.

    ``est_error`` is the estimated absolute error divided by ``max(|value|, 1)``,
    i.e. a relative error for large values and an absolute one near zeros.
    """

    value: complex
    est_error: float


def _gauss_reduce(w1, w2):
    """Reduce a positively oriented basis so tau = w2/w1 has |Re tau| <= 1/2, |tau| >= 1.

    Returns the reduced pair and the integer matrix ``U`` with
    ``(w1_old, w2_old) = U @ (w1_new, w2_new)``.
    """
    U = np.eye(2, dtype=int)
    for _ in range(200):
        tau = w2 / w1
        k = int(np.round(tau.real))
        if k:
            w2 = w2 - k * w1
            # old = U @ new_old_basis; w2_prev = w2 + k w1
            U = U @ np.array([[1, 0], [k, 1]])
            tau = w2 / w1
        if abs(tau) < 1.0 - 1e-15:
            w1, w2 = w2, -w1
            # w1_prev = -w2_new, w2_prev = w1_new
            U = U @ np.array([[0, -1], [1, 0]])
        else:
            break
    return w1, w2, U


class Lattice:
    """Period lattice 2*omega1*Z + 2*omega2*Z with precomputed theta data.

    Parameters
    ----------
    omega1, omega2 : complex
        Half-periods.  If ``Im(omega2/omega1) < 0`` they are swapped so the
        stored pair is positively oriented.
    accuracy_target : float
        Requested relative accuracy; controls the number of q-series terms.

    Attributes
    ----------
    eta1, eta2 : complex
        ``zeta(omega1)``, ``zeta(omega2)``.
    nome : complex
        ``exp(i*pi*omega2/omega1)`` for the (oriented) supplied generators.
    pole_radius : float
        Arguments closer than this to a lattice point raise
        :class:`PoleProximityError`.
    legendre_residual : float
        ``|eta1*omega2 - eta2*omega1 - i*pi/2|`` with ``eta1`` taken from an
        Eisenstein-series evaluation that is independent of the theta route.

    Instances are immutable after construction and all methods are pure.
    """

    def __init__(self, omega1, omega2, accuracy_target=1e-12):
        omega1 = complex(omega1)
        omega2 = complex(omega2)
        if omega1 == 0 or omega2 == 0:
            raise DegenerateLatticeError("half-periods must be nonzero")
        ratio = omega2 / omega1
        if abs(ratio.imag) <= _DEGENERACY_TOL * abs(ratio):
            raise DegenerateLatticeError(
                f"omega2/omega1 = {ratio} is real: lattice is degenerate")
        if not accuracy_target > 0:
            raise ValueError("accuracy_target must be positive")
        if ratio.imag < 0:
            omega1, omega2 = omega2, omega1
        self.omega1 = omega1
        self.omega2 = omega2
        self.accuracy_target = float(accuracy_target)
        self.tau = omega2 / omega1
        self.nome = np.exp(1j * np.pi * self.tau)

        w1, w2, U = _gauss_reduce(omega1, omega2)
        self._w1, self._w2 = w1, w2
        self._tau_r = w2 / w1
        self._q = np.exp(1j * np.pi * self._tau_r)
        aq = abs(self._q)
        # relative size of term k against the leading one, derivative weights included
        target = max(min(self.accuracy_target, 1e-3) * 1e-3, EPS * 1e-2)
        nterms = 1
        while aq ** (nterms * nterms) * (2 * nterms + 1) ** 3 > target:
            nterms += 1
        self._nterms = nterms + 1
        self._tail = aq ** (self._nterms ** 2) * (2 * self._nterms + 1) ** 3
        k = np.arange(self._nterms)
        self._odd = 2 * k + 1
        self._coef = 2.0 * (-1.0) ** k * self._q ** ((k + 0.5) ** 2)

        th1p = np.sum(self._coef * self._odd)
        th1ppp = -np.sum(self._coef * self._odd ** 3)
        self._th1p0 = th1p
        self._eta_r1 = -np.pi ** 2 * th1ppp / (12.0 * w1 * th1p)
        # Legendre relation for a positively oriented basis
        self._eta_r2 = (self._eta_r1 * w2 - 0.5j * np.pi) / w1

        # eta for the caller's generators via additivity of the period map
        self.eta1 = U[0, 0] * self._eta_r1 + U[0, 1] * self._eta_r2
        self.eta2 = U[1, 0] * self._eta_r1 + U[1, 1] * self._eta_r2

        self.pole_radius = POLE_EXCLUSION * abs(2 * w1)
        self._cell = np.array([0, 2 * w1, -2 * w1, 2 * w2, -2 * w2,
                               2 * (w1 + w2), -2 * (w1 + w2),
                               2 * (w1 - w2), -2 * (w1 - w2)])

        # independent route: eta1 from the quasi-modular Eisenstein series E2
        n = np.arange(1, 60)
        q2n = self._q ** (2 * n)
        e2 = 1.0 - 24.0 * np.sum(n * q2n / (1.0 - q2n))
        eta_e2 = np.pi ** 2 * e2 / (12.0 * w1)
        eta2_e2 = (eta_e2 * w2 - 0.5j * np.pi) / w1
        eta1_chk = U[0, 0] * eta_e2 + U[0, 1] * eta2_e2
        eta2_chk = U[1, 0] * eta_e2 + U[1, 1] * eta2_e2
        self.legendre_residual = abs(
            eta1_chk * self.omega2 - eta2_chk * self.omega1 - 0.5j * np.pi)
        self.eta_crosscheck = max(abs(eta1_chk - self.eta1), abs(eta2_chk - self.eta2))
        scale = 1.0 + abs(self.eta1) + abs(self.eta2)
        if self.eta_crosscheck > 1e3 * max(self.accuracy_target, EPS) * scale:
            raise ArithmeticError(
                f"eta constants disagree between theta and Eisenstein routes "
                f"({self.eta_crosscheck:.3e})")

    def __repr__(self):
        return (f"Lattice(omega1={self.omega1!r}, omega2={self.omega2!r}, "
                f"accuracy_target={self.accuracy_target!r})")

    def __eq__(self, other):
        if not isinstance(other, Lattice):
            return NotImplemented
        return (self.omega1, self.omega2, self.accuracy_target) == (
            other.omega1, other.omega2, other.accuracy_target)

    def __hash__(self):
        return hash((self.omega1, self.omega2, self.accuracy_target))

    @property
    def min_period(self):
        """Length of the shortest nonzero period."""
        return abs(2 * self._w1)

    # -- internals ---------------------------------------------------------

    def _reduce(self, z):
        """Split z = z0 + 2 m w1 + 2 n w2 with z0 in the centred cell."""
        z = np.asarray(z, dtype=complex)
        u = z / (2 * self._w1)
        b = u.imag / self._tau_r.imag
        a = u.real - b * self._tau_r.real
        m = np.round(a)
        n = np.round(b)
        z0 = z - 2 * m * self._w1 - 2 * n * self._w2
        return z0, m, n

    def _check_pole(self, z0, what="z", original=None):
        d = np.min(np.abs(np.asarray(z0)[..., None] - self._cell), axis=-1)
        bad = d < self.pole_radius
        if np.any(bad):
            idx = np.flatnonzero(np.atleast_1d(bad))[0]
            src = np.atleast_1d(original if original is not None else z0).ravel()[idx]
            raise PoleProximityError(
                f"{what} = {complex(src)} lies within {self.pole_radius:.3g} of a "
                f"lattice point", argument=complex(src),
                distance=float(np.atleast_1d(d).ravel()[idx]))
        return d

    def _theta(self, z0, order, magnitude=True):
        """theta_1 and its v-derivatives at v = pi z0 / (2 w1); also sum of |terms|."""
        v = np.pi * z0 / (2 * self._w1)
        arg = v[..., None] * self._odd
        c = self._coef
        s = np.sin(arg)
        out = [s @ c]
        absum = np.abs(s) @ np.abs(c) if magnitude else None
        if order >= 1:
            co = np.cos(arg)
            out.append(co @ (c * self._odd))
        if order >= 2:
            out.append(-(s @ (c * self._odd ** 2)))
        if order >= 3:
            out.append(-(co @ (c * self._odd ** 3)))
        return out, absum

    def _quasi(self, m, n, z0):
        w = m * self._w1 + n * self._w2
        eta_w = m * self._eta_r1 + n * self._eta_r2
        sign = np.where(((m + n + m * n) % 2) == 0, 1.0, -1.0)
        return w, eta_w, sign

    def _sigma_raw(self, z):
        z0, m, n = self._reduce(z)
        (th, th_p), absum = self._theta(z0, 1)
        pref = 2 * self._w1 / np.pi / self._th1p0
        g = np.exp(self._eta_r1 * z0 ** 2 / (2 * self._w1))
        s0 = pref * g * th
        ds0 = pref * g * (th * self._eta_r1 * z0 / self._w1 + np.pi / (2 * self._w1) * th_p)
        w, eta_w, sign = self._quasi(m, n, z0)
        fac = sign * np.exp(2 * eta_w * (z0 + w))
        expo = np.abs(self._eta_r1 * z0 ** 2 / (2 * self._w1)) + np.abs(2 * eta_w * (z0 + w))
        mag = np.abs(pref * g * fac) * absum
        return fac * s0, fac * (ds0 + 2 * eta_w * s0), mag, expo

    # -- plain-valued evaluators (vectorized) ------------------------------

    def sigma(self, z):
        """Weierstrass sigma (entire, odd)."""
        return self._sigma_raw(z)[0]

    def sigma_prime(self, z):
        """Derivative of sigma, computed without dividing by sigma."""
        return self._sigma_raw(z)[1]

    def zeta(self, z):
        """Weierstrass zeta; raises PoleProximityError near lattice points."""
        z0, m, n = self._reduce(z)
        self._check_pole(z0, "z", z)
        (th, th_p), _ = self._theta(z0, 1, magnitude=False)
        eta_w = m * self._eta_r1 + n * self._eta_r2
        return self._eta_r1 * z0 / self._w1 + np.pi / (2 * self._w1) * th_p / th + 2 * eta_w

    def wp(self, z):
        """Weierstrass p-function, the negative derivative of zeta."""
        z0, _, _ = self._reduce(z)
        self._check_pole(z0, "z", z)
        (th, th_p, th_pp), _ = self._theta(z0, 2, magnitude=False)
        k = np.pi / (2 * self._w1)
        return -self._eta_r1 / self._w1 + k * k * (th_p * th_p - th * th_pp) / (th * th)

    def wp_prime(self, z):
        """Derivative of wp."""
        z0, _, _ = self._reduce(z)
        self._check_pole(z0, "z", z)
        return self._wp_prime_cell(z0)

    def _wp_prime_cell(self, z0):
        # z0 already reduced and checked against the poles
        (th, th_p, th_pp, th_ppp), _ = self._theta(z0, 3, magnitude=False)
        k = np.pi / (2 * self._w1)
        lp = th_p / th
        # (log theta)''' = th'''/th - 3 th' th''/th^2 + 2 (th'/th)^3
        l3 = th_ppp / th - 3 * lp * th_pp / th + 2 * lp ** 3
        return -(k ** 3) * l3

    def rho0(self, x, z):
        """rho0(x, z) = sigma(z - x) / (sigma(z) sigma(x)); simple pole in z at 0."""
        x = np.asarray(x, dtype=complex)
        z = np.asarray(z, dtype=complex)
        self._check_pole(self._reduce(x)[0], "x", x)
        self._check_pole(self._reduce(z)[0], "z", z)
        return self.sigma(z - x) / (self.sigma(z) * self.sigma(x))

    def rho1(self, x, z):
        """rho1(x, z) = exp(x zeta(z)) rho0(x, z); vanishes at z = x."""
        x = np.asarray(x, dtype=complex)
        return np.exp(x * self.zeta(z)) * self.rho0(x, z)

    def rho0_scaled(self, x, n, z):
        """rho0(x, n z), the pull-back of rho0 under multiplication by n."""
        if int(n) != n or n < 1:
            raise ValueError("n must be a positive integer")
        z = np.asarray(z, dtype=complex)
        try:
            return self.rho0(x, n * z)
        except PoleProximityError as err:
            raise PoleProximityError(
                f"n*z hits a lattice point: z is within the exclusion radius of an "
                f"{int(n)}-torsion point ({err})", argument=err.argument,
                distance=err.distance) from None

    def drho0_dx(self, x, z, n=1):
        """Partial derivative d rho0 / dx evaluated at (x, n z), in closed form.

        Uses d/dx sigma(w - x)/(sigma(w) sigma(x))
        = -(sigma'(w - x) + sigma(w - x) zeta(x)) / (sigma(w) sigma(x)).
        """
        if int(n) != n or n < 1:
            raise ValueError("n must be a positive integer")
        x = np.asarray(x, dtype=complex)
        w = n * np.asarray(z, dtype=complex)
        self._check_pole(self._reduce(x)[0], "x", x)
        try:
            self._check_pole(self._reduce(w)[0], "n*z", w)
        except PoleProximityError as err:
            raise PoleProximityError(
                f"z is within the exclusion radius of an {int(n)}-torsion point "
                f"({err})", argument=err.argument, distance=err.distance) from None
        s, ds = self._sigma_raw(w - x)[:2]
        return -(ds + s * self.zeta(x)) / (self.sigma(w) * self.sigma(x))

    def drho0_dx_origin(self, x):
        """Finite part of d rho0/dx as z -> 0, i.e. d^2/dx^2 log sigma(x) = -wp(x)."""
        return -self.wp(x)

    # -- error estimates ---------------------------------------------------

    def _est(self, value, mag, expo=0.0):
        value = np.asarray(value)
        abs_err = np.abs(value) * (self._tail + 8 * EPS * (1 + expo)) + 8 * EPS * mag
        return abs_err / np.maximum(np.abs(value), 1.0)


def lattice_new(omega1, omega2, accuracy_target=1e-12):
    """Construct a :class:`Lattice`; the generators are reoriented if needed."""
    return Lattice(omega1, omega2, accuracy_target)


def _ev(value, err):
    if np.ndim(value) == 0:
        return EllipticValue(complex(value), float(err))
    return EllipticValue(value, err)


def sigma(L, z):
    """sigma(z) with error estimate."""
    val, _, mag, expo = L._sigma_raw(z)
    return _ev(val, L._est(val, mag, expo))


def zeta(L, z):
    """zeta(z) with error estimate; raises near poles."""
    val = L.zeta(z)
    z0 = L._reduce(z)[0]
    d = L._check_pole(z0)
    mag = np.abs(val) + 1.0 / d[()] * abs(1.0)
    return _ev(val, L._est(val, mag))


def wp(L, z):
    """wp(z) with error estimate; raises near poles."""
    val = L.wp(z)
    d = L._check_pole(L._reduce(z)[0])
    mag = np.abs(val) + 1.0 / d ** 2
    return _ev(val, L._est(val, mag))


def wp_prime(L, z):
    """wp'(z) with error estimate; raises near poles."""
    val = L.wp_prime(z)
    d = L._check_pole(L._reduce(z)[0])
    mag = np.abs(val) + 1.0 / d ** 3
    return _ev(val, L._est(val, mag))


def rho0(L, x, z):
    """rho0(x, z) with error estimate."""
    val = L.rho0(x, z)
    dz = L._check_pole(L._reduce(z)[0])
    return _ev(val, L._est(val, np.abs(val) * 4 + 1.0 / dz))


def rho1(L, x, z):
    """rho1(x, z) with error estimate."""
    val = L.rho1(x, z)
    expo = np.abs(np.asarray(x) * L.zeta(z))
    return _ev(val, L._est(val, np.abs(val) * 4, expo))


def rho0_scaled(L, x, n, z):
    """rho0(x, n z) with error estimate."""
    val = L.rho0_scaled(x, n, z)
    dz = L._check_pole(L._reduce(n * np.asarray(z, dtype=complex))[0])
    return _ev(val, L._est(val, np.abs(val) * 4 + 1.0 / dz))


def drho0_dx(L, x, n, z):
    """d rho0/dx at (x, n z) with error estimate."""
    val = L.drho0_dx(x, z, n)
    w = n * np.asarray(z, dtype=complex)
    dz = L._check_pole(L._reduce(w)[0])
    mag = np.abs(val) * 4 + np.abs(L.rho0(x, w)) * (1.0 / dz + np.abs(L.zeta(x)))
    return _ev(val, L._est(val, mag))


# -- identity suite -------------------------------------------------------------


def _cauchy_derivative(f, z, radius, n=64):
    """f'(z) from the trapezoid rule on a circle; geometric convergence for analytic f."""
    th = np.exp(2j * np.pi * np.arange(n) / n)
    w = np.asarray(z)[..., None] + np.asarray(radius)[..., None] * th
    return np.mean(f(w) / th, axis=-1) / radius


def _constant_term(f, radius, n=64):
    """(1/2 pi i) oint f(w)/w dw on |w| = radius: the z^0 coefficient of a Laurent series at 0."""
    th = np.exp(2j * np.pi * np.arange(n) / n)
    return np.mean(f(radius * th), axis=-1)


def sample_points(L, n, rng, margin=0.15):
    """Random points of the centred cell, at least margin * min_period away from the lattice."""
    out = []
    while len(out) < n:
        a, b = rng.uniform(-0.5, 0.5, 2)
        z = 2 * a * L._w1 + 2 * b * L._w2
        if np.min(np.abs(L._reduce(z)[0] - L._cell)) > margin * L.min_period:
            out.append(z)
    return np.array(out)


def _rel(lhs, rhs, scale=None):
    lhs, rhs = np.asarray(lhs), np.asarray(rhs)
    s = np.maximum(np.abs(rhs), np.abs(lhs)) if scale is None else np.asarray(scale)
    return float(np.max(np.abs(lhs - rhs) / np.maximum(s, 1e-300)))


def identity_suite(L: Lattice, n_points=100, rng=None):
    """Maximal relative error of each defining identity of the elliptic kernel.

    Returns an ordered dict ``name -> error``.  Derivatives and Laurent
    coefficients are computed independently by contour integrals, so the
    closed forms are not checked against themselves.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    z = sample_points(L, n_points, rng)
    x = sample_points(L, n_points, rng)
    tiny = 1e-3 * L.min_period * np.exp(2j * np.pi * rng.uniform(size=n_points))
    out = {}
    out["sigma(z) = z + O(z^5)"] = _rel(L.sigma(tiny) / tiny, 1.0, 1.0)
    out["zeta(z) = 1/z + O(z^3)"] = _rel(tiny * L.zeta(tiny), 1.0, 1.0)
    d = np.min(np.abs(L._reduce(z)[0][:, None] - L._cell), axis=1)
    out["zeta' = -wp"] = _rel(-_cauchy_derivative(L.zeta, z, 0.5 * d), L.wp(z))
    out["wp' = d wp/dz"] = _rel(_cauchy_derivative(L.wp, z, 0.5 * d), L.wp_prime(z))
    for name, w, eta in (("1", L.omega1, L.eta1), ("2", L.omega2, L.eta2)):
        out[f"zeta(z + 2 omega{name}) = zeta(z) + 2 eta{name}"] = _rel(
            L.zeta(z + 2 * w) - L.zeta(z), 2 * eta, np.abs(L.zeta(z)) + abs(eta))
        out[f"sigma(z + 2 omega{name}) = -exp(2 eta{name} (z + omega{name})) sigma(z)"] = _rel(
            L.sigma(z + 2 * w), -np.exp(2 * eta * (z + w)) * L.sigma(z))
        out[f"wp(z + 2 omega{name}) = wp(z)"] = _rel(L.wp(z + 2 * w), L.wp(z))
        out[f"rho0(x, z + 2 omega{name}) = exp(-2 eta{name} x) rho0(x, z)"] = _rel(
            L.rho0(x, z + 2 * w), np.exp(-2 * eta * x) * L.rho0(x, z))
        for n in (2, 3):
            out[f"rho0(x, n(z + 2 omega{name})) = exp(-2 n eta{name} x) rho0(x, nz), n={n}"] = _rel(
                L.rho0(x, n * (z + 2 * w)), np.exp(-2 * n * eta * x) * L.rho0(x, n * z))
    # eta1 here comes from an Eisenstein series, not from the theta route
    out["Legendre: eta1 omega2 - eta2 omega1 = i pi/2"] = L.legendre_residual / (np.pi / 2)
    out["parity: sigma, zeta odd; wp even"] = max(
        _rel(L.sigma(-z), -L.sigma(z)), _rel(L.zeta(-z), -L.zeta(z)), _rel(L.wp(-z), L.wp(z)))
    out["rho0 = exp(-x zeta(z)) rho1"] = _rel(L.rho0(x, z), np.exp(-x * L.zeta(z)) * L.rho1(x, z))
    out["rho1(x, x) = 0"] = float(np.max(np.abs(L.rho1(x, x + 0.0)) / np.abs(L.rho1(x, z))))

    dx = np.min(np.abs(L._reduce(x)[0][:, None] - L._cell), axis=1)
    zz = z[:, None]
    d_rho1 = _cauchy_derivative(lambda xs: L.rho1(xs, zz), x, 0.5 * dx)
    rhs = np.exp(-x * L.zeta(z)) * d_rho1 - L.drho0_dx(x, z)
    out["zeta(z) rho0 = exp(-x zeta) d rho1/dx - d rho0/dx"] = _rel(L.zeta(z) * L.rho0(x, z), rhs)
    r0 = 0.5 * L.min_period
    xx = x[:, None]
    out["rho0(x, z) = -1/z + zeta(x) + O(z)"] = _rel(
        _constant_term(lambda w: L.rho0(xx, w), r0), L.zeta(x))
    out["d rho0/dx (x, z) = (log sigma)''(x) + O(z)"] = _rel(
        _constant_term(lambda w: L.drho0_dx(xx, w), r0), -L.wp(x))
    th = np.exp(2j * np.pi * np.arange(64) / 64)
    res = np.mean(L.rho0(xx, r0 * th) * r0 * th, axis=-1)
    out["res_0 rho0(x, .) = -1"] = _rel(res, -1.0, 1.0)
    sc = np.abs(L.wp(z)) + np.abs(L.wp(x))
    out["rho0(x,z) rho0(-x,z) = wp(z) - wp(x)"] = _rel(L.rho0(x, z) * L.rho0(-x, z), L.wp(z) - L.wp(x), sc)
    out["rho1(x,z) rho1(-x,z) = wp(z) - wp(x)"] = _rel(L.rho1(x, z) * L.rho1(-x, z), L.wp(z) - L.wp(x), sc)
    for n in (2, 3):
        hat = lambda xs, n=n: np.exp(n * xs * L.zeta(zz)) * L.rho0(xs, n * zz)
        d_hat = _cauchy_derivative(hat, x, 0.5 * dx)
        rhs = np.exp(-n * x * L.zeta(z)) * d_hat - L.drho0_dx(x, z, n)
        out[f"n zeta(z) rho0(x, nz) = exp(-n x zeta) d hat-rho1/dx - d rho0/dx (x, nz), n={n}"] = _rel(
            n * L.zeta(z) * L.rho0(x, n * z), rhs)
    return out
