"""Calogero-Moser phase space, equations of motion, integration and reduced Higgs data.

The Hamiltonian is ``H = p.p - sum_alpha c_alpha^2 V(alpha(x))`` with the sum
over *all* roots, and the equations of motion are

    dx/dt = p,      dp/dt = 1/2 sum_alpha c_alpha^2 V'(alpha(x)) alpha,

i.e. the Hamiltonian flow of ``H/2``; this is the normalization produced
by the coadjoint flow on the reduced Higgs field (see ``reduced_flow_check``).
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import DOP853

from .elliptic import Lattice
from .errors import StepSizeUnderflowError, WallProximityError
from .rootsys import CouplingSpec, RootSystem

POTENTIALS = ("elliptic", "trigonometric", "rational")
WALL_FRACTION = 1e-4


class CMSystem:
    """A Calogero-Moser system: root system, couplings and potential.

    Parameters
    ----------
    rs : RootSystem
    couplings : CouplingSpec or anything accepted by it (scalar, per-class list, mapping)
    potential : "elliptic", "trigonometric" or "rational"
    lattice : Lattice, required for the elliptic potential
    """

    def __init__(self, rs: RootSystem, couplings, potential="elliptic", lattice: Lattice | None = None):
        if potential not in POTENTIALS:
            raise ValueError(f"potential must be one of {POTENTIALS}")
        if potential == "elliptic" and lattice is None:
            raise ValueError("the elliptic potential needs a Lattice")
        self.rs = rs
        self.couplings = couplings if isinstance(couplings, CouplingSpec) else CouplingSpec(rs, couplings)
        if self.couplings.rs != rs:
            raise ValueError("couplings were built for a different root system")
        self.potential = potential
        self.lattice = lattice
        c2 = self.couplings.per_root ** 2
        self.c2 = c2.real if np.all(c2.imag == 0) else c2
        self.scale = lattice.min_period if potential == "elliptic" else (np.pi if potential == "trigonometric" else 1.0)

    def __repr__(self):
        return f"CMSystem({self.rs!r}, c={list(self.couplings.c)}, potential={self.potential!r})"

    @property
    def rank(self):
        return self.rs.rank

    def root_values(self, x):
        return np.asarray(x) @ self.rs.action_matrix

    def wall_distances(self, x):
        """Distance of each alpha(x) to the nearest pole of the potential."""
        u = self.root_values(x)
        if self.potential == "elliptic":
            z0, _, _ = self.lattice._reduce(u)
            return np.min(np.abs(z0[..., None] - self.lattice._cell), axis=-1)
        if self.potential == "trigonometric":
            return np.abs(u - np.pi * np.round(np.real(u) / np.pi))
        return np.abs(u)

    def check_walls(self, x, t=None):
        d = self.wall_distances(x)
        k = int(np.argmin(d))
        if d[k] < WALL_FRACTION * self.scale:
            u = self.root_values(x)[k]
            raise WallProximityError(
                f"alpha(x) = {complex(u):.3g} is within {WALL_FRACTION:g} x scale of a wall "
                f"(root {self.rs.roots[k].round(6).tolist()}, t = {t})",
                root=self.rs.roots[k], value=complex(u), t=t)

    def V(self, u):
        if self.potential == "elliptic":
            return self.lattice.wp(u)
        if self.potential == "trigonometric":
            return 1.0 / np.sin(u) ** 2
        return 1.0 / u ** 2

    def dV(self, u):
        if self.potential == "elliptic":
            return self.lattice.wp_prime(u)
        if self.potential == "trigonometric":
            return -2.0 * np.cos(u) / np.sin(u) ** 3
        return -2.0 / u ** 3

    def _real(self, v, complex_ok):
        if complex_ok:
            return v
        if np.max(np.abs(np.imag(v)), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(v), initial=0.0)):
            raise ValueError("real state produced complex forces; pass complex_state=True")
        return np.real(v)

    def force(self, x, complex_state=False):
        u = self.root_values(x)
        f = 0.5 * self.rs.action_matrix @ (self.c2 * self.dV(u))
        return self._real(f, complex_state)

    def _checked_force(self, x, t, complex_state):
        """check_walls followed by force, sharing one lattice reduction (integrator hot path)."""
        if self.potential != "elliptic":
            self.check_walls(x, t)
            return self.force(x, complex_state)
        lat = self.lattice
        u = self.root_values(x)
        z0, _, _ = lat._reduce(u)
        d = np.min(np.abs(z0[..., None] - lat._cell), axis=-1)
        if np.min(d) < WALL_FRACTION * self.scale:
            self.check_walls(x, t)
        f = 0.5 * self.rs.action_matrix @ (self.c2 * lat._wp_prime_cell(z0))
        return self._real(f, complex_state)

    def potential_energy(self, x, complex_state=False):
        u = self.root_values(x)
        return self._real(-np.sum(self.c2 * self.V(u)), complex_state)


@dataclass(frozen=True)
class PhaseState:
    """Canonical coordinates (x, p) at time t."""

    x: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x)
        p = np.asarray(self.p)
        if x.shape != p.shape or x.ndim != 1:
            raise ValueError("x and p must be 1-d arrays of equal length")
        object.__setattr__(self, "x", x if np.iscomplexobj(x) else x.astype(float))
        object.__setattr__(self, "p", p if np.iscomplexobj(p) else p.astype(float))

    def act(self, w):
        """Weyl (or any orthogonal) transformation of the state."""
        return PhaseState(w @ self.x, w @ self.p, self.t)


def _check_dim(sys, s):
    if len(s.x) != sys.rank:
        raise ValueError(f"state has dimension {len(s.x)}, system rank is {sys.rank}")


def cm_hamiltonian(sys: CMSystem, s: PhaseState):
    """H = p.p - sum over roots of c^2 V(alpha(x))."""
    _check_dim(sys, s)
    sys.check_walls(s.x, s.t)
    cplx = np.iscomplexobj(s.x) or np.iscomplexobj(s.p) or np.iscomplexobj(sys.c2)
    return s.p @ s.p + sys.potential_energy(s.x, complex_state=cplx)


def cm_vector_field(sys: CMSystem, s: PhaseState):
    """(dx/dt, dp/dt) = (p, 1/2 sum c^2 V'(alpha(x)) alpha)."""
    _check_dim(sys, s)
    sys.check_walls(s.x, s.t)
    cplx = np.iscomplexobj(s.x) or np.iscomplexobj(s.p) or np.iscomplexobj(sys.c2)
    return s.p.copy(), sys.force(s.x, complex_state=cplx)


@dataclass
class Controls:
    """Integrator settings.

    ``method`` is "dop853" (adaptive, 8th order) or "yoshida" (fixed-step,
    4th-order symmetric composition of leapfrog with step ``h``).
    """

    method: str = "dop853"
    rtol: float = 1e-12
    atol: float = 1e-12
    h: float = 1e-3
    max_step: float = np.inf
    first_step: float | None = None
    n_samples: int = 201
    drift_bound: float = 1e-8
    min_step: float = 1e-12
    t_eval: np.ndarray | None = None
    complex_state: bool = False

    def __post_init__(self):
        for name in ("rtol", "atol", "h", "drift_bound"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


@dataclass
class Trajectory:
    """Sampled states with integrator metadata and an energy log."""

    t: np.ndarray
    x: np.ndarray
    p: np.ndarray
    H: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.t)

    def state(self, k) -> PhaseState:
        return PhaseState(self.x[k], self.p[k], float(self.t[k]))

    @property
    def final(self) -> PhaseState:
        return self.state(-1)

    @property
    def energy_drift(self):
        h0 = self.H[0]
        return float(np.max(np.abs(self.H - h0)) / max(abs(h0), np.finfo(float).tiny))

    def rows(self):
        for k in range(len(self.t)):
            yield [self.t[k], *np.real(self.x[k]), *np.real(self.p[k]), np.real(self.H[k])]

    def header(self):
        r = self.x.shape[1]
        return ["t"] + [f"x{i + 1}" for i in range(r)] + [f"p{i + 1}" for i in range(r)] + ["H"]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])

    def to_jsonl(self, path):
        with open(path, "w") as fh:
            fh.write(json.dumps({"meta": self.meta}, sort_keys=True, default=str) + "\n")
            for row in self.rows():
                fh.write(json.dumps(dict(zip(self.header(), map(float, row)))) + "\n")


# Yoshida's 4th-order triple-jump coefficients
_Y1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_Y0 = 1.0 - 2.0 * _Y1


def _leapfrog(sys, x, p, h, cplx):
    p = p + 0.5 * h * sys.force(x, cplx)
    x = x + h * p
    p = p + 0.5 * h * sys.force(x, cplx)
    return x, p


def _yoshida(sys, s0, T, ctl, cplx):
    n = max(1, int(np.ceil(abs(T) / ctl.h)))
    h = T / n
    every = max(1, n // max(1, ctl.n_samples - 1))
    x, p = s0.x.astype(complex if cplx else float), s0.p.astype(complex if cplx else float)
    ts, xs, ps = [0.0], [x.copy()], [p.copy()]
    for k in range(1, n + 1):
        for a in (_Y1, _Y0, _Y1):
            x, p = _leapfrog(sys, x, p, a * h, cplx)
        try:
            sys.check_walls(x, s0.t + k * h)
        except WallProximityError as err:
            err.partial_raw = (np.array(ts), np.array(xs), np.array(ps))
            raise
        if k % every == 0 or k == n:
            ts.append(k * h)
            xs.append(x.copy())
            ps.append(p.copy())
    meta = {"method": "yoshida4", "step_size": h, "accepted_steps": n, "rejected_steps": 0,
            "nfev": 6 * n}
    return np.array(ts), np.array(xs), np.array(ps), meta


def _dop853(sys, s0, T, ctl, cplx):
    r = sys.rank
    y0 = np.concatenate([s0.x, s0.p]).astype(complex if cplx else float)

    def rhs(t, y):
        return np.concatenate([y[r:], sys._checked_force(y[:r], s0.t + t, cplx)])

    if ctl.t_eval is not None:
        grid = np.asarray(ctl.t_eval, dtype=float)
    else:
        grid = np.linspace(0.0, T, max(2, ctl.n_samples))
    solver = DOP853(rhs, 0.0, y0, T, rtol=ctl.rtol, atol=ctl.atol, max_step=ctl.max_step,
                    first_step=ctl.first_step)
    out = [y0.copy()]
    k = 1
    accepted = 0
    steps = []
    sgn = 1.0 if T >= 0 else -1.0
    while solver.status == "running":
        try:
            msg = solver.step()
        except WallProximityError as err:
            Y = np.array(out)
            err.partial_raw = (grid[: len(Y)], Y[:, :r], Y[:, r:])
            raise
        if solver.status == "failed":
            raise StepSizeUnderflowError(f"integration failed at t = {solver.t:.6g}: {msg}")
        accepted += 1
        steps.append(abs(solver.step_size))
        if abs(solver.step_size) < ctl.min_step * max(1.0, abs(T)) and solver.status == "running":
            raise StepSizeUnderflowError(
                f"step size {solver.step_size:.3g} below minimum at t = {solver.t:.6g}")
        dense = None
        while k < len(grid) and sgn * grid[k] <= sgn * solver.t:
            if dense is None:
                dense = solver.dense_output()
            out.append(dense(grid[k]) if grid[k] != solver.t else solver.y.copy())
            k += 1
    Y = np.array(out)
    # DOP853: 12 evaluations per attempt, two for the initial step guess
    attempts = max(accepted, int(round((solver.nfev - 2) / 12)))
    meta = {"method": "DOP853", "rtol": ctl.rtol, "atol": ctl.atol, "accepted_steps": accepted,
            "rejected_steps": attempts - accepted, "nfev": int(solver.nfev),
            "step_size_min": float(min(steps)) if steps else 0.0,
            "step_size_max": float(max(steps)) if steps else 0.0}
    return grid[: len(Y)], Y[:, :r], Y[:, r:], meta


def _assemble(sys, s0, T, t, x, p, meta):
    H = np.array([cm_hamiltonian(sys, PhaseState(xi, pi)) for xi, pi in zip(x, p)])
    order = np.argsort(t) if T < 0 else slice(None)
    return Trajectory(s0.t + t[order], x[order], p[order], H[order], meta)


def integrate(sys: CMSystem, s0: PhaseState, T: float, controls: Controls | None = None) -> Trajectory:
    """Integrate the Calogero-Moser flow from s0 over [0, T] (T may be negative).

    Raises :class:`WallProximityError` if the trajectory approaches a wall and
    :class:`StepSizeUnderflowError` if the adaptive step collapses.
    """
    ctl = controls or Controls()
    _check_dim(sys, s0)
    sys.check_walls(s0.x, s0.t)
    cplx = ctl.complex_state or np.iscomplexobj(s0.x) or np.iscomplexobj(s0.p) or np.iscomplexobj(sys.c2)
    if T == 0:
        raise ValueError("T must be nonzero")
    if ctl.method not in ("dop853", "yoshida"):
        raise ValueError(f"unknown method {ctl.method!r}")
    try:
        if ctl.method == "dop853":
            t, x, p, meta = _dop853(sys, s0, T, ctl, cplx)
        else:
            t, x, p, meta = _yoshida(sys, s0, T, ctl, cplx)
    except WallProximityError as err:
        # the samples reached before the wall stay available to callers
        t, x, p = err.partial_raw
        err.partial = _assemble(sys, s0, T, t, x, p, {"method": ctl.method, "T": T, "stopped_at": err.t})
        raise
    traj = _assemble(sys, s0, T, t, x, p, meta)
    meta["energy_drift"] = traj.energy_drift
    meta["T"] = T
    if traj.energy_drift > ctl.drift_bound:
        warnings.warn(f"relative energy drift {traj.energy_drift:.3g} exceeds bound {ctl.drift_bound:g}",
                      RuntimeWarning, stacklevel=2)
    return traj


def flow_map(sys, s0, T, controls=None) -> PhaseState:
    """End state of the flow after time T."""
    traj = integrate(sys, s0, T, controls)
    return traj.state(0) if T < 0 else traj.final


# -- reduced Higgs field ----------------------------------------------------


@dataclass(frozen=True)
class ReducedHiggs:
    """Higgs data on the reduced space: phi_alpha(z) = c_alpha rho0(alpha(x), z), phi_h = p.

    The residue of phi_alpha at z = 0 is -c_alpha (fixed convention).
    """

    sys: CMSystem
    x_ref: np.ndarray
    phi_h: np.ndarray

    def phi_r(self, z):
        u = self.sys.root_values(self.x_ref)
        return self.sys.couplings.per_root * self.sys.lattice.rho0(u, z)

    @property
    def residue(self):
        return -self.sys.couplings.per_root

    def coboundary(self, z):
        """U_0-part of zeta(z) phi(z) on the root lines: -c_alpha d rho0/dx (alpha(x), z)."""
        u = self.sys.root_values(self.x_ref)
        return -self.sys.couplings.per_root * self.sys.lattice.drho0_dx(u, z)

    def transition(self, z):
        """Diagonal transition function exp(alpha(x) zeta(z)) on the root lines."""
        return np.exp(self.sys.root_values(self.x_ref) * self.sys.lattice.zeta(z))

    def quadratic(self, z):
        """<phi(z), phi(z)> for the unit pairing."""
        g = self.phi_r(z)
        return np.sum(g * g[self.sys.rs.involution]) + self.phi_h @ self.phi_h


def reduced_higgs(sys: CMSystem, s: PhaseState) -> ReducedHiggs:
    if sys.potential != "elliptic":
        raise ValueError("the reduced Higgs field needs the elliptic potential")
    sys.check_walls(s.x, s.t)
    return ReducedHiggs(sys, np.asarray(s.x), np.asarray(s.p))


def contour_residue(f, radius, n=64, center=0.0):
    """Residue at center of a function holomorphic on a punctured disc, by the trapezoid rule."""
    theta = 2 * np.pi * (np.arange(n) + 0.5) / n
    z = center + radius * np.exp(1j * theta)
    vals = np.array([f(zk) for zk in z])
    w = (z - center) / n
    return np.tensordot(w, vals, axes=(0, 0))


def default_radius(lattice: Lattice, n_max=1):
    return 0.4 * lattice.min_period / n_max


def pairing_residue(higgs: ReducedHiggs, n=64):
    """res_{z=0} zeta(z) <phi(z), phi(z)>, which equals the Hamiltonian."""
    L = higgs.sys.lattice
    return contour_residue(lambda z: L.zeta(z) * higgs.quadratic(z), default_radius(L), n)


def reduced_flow_prediction(sys: CMSystem, s: PhaseState, z=None):
    """(dx/dt, dp/dt) predicted by the coadjoint flow of the coboundary on phi.

    dx/dt is the torus component phi_h; dp/dt is the torus part of
    coad((omega phi)^0_r, phi^0), evaluated at a sample point z (the result
    does not depend on z).
    """
    from .semidirect import GCoElement, GElement, coad

    hig = reduced_higgs(sys, s)
    if z is None:
        z = 0.37 * sys.lattice.omega1 + 0.21 * sys.lattice.omega2
    X = GElement(sys.rs, hig.coboundary(z), np.zeros(sys.rank))
    xi = GCoElement(sys.rs, hig.phi_r(z), hig.phi_h)
    dp = coad(sys.rs, X, xi).tau
    return hig.phi_h.copy(), dp


def reduced_flow_check(sys: CMSystem, s: PhaseState, z=None) -> float:
    """Max componentwise discrepancy between the coadjoint-flow prediction and cm_vector_field."""
    dx_pred, dp_pred = reduced_flow_prediction(sys, s, z)
    dx, dp = cm_vector_field(sys, s)
    return float(max(np.max(np.abs(dx_pred - dx)), np.max(np.abs(dp_pred - dp))))


def random_state(sys: CMSystem, rng, p_scale=1.0, margin=0.05):
    """A random real state away from the walls (distance > margin * scale)."""
    for _ in range(10000):
        if sys.potential == "elliptic":
            x = rng.uniform(-0.5, 0.5, sys.rank) * sys.lattice.min_period
        else:
            x = rng.uniform(-1.0, 1.0, sys.rank)
        if np.min(sys.wall_distances(x)) > margin * sys.scale:
            return PhaseState(x, p_scale * rng.standard_normal(sys.rank))
    raise RuntimeError("could not find a state off the walls")
