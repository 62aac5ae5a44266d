"""Command-line front end: ``cm <subcommand> [--config run.json] [overrides]``.

Every flag overrides a key of the JSON run configuration (see ``DEFAULTS``).
Exit status: 0 success, 1 verification failure (the report names the first
violated invariant and its measured value), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import lax
from .dynamics import CMSystem, Controls, PhaseState, integrate, random_state
from .elliptic import Lattice, identity_suite
from .errors import CMError, DegenerateLatticeError, UnsupportedRepresentationError, WallProximityError
from .rootsys import check_w_invariant_orbit, named_rep, root_system
from .semidirect import GCoElement, orbit_dimension

DEFAULTS = {
    "system": {"root_system": "A:2", "couplings": "1i", "potential": "elliptic",
               "lattice": ["0.5", "0.5i"]},
    "representation": "standard",
    "builder": "dhp",
    "state": {"x": None, "p": None},
    "integration": {"T": 1.0, "method": "dop853", "rtol": 1e-12, "atol": 1e-12, "h": 1e-3,
                    "n_samples": 201, "drift_bound": 1e-8},
    "verification": {"z": None, "n_z": 5, "n_states": 1, "k_max": None, "tol": 1e-6,
                     "n_points": 100, "z_grid": None},
    "seed": 0,
    "output": {"path": None, "format": None},
}

SCHEMA_HELP = """run configuration (JSON), all keys optional:
  system.root_system     "A:2", "B:3", "G2", ...
  system.couplings       number, list per length class, or {"short": .., "long": ..};
                         complex values as strings like "0.5i"
  system.potential       elliptic | trigonometric | rational
  system.lattice         [omega1, omega2] half-periods
  representation         standard | vector | roots | short | long | middle | [[weights]]
  builder                dhp | bcs
  state.x, state.p       lists; random (seeded) if absent
  integration            T, method (dop853|yoshida), rtol, atol, h, n_samples, drift_bound
  verification           z (list), n_z, n_states, k_max, tol, n_points, z_grid
  seed                   integer seed of every random draw
  output.path, .format   file to write; csv | jsonl | json
"""


class ConfigError(ValueError):
    pass


def parse_complex(s):
    if isinstance(s, (int, float, complex)):
        return complex(s)
    if isinstance(s, (list, tuple)) and len(s) == 2:
        return complex(float(s[0]), float(s[1]))
    t = str(s).strip().replace(" ", "").replace("i", "j")
    if t.endswith("j") and t[:-1] in ("", "+", "-"):
        t = t[:-1] + "1j"
    try:
        return complex(t)
    except ValueError:
        raise ConfigError(f"cannot parse complex number {s!r}") from None


def _list(s):
    if s is None:
        return None
    if isinstance(s, str):
        return [v for v in s.split(",") if v.strip()]
    return list(s)


def _real_or_complex(vals):
    z = np.array([parse_complex(v) for v in vals])
    return z.real.copy() if np.all(z.imag == 0) else z


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(u) for k, u in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(u) for u in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)] if v.imag != 0 else float(v.real)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def emit(report, path=None):
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _merge(base, over):
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _merge(base[k], v)
        else:
            base[k] = v
    return base


# flag name -> (config path, converter)
_FLAGS = {
    "system": (("system", "root_system"), str),
    "c": (("system", "couplings"), _list),
    "potential": (("system", "potential"), str),
    "lattice": (("system", "lattice"), _list),
    "rep": (("representation",), str),
    "builder": (("builder",), str),
    "x": (("state", "x"), _list),
    "p": (("state", "p"), _list),
    "T": (("integration", "T"), float),
    "method": (("integration", "method"), str),
    "rtol": (("integration", "rtol"), float),
    "atol": (("integration", "atol"), float),
    "h": (("integration", "h"), float),
    "n_samples": (("integration", "n_samples"), int),
    "drift_bound": (("integration", "drift_bound"), float),
    "z": (("verification", "z"), lambda s: [v for v in s.split(",") if v]),
    "n_z": (("verification", "n_z"), int),
    "n_states": (("verification", "n_states"), int),
    "k_max": (("verification", "k_max"), int),
    "tol": (("verification", "tol"), float),
    "n_points": (("verification", "n_points"), int),
    "seed": (("seed",), int),
    "out": (("output", "path"), str),
    "format": (("output", "format"), str),
}


def build_config(args):
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                _merge(cfg, json.load(fh))
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {args.config}: {err}") from None
    for flag, (path, conv) in _FLAGS.items():
        val = getattr(args, flag, None)
        if val is None:
            continue
        node = cfg
        for key in path[:-1]:
            node = node[key]
        node[path[-1]] = conv(val)
    for k in ("rtol", "atol", "h", "drift_bound"):
        if not float(cfg["integration"][k]) > 0:
            raise ConfigError(f"integration.{k} must be > 0")
    if not float(cfg["verification"]["tol"]) > 0:
        raise ConfigError("verification.tol must be > 0")
    return cfg


def make_lattice(cfg):
    lat = cfg["system"]["lattice"]
    if lat is None or len(lat) != 2:
        raise ConfigError("system.lattice must be two half-periods")
    try:
        return Lattice(parse_complex(lat[0]), parse_complex(lat[1]))
    except DegenerateLatticeError as err:
        raise ConfigError(str(err)) from None


def make_system(cfg):
    s = cfg["system"]
    try:
        rs = root_system(s["root_system"])
    except (ValueError, KeyError, TypeError) as err:
        raise ConfigError(f"bad system.root_system: {err}") from None
    c = s["couplings"]
    if isinstance(c, dict):
        c = {k: parse_complex(v) for k, v in c.items()}
    elif isinstance(c, (list, tuple)):
        c = [parse_complex(v) for v in c]
        c = c[0] if len(c) == 1 else c
    else:
        c = parse_complex(c)
    lattice = make_lattice(cfg) if s["potential"] == "elliptic" else None
    try:
        return CMSystem(rs, c, s["potential"], lattice)
    except ValueError as err:
        raise ConfigError(str(err)) from None


def make_rep(cfg, rs):
    try:
        return named_rep(rs, cfg["representation"])
    except ValueError as err:
        raise ConfigError(str(err)) from None


def make_states(cfg, sys_, rng, n=1):
    st = cfg["state"]
    if st.get("x") is not None:
        x, p = _real_or_complex(st["x"]), _real_or_complex(st.get("p") or [0] * len(st["x"]))
        if len(x) != sys_.rank or len(p) != sys_.rank:
            raise ConfigError(f"state.x and state.p need {sys_.rank} entries")
        first = [PhaseState(x, p)]
    else:
        first = []
    return first + [random_state(sys_, rng, margin=0.1) for _ in range(n - len(first))]


def make_controls(cfg, **kw):
    it = cfg["integration"]
    return Controls(method=it["method"], rtol=float(it["rtol"]), atol=float(it["atol"]), h=float(it["h"]),
                    n_samples=int(it["n_samples"]), drift_bound=float(it["drift_bound"]), **kw)


def _z_samples(cfg, lattice, rng):
    v = cfg["verification"]
    if v["z"]:
        return [parse_complex(z) for z in v["z"]]
    # |z| between 0.2 and 0.4 of the shortest period, random phase
    r = lattice.min_period * rng.uniform(0.2, 0.4, int(v["n_z"]))
    return list(r * np.exp(2j * np.pi * rng.uniform(size=len(r))))


def _workers():
    try:
        return max(1, int(os.environ.get("CM_THREADS", "1")))
    except ValueError:
        return 1


def _fail(report, name, value):
    report["passed"] = False
    report.setdefault("violated", {"invariant": name, "value": value})


# -- subcommands ------------------------------------------------------------------


def cmd_elliptic_check(cfg, args):
    lat = make_lattice(cfg)
    tol = float(cfg["verification"]["tol"]) if args.tol is not None else 1e-10
    rng = np.random.default_rng(int(cfg["seed"]))
    res = identity_suite(lat, int(cfg["verification"]["n_points"]), rng)
    rep = {"command": "elliptic-check", "lattice": [lat.omega1, lat.omega2], "tol": tol,
           "seed": cfg["seed"], "nome": lat.nome, "passed": True,
           "checks": [{"identity": k, "max_rel_error": v, "passed": v < tol} for k, v in res.items()]}
    for k, v in res.items():
        if not v < tol:
            _fail(rep, k, v)
    return rep


def cmd_simulate(cfg, args):
    sys_ = make_system(cfg)
    rng = np.random.default_rng(int(cfg["seed"]))
    s0 = make_states(cfg, sys_, rng)[0]
    T = float(cfg["integration"]["T"])
    out = cfg["output"]["path"]
    fmt = cfg["output"]["format"] or ("jsonl" if out and out.endswith(".jsonl") else "csv")
    rep = {"command": "simulate", "system": sys_.rs.label, "couplings": sys_.couplings.c,
           "potential": sys_.potential, "seed": cfg["seed"], "x0": s0.x, "p0": s0.p, "T": T,
           "controls": {k: cfg["integration"][k] for k in sorted(cfg["integration"])}, "passed": True}
    try:
        traj = integrate(sys_, s0, T, make_controls(cfg, complex_state=np.iscomplexobj(sys_.c2)))
    except WallProximityError as err:
        traj = getattr(err, "partial", None)
        _fail(rep, "wall_proximity", {"root": err.root, "alpha_x": err.value, "t": err.t})
        rep["message"] = str(err)
    else:
        rep["meta"] = traj.meta
        if traj.energy_drift > float(cfg["integration"]["drift_bound"]):
            _fail(rep, "energy_drift", traj.energy_drift)
    if traj is not None:
        rep["energy_drift"] = traj.energy_drift
        rep["n_rows"] = len(traj)
        if out:
            (traj.to_jsonl if fmt == "jsonl" else traj.to_csv)(out)
            rep["output"] = out
    return rep


def _lax_one(builder, sys_, rep, s, z, ctl):
    return lax.lax_residual_report(builder, sys_, rep, s, z, ctl)


def cmd_lax_verify(cfg, args):
    sys_ = make_system(cfg)
    rs = sys_.rs
    rep = make_rep(cfg, rs)
    builder = cfg["builder"]
    if builder not in lax.BUILDERS:
        raise ConfigError(f"builder must be one of {lax.BUILDERS}")
    rng = np.random.default_rng(int(cfg["seed"]))
    v = cfg["verification"]
    tol = float(v["tol"])
    states = make_states(cfg, sys_, rng, int(v["n_states"]))
    zs = _z_samples(cfg, sys_.lattice, rng)
    ctl = make_controls(cfg, complex_state=True)
    report = {"command": "lax-verify", "system": rs.label, "rep": rep.name, "N": rep.N,
              "builder": builder, "couplings": sys_.couplings.c, "seed": cfg["seed"],
              "z_samples": zs, "norm": "max-abs entry", "passed": True}
    try:
        jobs = [(s, z) for s in states for z in zs]
        with ThreadPoolExecutor(_workers()) as ex:
            res = list(ex.map(lambda sz: _lax_one(builder, sys_, rep, sz[0], sz[1], ctl), jobs))
        lr = [r.residual for r in res]
        report["lax_residual"] = max(lr)
        report["lax_residuals"] = lr
        report["fd_error_estimate"] = max(r.fd_error for r in res)
        if not max(lr) < tol:
            _fail(report, "lax_residual", max(lr))
        s = states[0]
        lp = lax.lax_pair(builder, sys_, rep, s)
        cons = {"solved_or_closed_form": lax.constraint_check(rep, None, s.x, lp.d_prime, sys_, builder).as_dict()}
        if builder == "dhp":
            cons["d_prime_zero"] = lax.constraint_check(rep, None, s.x, np.zeros(rep.N), sys_, builder).as_dict()
        report["constraints"] = cons
        report["d_prime"] = lp.d_prime
        T = float(cfg["integration"]["T"])
        sc = lax.spectral_conservation(builder, sys_, rep, s, T, zs, v["k_max"], controls=ctl)
        report["spectral"] = {"T": T, "max_coefficient_drift": sc.max_drift,
                              "eigenvalue_mismatch": sc.eigen_mismatch, "energy_drift": sc.energy_drift}
        if not sc.max_drift < tol:
            _fail(report, "isospectrality", sc.max_drift)
    except UnsupportedRepresentationError as err:
        _fail(report, "unsupported_representation", str(err))
    except WallProximityError as err:
        _fail(report, "wall_proximity", {"root": err.root, "alpha_x": err.value, "t": err.t})
    return report


def cmd_spectral_scan(cfg, args):
    sys_ = make_system(cfg)
    rep = make_rep(cfg, sys_.rs)
    builder = cfg["builder"]
    rng = np.random.default_rng(int(cfg["seed"]))
    s = make_states(cfg, sys_, rng)[0]
    v = cfg["verification"]
    if v.get("z_grid"):
        zs = [parse_complex(z) for z in v["z_grid"]]
    elif v["z"]:
        zs = [parse_complex(z) for z in v["z"]]
    else:
        lat = sys_.lattice
        zs = list(lat.omega1 * np.linspace(0.1, 0.9, 9) + 0.37 * lat.omega2)
    try:
        data = lax.spectral_invariants(builder, sys_, rep, s, zs, v["k_max"])
    except UnsupportedRepresentationError as err:
        report = {"command": "spectral-scan", "passed": True}
        _fail(report, "unsupported_representation", str(err))
        return report
    out = cfg["output"]["path"]
    report = {"command": "spectral-scan", "system": sys_.rs.label, "rep": rep.name, "builder": builder,
              "seed": cfg["seed"], "x": s.x, "p": s.p, "z": zs, "passed": True,
              "trace_L2_residue": lax.trace_residue(builder, sys_, rep, s)}
    K, N = data.invariants.shape[0] - 1, rep.N
    if out:
        import csv

        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["z_re", "z_im"] + [f"tr{k}_{part}" for k in range(K + 1) for part in ("re", "im")]
                       + [f"c{k}_{part}" for k in range(N + 1) for part in ("re", "im")])
            for j, z in enumerate(data.z):
                row = [z.real, z.imag]
                for arr in (data.invariants[:, j], data.charpoly_coeffs[:, j]):
                    for val in arr:
                        row += [val.real, val.imag]
                w.writerow([repr(float(u)) for u in row])
        report["output"] = out
    else:
        report["invariants"] = data.invariants
        report["charpoly_coeffs"] = data.charpoly_coeffs
    return report


def cmd_orbit_dim(cfg, args):
    sys_ = make_system(cfg)
    rs = sys_.rs
    rng = np.random.default_rng(int(cfg["seed"]))
    if args.zero:
        xi = GCoElement(rs, np.zeros(rs.n_roots), rng.standard_normal(rs.rank))
        expected = 0
    else:
        g = rng.standard_normal(rs.n_roots) + 1j * rng.standard_normal(rs.n_roots)
        xi = GCoElement(rs, g, rng.standard_normal(rs.rank))
        expected = 2 * rs.rank
    dim, sv = orbit_dimension(rs, xi, return_singular_values=True)
    report = {"command": "orbit-dim", "system": rs.label, "seed": cfg["seed"], "dimension": dim,
              "expected": expected, "singular_values": sv, "passed": True}
    if dim != expected:
        _fail(report, "orbit_dimension", dim)
    return report


def cmd_obstruction_check(cfg, args):
    rs = root_system(cfg["system"]["root_system"])
    rep = make_rep(cfg, rs)
    report = {"command": "obstruction-check", "system": rs.label, "rep": rep.name, "passed": True}
    try:
        r = check_w_invariant_orbit(rs, rep)
    except UnsupportedRepresentationError as err:
        _fail(report, "unsupported_representation", str(err))
        return report
    report.update(splits=r.splits, character_trivial=r.character_trivial, witness=r.witness,
                  representatives=r.representatives, lift_order=r.lift_order, weyl_order=r.weyl_order)
    if args.expect is not None:
        want = args.expect == "true"
        got = all(r.character_trivial.values())
        if got != want:
            _fail(report, "character_trivial", got)
    return report


COMMANDS = {
    "elliptic-check": cmd_elliptic_check,
    "simulate": cmd_simulate,
    "lax-verify": cmd_lax_verify,
    "spectral-scan": cmd_spectral_scan,
    "orbit-dim": cmd_orbit_dim,
    "obstruction-check": cmd_obstruction_check,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="cm", description=__doc__.splitlines()[0],
                                 epilog=SCHEMA_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, epilog=SCHEMA_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output file")
        if name == "elliptic-check":
            p.add_argument("--lattice", help="half-periods, e.g. 0.5,0.5i")
            p.add_argument("--tol", type=float)
            p.add_argument("--n-points", dest="n_points", type=int)
            continue
        p.add_argument("--system", help="root system, e.g. A:2")
        if name == "obstruction-check":
            p.add_argument("--rep")
            p.add_argument("--expect", choices=["true", "false"])
            continue
        p.add_argument("--c", help="couplings per length class, comma separated")
        p.add_argument("--potential", choices=["elliptic", "trigonometric", "rational"])
        p.add_argument("--lattice")
        if name == "orbit-dim":
            p.add_argument("--zero", action="store_true", help="use C = 0")
            continue
        p.add_argument("--x")
        p.add_argument("--p")
        p.add_argument("--T", type=float)
        if name == "simulate":
            p.add_argument("--method", choices=["dop853", "yoshida"])
            p.add_argument("--rtol", type=float)
            p.add_argument("--atol", type=float)
            p.add_argument("--h", type=float)
            p.add_argument("--n-samples", dest="n_samples", type=int)
            p.add_argument("--drift-bound", dest="drift_bound", type=float)
            p.add_argument("--format", choices=["csv", "jsonl"])
            continue
        p.add_argument("--rep")
        p.add_argument("--builder", choices=list(lax.BUILDERS))
        p.add_argument("--z", help="spectral parameters, comma separated, e.g. 0.3+0.1i")
        p.add_argument("--k-max", dest="k_max", type=int)
        p.add_argument("--tol", type=float)
        if name == "lax-verify":
            p.add_argument("--n-z", dest="n_z", type=int)
            p.add_argument("--n-states", dest="n_states", type=int)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = build_config(args)
        report = COMMANDS[args.command](cfg, args)
    except (ConfigError, CMError) as err:
        if isinstance(err, ConfigError):
            print(f"cm: configuration error: {err}\n\n{SCHEMA_HELP}", file=sys.stderr)
            return 2
        report = {"command": args.command, "passed": False,
                  "violated": {"invariant": type(err).__name__, "value": str(err)}}
    report_path = None
    if args.command not in ("simulate", "spectral-scan"):
        report_path = cfg["output"]["path"] if "cfg" in locals() else None
    emit(report, report_path)
    return 0 if report.get("passed") else 1


if __name__ == "__main__":
    sys.exit(main())
