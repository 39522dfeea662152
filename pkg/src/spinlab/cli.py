"""spinlab command line: one subcommand per experiment, JSON/CSV on stdout.

Exit codes: 0 pass, 1 check failure or library error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from . import clifford, euclidean, mass_endo, sphere_rp, suite, testspinor, torus
from .errors import SpinlabError

# which library operations each subcommand exercises (checked by the test suite)
DISPATCH = {
    "clifford check": [clifford.build_rep, clifford.volume_element, clifford.build_nu, clifford.build_quaternionic],
    "euclid killing": [euclidean.killing_spinor, euclidean.dirac_fd, euclidean.functional_J],
    "euclid constants": [euclidean.model_constants],
    "torus spectrum": [torus.torus_spectrum],
    "torus green": [torus.torus_green],
    "sphere mass": [sphere_rp.green_sphere, mass_endo.extract_mass],
    "rp mass": [sphere_rp.green_rp, sphere_rp.mass_endo_rp],
    "mass-endo": [mass_endo.extract_mass, mass_endo.conformal_rescale_mass, mass_endo.mass_spectrum],
    "yamabe": [testspinor.build_test_spinor, testspinor.evaluate_test_functional, testspinor.yamabe_verdict],
    "suite": [euclidean.green_euclidean, torus.torus_green_fd_oracle] + list(suite.CHECKS),
}


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    """Serializable form of one invocation: ``{"subcommand": "torus spectrum", "options": {...}}``."""

    subcommand: str
    options: dict = field(default_factory=dict)
    seed: int = 0
    output: str | None = None
    threads: int | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        allowed = {f.name for f in fields(cls)}
        unknown = set(d) - allowed
        if unknown:
            raise UsageError(f"unknown config fields: {sorted(unknown)}")
        if "subcommand" not in d:
            raise UsageError("config needs a 'subcommand'")
        cfg = cls(**d)
        if cfg.subcommand not in DISPATCH:
            raise UsageError(f"unknown subcommand {cfg.subcommand!r}")
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def argv(self) -> list:
        out = self.subcommand.split()
        for k, v in self.options.items():
            flag = "--" + k.replace("_", "-")
            if v is True:
                out.append(flag)
            elif v is False or v is None:
                continue
            else:
                out += [flag, str(v)]
        return out


# --- formatting ------------------------------------------------------------


def fmt_float(x: float) -> str:
    return f"{x:.16e}"


def fmt_complex(z) -> str:
    z = complex(z)
    return f"{z.real:.16e}{z.imag:+.16e}j"


def matrix_json(M) -> list:
    return [[fmt_complex(v) for v in row] for row in np.asarray(M)]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return fmt_complex(obj)
    return obj


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def dump_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


# --- parsing helpers -------------------------------------------------------


def _floats(s: str) -> list:
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError as e:
        raise UsageError(f"expected comma-separated numbers, got {s!r}") from e


def _vector(s: str, n: int | None = None) -> np.ndarray:
    v = np.array(_floats(s))
    if n is not None and len(v) != n:
        raise UsageError(f"expected {n} components, got {len(v)}")
    return v


def _geometry(basis: str | None, n_hint: int | None = None) -> torus.TorusGeometry:
    if basis is None:
        return torus.TorusGeometry.cubic(n_hint or 2)
    vals = _floats(basis)
    n = int(round(math.sqrt(len(vals))))
    if n * n != len(vals):
        raise UsageError("--basis needs n*n entries (row-major, columns generate the lattice)")
    return torus.TorusGeometry(np.array(vals).reshape(n, n))


def _spin(bits: str, n: int) -> torus.SpinStructure:
    b = [int(v) for v in _floats(bits)]
    if len(b) != n or any(v not in (0, 1) for v in b):
        raise UsageError(f"--spin needs {n} entries in {{0,1}}")
    return torus.SpinStructure.from_bits(b)


# --- subcommands -----------------------------------------------------------


def cmd_clifford_check(a):
    rep = clifford.check_report(a.dim)
    return dump_json(rep), 0 if rep["relations_ok"] else 1


def cmd_euclid_killing(a):
    n = a.dim
    rep = clifford.build_rep(n)
    Phi = np.zeros(rep.N, dtype=complex)
    Phi[0] = 1.0
    target = euclidean.sphere_target(n)
    out = {"n": n, "target": target}
    ok = True
    for s, name in ((1, "plus"), (-1, "minus")):
        r = euclidean.functional_J(euclidean.KillingSpinor(rep, s, Phi), "radial", sign=s, tol=a.quad_tol)
        err = abs(r.J - s * target) / target
        out[name] = {"J": r.J, "numerator": r.numerator, "denominator": r.denominator, "rel_err": err}
        ok &= err <= 1e-6
    if a.check_dirac:
        rng = np.random.default_rng(a.seed)
        x = rng.uniform(-2, 2, size=(100, n))
        worst = 0.0
        for s in (1, -1):
            fld = euclidean.KillingSpinor(rep, s, Phi)
            D, _ = euclidean.dirac_fd_extrapolated(fld, x, 1e-2)
            ex = fld.dirac(x)
            worst = max(worst, float(np.max(np.linalg.norm(D - ex, axis=1) / np.linalg.norm(ex, axis=1))))
        out["dirac_fd_max_rel_err"] = worst
        ok &= worst <= 1e-6
    out["passed"] = ok
    return dump_json(out), 0 if ok else 1


def cmd_euclid_constants(a):
    mc = euclidean.model_constants(a.dim)
    return dump_csv(["n", "omega_nm1", "omega_n", "I", "C0"], [mc.as_row()]), 0


def cmd_torus_spectrum(a):
    geom = _geometry(a.basis)
    spin = _spin(a.spin, geom.n)
    if a.count < 1:
        raise UsageError("--count must be >= 1")
    modes = torus.torus_spectrum(geom, spin, a.count)
    return dump_csv(["index", "eigenvalue", "multiplicity"], [(i, v, m) for i, (v, m) in enumerate(modes)]), 0


def cmd_torus_green(a):
    x = _vector(a.x)
    geom = _geometry(a.basis, len(x))
    y = _vector(a.y, geom.n)
    spin = _spin(a.spin, geom.n)
    cfg = torus.ModeSumConfig(method=a.method)
    res = torus.torus_green(geom, spin, x, y, cfg)
    return dump_json({"matrix": matrix_json(res.matrix), "error": res.error, "method": a.method}), 0


def cmd_sphere_mass(a):
    rep = clifford.build_rep(a.dim)
    x = None
    if a.point is not None:
        x = _vector(a.point, a.dim + 1)
        x = x / np.linalg.norm(x)
    m = sphere_rp.sphere_mass(rep, x)
    norm = float(np.linalg.norm(m.alpha))
    return dump_json({"norm_alpha": norm, "residual": m.residual, "passed": norm <= 1e-4}), 0 if norm <= 1e-4 else 1


def cmd_rp_mass(a):
    geom = sphere_rp.RPGeometry(k=0, spin_sign=1 if a.spin == "plus" else -1)
    p = None if a.point is None else _vector(a.point, geom.n)
    rm = sphere_rp.mass_endo_rp(geom, p)
    met = rm.tolerance_met(1e-4)
    out = {"c": rm.c, "residue": rm.residue, "tolerance_met": met, "oracle": rm.oracle, "spin": geom.label}
    return dump_json(out), 0 if met else 1


def cmd_mass_endo(a):
    rep = None
    if a.geometry == "torus":
        geom = _geometry(a.basis)
        spin = _spin(a.spin or ",".join(["1"] * geom.n), geom.n)
        G = torus.TorusGreen(geom, spin)
        y = np.zeros(geom.n) if a.point is None else _vector(a.point, geom.n)
        m = mass_endo.extract_mass(G, y)
        rep = G.rep
    elif a.geometry == "sphere":
        rep = clifford.build_rep(3)
        x = None if a.point is None else _vector(a.point, 4)
        m = sphere_rp.sphere_mass(rep, None if x is None else x / np.linalg.norm(x))
    else:
        sign = {"plus": 1, "minus": -1, None: 1}.get(a.spin)
        if sign is None:
            raise UsageError("--spin must be plus or minus for rp3")
        geom = sphere_rp.RPGeometry(spin_sign=sign)
        rep = clifford.build_rep(geom.n)
        p = np.zeros(3) if a.point is None else _vector(a.point, 3)
        ev = sphere_rp.rp_evaluator(geom, p, rep)
        m = mass_endo.extract_mass(ev, ev.base_scaled)
    try:
        nu = clifford.build_nu(rep)
    except SpinlabError:
        nu = None
    try:
        Q = clifford.build_quaternionic(rep)
    except SpinlabError:
        Q = None
    modes = mass_endo.mass_spectrum(m.alpha, nu, Q)
    out = {"alpha": matrix_json(m.alpha), "residual": m.residual, "spectrum": [float(v) for v in modes.eigenvalues],
           "symmetry_checks": {k: v for k, v in modes.as_dict().items() if k != "eigenvalues"}}
    return dump_json(out), 0


def cmd_yamabe(a):
    eps = _floats(a.eps)
    if not eps or any(e <= 0 for e in eps):
        raise UsageError("--eps needs positive values")
    sign = 1 if a.spin == "plus" else -1
    rows = []
    if a.synthetic:
        for e in eps:
            p = testspinor.synthetic_params(3, e, a.nu_pair, q=a.q)
            r = testspinor.evaluate_test_functional(p, sign, check_sign=False)
            rows.append((e, r.numerator, r.denominator, r.J, r.target, str(r.strict_below).lower()))
        return dump_csv(["eps", "numerator", "denominator", "J", "target", "strict_below"], rows), 0
    if a.geometry == "torus":
        geom = _geometry(a.basis)
        spin = _spin(a.spin_bits or ",".join(["1"] * geom.n), geom.n)
        testspinor.yamabe_verdict("torus", (geom, spin), eps)
    v = testspinor.yamabe_verdict("rp3", a.spin, eps, q=a.q)
    for row in v.rows:
        r = row.plus if v.predicted_sign > 0 else row.minus
        rows.append((row.epsilon, r.numerator, r.denominator, r.J, r.target, str(r.strict_below).lower()))
    ok = v.verdict == "strict"
    return dump_csv(["eps", "numerator", "denominator", "J", "target", "strict_below"], rows), 0 if ok else 1


def cmd_suite(a):
    only = None if a.all or not a.only else {int(v) for v in _floats(a.only)}
    t0 = time.perf_counter()
    results = suite.run_suite(only)
    for r in results:
        print(r.line(), file=sys.stderr)
    env = {
        "artifact_version": __version__,
        "config": {"subcommand": "suite", "only": sorted(only) if only else "all"},
        "checks": [r.as_dict(timing=not a.no_timing) for r in results],
        "passed": all(r.passed for r in results),
    }
    if not a.no_timing:
        env["wall_time_s"] = time.perf_counter() - t0
    return dump_json(env), 0 if env["passed"] else 1


HANDLERS = {
    "clifford check": cmd_clifford_check,
    "euclid killing": cmd_euclid_killing,
    "euclid constants": cmd_euclid_constants,
    "torus spectrum": cmd_torus_spectrum,
    "torus green": cmd_torus_green,
    "sphere mass": cmd_sphere_mass,
    "rp mass": cmd_rp_mass,
    "mass-endo": cmd_mass_endo,
    "yamabe": cmd_yamabe,
    "suite": cmd_suite,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spinlab", description="Numerical spin geometry experiments.")
    p.add_argument("--config", help="JSON ExperimentConfig file (replaces the command line)")
    p.add_argument("--threads", type=int, help="worker pool size (default: SPINLAB_THREADS or all cores)")
    p.add_argument("--output", help="write the report here instead of stdout")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="group", parser_class=_Parser)

    c = sub.add_parser("clifford").add_subparsers(dest="action", parser_class=_Parser)
    cc = c.add_parser("check")
    cc.add_argument("--dim", type=int, required=True)

    e = sub.add_parser("euclid").add_subparsers(dest="action", parser_class=_Parser)
    ek = e.add_parser("killing")
    ek.add_argument("--dim", type=int, required=True)
    ek.add_argument("--check-dirac", action="store_true")
    ek.add_argument("--quad-tol", type=float, default=1e-12)
    ek.add_argument("--seed", type=int, default=0)
    ec = e.add_parser("constants")
    ec.add_argument("--dim", type=int, required=True)

    t = sub.add_parser("torus").add_subparsers(dest="action", parser_class=_Parser)
    ts = t.add_parser("spectrum")
    ts.add_argument("--basis", default="1,0,0,1")
    ts.add_argument("--spin", required=True)
    ts.add_argument("--count", type=int, default=5)
    tg = t.add_parser("green")
    tg.add_argument("--basis")
    tg.add_argument("--x", required=True)
    tg.add_argument("--y", required=True)
    tg.add_argument("--spin", required=True)
    tg.add_argument("--method", choices=("ewald", "damped"), default="ewald")

    s = sub.add_parser("sphere").add_subparsers(dest="action", parser_class=_Parser)
    sm = s.add_parser("mass")
    sm.add_argument("--dim", type=int, default=3)
    sm.add_argument("--point", help="point of S^n in R^{n+1} (normalized)")

    r = sub.add_parser("rp").add_subparsers(dest="action", parser_class=_Parser)
    rm = r.add_parser("mass")
    rm.add_argument("--spin", choices=("plus", "minus"), required=True)
    rm.add_argument("--point", help="chart coordinates u1,u2,u3")

    me = sub.add_parser("mass-endo")
    me.add_argument("--geometry", choices=("torus", "sphere", "rp3"), required=True)
    me.add_argument("--basis")
    me.add_argument("--spin", help="torus: bits like 1,1; rp3: plus|minus")
    me.add_argument("--point")

    y = sub.add_parser("yamabe")
    y.add_argument("--geometry", choices=("rp3", "torus"), default="rp3")
    y.add_argument("--spin", choices=("plus", "minus"), default="plus")
    y.add_argument("--spin-bits", help="torus spin structure, e.g. 1,1")
    y.add_argument("--basis")
    y.add_argument("--eps", default="0.1,0.05,0.025")
    y.add_argument("--q", type=float)
    y.add_argument("--synthetic", action="store_true")
    y.add_argument("--nu-pair", type=float, default=0.0)

    su = sub.add_parser("suite")
    su.add_argument("--all", action="store_true")
    su.add_argument("--only", help="comma-separated check indices")
    su.add_argument("--no-timing", action="store_true", help="omit wall/run times (byte-stable output)")
    return p


def _key(ns) -> str:
    if ns.group in ("mass-endo", "yamabe", "suite"):
        return ns.group
    if ns.group is None or getattr(ns, "action", None) is None:
        raise UsageError("missing subcommand")
    return f"{ns.group} {ns.action}"


def run(argv) -> tuple:
    """Parse and dispatch; returns (text, exit code, output path)."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.config:
        try:
            with open(ns.config) as fh:
                cfg = ExperimentConfig.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config: {e}") from e
        if cfg.threads:
            os.environ["SPINLAB_THREADS"] = str(cfg.threads)
        ns2 = parser.parse_args(cfg.argv())
        ns2.output = cfg.output or ns.output
        ns = ns2
    if ns.threads:
        os.environ["SPINLAB_THREADS"] = str(ns.threads)
    key = _key(ns)
    text, code = HANDLERS[key](ns)
    return text, code, getattr(ns, "output", None)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        text, code, output = run(argv)
    except UsageError as e:
        print(f"spinlab: usage error: {e}", file=sys.stderr)
        return 2
    except SpinlabError as e:
        print(f"spinlab: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    if output:
        with open(output, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
