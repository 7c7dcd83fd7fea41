"""Batch entry points.

Subcommands: genus0, dress, symes, lax, factorize, theta-map, verify,
selftest.  A JSON config file supplies defaults; flags win over the file.
Exit codes: 0 success, 2 invalid input, 3 convergence failure,
4 verification failure.  With --json-errors failures are also emitted as a
machine-readable payload on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, asdict

import numpy as np

from . import genus0 as g0
from . import theta as th
from .acceptance import run_all, genus0_sample
from .factorization import ConvergenceError, iwasawa_factorize
from .frames import GridSpec, VacuumData, dress, vacuum_frame_field, maurer_cartan, immersion_from_frame
from .geomverify import verify_sample
from .killing import lax_flow, char_poly_curve, char_poly_drift, symes_field
from .loops import loop_from_json, loop_to_json
from .meshio import mesh_from_csv, mesh_to_csv, write_report


@dataclass
class Config:
    truncation: int = 24
    grid: int = 16
    size: float = 0.5
    tol_factorization: float = 1e-11
    tol_fd: float = 1e-2
    tol_identity: float = 1e-10
    seed: int = 20250809

    def validate(self) -> None:
        if self.truncation < 8:
            raise ValueError("truncation order must be at least 8")
        for name in ("tol_factorization", "tol_fd", "tol_identity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def _load_config(path: str | None) -> Config:
    cfg = Config()
    if path:
        with open(path) as fh:
            data = json.load(fh)
        for key, val in data.items():
            if not hasattr(cfg, key):
                raise ValueError(f"unknown config key {key!r}")
            setattr(cfg, key, type(getattr(cfg, key))(val))
    cfg.validate()
    return cfg


def _parse_complex(text: str) -> complex:
    if "," in text:
        re_s, im_s = text.split(",", 1)
        return complex(float(re_s), float(im_s))
    return complex(float(text), 0.0)


def _write(path: str, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


def cmd_genus0(args, cfg: Config) -> int:
    a = _parse_complex(args.a)
    data = g0.genus0_data(g0.Genus0Params(a, minimal_limit=(a == 0)))
    sample = genus0_sample(data, args.grid or cfg.grid)
    if args.out:
        _write(args.out, mesh_to_csv(sample))
    if args.report:
        report = {
            "a": [a.real, a.imag],
            "identity_residual": g0.conformal_lagrangian_identity(data),
            "O2": [data.O2.real, data.O2.imag],
            "O3": [data.O3.real, data.O3.imag],
            "Cplus": [np.real(data.Cplus), np.imag(data.Cplus)],
            "Cminus": [np.real(data.Cminus), np.imag(data.Cminus)],
            "c1": [data.c1.real, data.c1.imag],
            "c2": [data.c2.real, data.c2.imag],
            "A1": [data.A1.real, data.A1.imag],
            "A2": [data.A2.real, data.A2.imag],
            "U": [[z.real, z.imag] for z in data.U],
            "gamma1": [data.gamma1.real, data.gamma1.imag],
            "gamma2": [data.gamma2.real, data.gamma2.imag],
        }
        write_report(args.report, report)
    return 0


def cmd_dress(args, cfg: Config) -> int:
    mu0 = _parse_complex(args.mu)
    with open(args.potential) as fh:
        g = loop_from_json(fh.read())
    n = args.grid or cfg.grid
    grid = GridSpec(n, n, args.size or cfg.size, args.size or cfg.size)
    vac = VacuumData(mu0)
    field = dress(g, vacuum_frame_field(vac, grid), tol=cfg.tol_factorization)
    sample = immersion_from_frame(field)
    if args.out:
        _write(args.out, mesh_to_csv(sample))
    if args.report:
        mcf = maurer_cartan(field)
        write_report(args.report, {
            "mu0": [mu0.real, mu0.imag],
            "support_defect": mcf.support_defect,
            "reality_defect": mcf.reality_defect,
            "conformality_defect": mcf.conformality_defect(),
            "richardson": mcf.richardson,
        })
    return 0


def cmd_symes(args, cfg: Config) -> int:
    with open(args.eta) as fh:
        eta = loop_from_json(fh.read())
    n = args.grid or cfg.grid
    grid = GridSpec(n, n, args.size or cfg.size, args.size or cfg.size)
    field = symes_field(eta, grid, tol=cfg.tol_factorization)
    sample = immersion_from_frame(field)
    if args.out:
        _write(args.out, mesh_to_csv(sample))
    return 0


def cmd_lax(args, cfg: Config) -> int:
    with open(args.xi0) as fh:
        xi0 = loop_from_json(fh.read())
    traj = lax_flow(xi0, args.d, args.steps, args.dt,
                    keep_every=max(1, args.steps // 10))
    lams = np.exp(2j * np.pi * (np.arange(8) + 0.19) / 8)
    drift = char_poly_drift(traj, lams)
    if args.report:
        curve = char_poly_curve(traj[-1], lams)
        write_report(args.report, {
            "steps": args.steps,
            "dt": args.dt,
            "isospectral_drift": drift,
            "final_coeffs": [[c.real, c.imag] for c in curve.coeffs.reshape(-1)],
        })
    return 0


def cmd_factorize(args, cfg: Config) -> int:
    with open(args.infile) as fh:
        g = loop_from_json(fh.read())
    fac = iwasawa_factorize(g, tol=cfg.tol_factorization)
    doc = {
        "e_part": json.loads(loop_to_json(fac.e_part)),
        "i_part": json.loads(loop_to_json(fac.i_part)),
        "residual": fac.residual,
        "iterations": fac.iterations,
    }
    _write(args.out, json.dumps(doc, indent=1))
    return 0


def cmd_theta_map(args, cfg: Config) -> int:
    with open(args.data) as fh:
        recon = th.recon_from_json(fh.read())
    n = args.grid or cfg.grid
    h = 1.0 / n
    lifts = np.zeros((n, n, 3), dtype=complex)
    for i in range(n):
        for j in range(n):
            w = complex((i - n / 2) * h, (j - n / 2) * h)
            lifts[i, j] = th.theta_map(th.flow_line(recon, w), recon)
    from .geomverify import ImmersionSample
    sample = ImmersionSample(lifts, 1.0, 1j, h, h,
                             origin=complex(-h * n / 2, -h * n / 2))
    _write(args.out, mesh_to_csv(sample))
    return 0


def cmd_verify(args, cfg: Config) -> int:
    with open(args.mesh) as fh:
        sample = mesh_from_csv(fh.read())
    report = verify_sample(sample)
    if args.report:
        write_report(args.report, report.as_dict())
    ok = (report.conformality_max < args.conf_tol
          and report.lagrangian_max < args.conf_tol
          and report.angle_harmonicity < args.harm_tol)
    return 0 if ok else 4


def cmd_selftest(args, cfg: Config) -> int:
    results = run_all()
    for rec in results:
        status = "PASS" if rec["passed"] else "FAIL"
        print(f"[{status}] {rec['name']}  ({rec['runtime_s']:.2f}s)")
    if args.report:
        write_report(args.report, {"criteria": results_serializable(results)})
    return 0 if all(r["passed"] for r in results) else 4


def results_serializable(results: list[dict]) -> list[dict]:
    out = []
    for rec in results:
        clean = {}
        for key, val in rec.items():
            if isinstance(val, complex):
                clean[key] = [val.real, val.imag]
            elif isinstance(val, (np.floating, np.integer)):
                clean[key] = val.item()
            else:
                clean[key] = val
        out.append(clean)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cp2hsl")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--json-errors", action="store_true",
                   help="emit failures as JSON on stdout")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("genus0", help="closed-form homogeneous torus")
    s.add_argument("--a", required=True, help="parameter a as RE or RE,IM")
    s.add_argument("--grid", type=int, default=None)
    s.add_argument("--out", default=None)
    s.add_argument("--report", default=None)
    s.set_defaults(fn=cmd_genus0)

    s = sub.add_parser("dress", help="dress the vacuum by a plus loop")
    s.add_argument("--mu", required=True, help="Maslov datum mu0 as RE,IM")
    s.add_argument("--potential", required=True, help="loop JSON file")
    s.add_argument("--grid", type=int, default=None)
    s.add_argument("--size", type=float, default=None)
    s.add_argument("--out", default=None)
    s.add_argument("--report", default=None)
    s.set_defaults(fn=cmd_dress)

    s = sub.add_parser("symes", help="frame field of a Symes potential")
    s.add_argument("--eta", required=True, help="loop JSON file")
    s.add_argument("--grid", type=int, default=None)
    s.add_argument("--size", type=float, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(fn=cmd_symes)

    s = sub.add_parser("lax", help="isospectral flow of a Killing field")
    s.add_argument("--xi0", required=True, help="loop JSON file")
    s.add_argument("--d", type=int, default=0)
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--dt", type=float, default=1e-2)
    s.add_argument("--report", default=None)
    s.set_defaults(fn=cmd_lax)

    s = sub.add_parser("factorize", help="annulus/plus factorization")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_factorize)

    s = sub.add_parser("theta-map", help="mesh from reconstruction data")
    s.add_argument("--data", required=True)
    s.add_argument("--grid", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_theta_map)

    s = sub.add_parser("verify", help="finite-difference verification of a mesh")
    s.add_argument("--mesh", required=True)
    s.add_argument("--report", default=None)
    s.add_argument("--conf-tol", type=float, default=1e-5)
    s.add_argument("--harm-tol", type=float, default=1e-3)
    s.set_defaults(fn=cmd_verify)

    s = sub.add_parser("selftest", help="run the acceptance battery")
    s.add_argument("--report", default=None)
    s.set_defaults(fn=cmd_selftest)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        np.random.seed(cfg.seed % 2**32)
        return args.fn(args, cfg)
    except ConvergenceError as err:
        _fail(args, 3, str(err))
        return 3
    except (ValueError, ZeroDivisionError, OSError, KeyError,
            json.JSONDecodeError) as err:
        _fail(args, 2, str(err))
        return 2


def _fail(args, code: int, message: str) -> None:
    if getattr(args, "json_errors", False):
        print(json.dumps({"error": message, "exit_code": code}))
    else:
        print(f"error: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
