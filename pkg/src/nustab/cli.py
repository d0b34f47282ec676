"""Command-line front end.

Exit codes: 0 success, 2 input/validation error, 3 synthesis failure,
4 certificate violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, certify, gain_init, sim, sva
from .errors import SynthesisError, ValidationError, WindowError
from .model import DesignCertificate, SamplingWindow, parse_config

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SYNTHESIS = 3
EXIT_VIOLATION = 4

CERT_NAME = "certificate.json"


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc


class Run:
    """Collects the manifest for one command and writes its outputs.

    The manifest hash covers everything except the timestamp, so equal
    inputs give an equal hash and byte-identical outputs.
    """

    def __init__(self, args, config_text):
        self.out_dir = Path(args.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        params = {
            k: v for k, v in sorted(vars(args).items())
            if k not in ("func", "out_dir", "config", "cert")
        }
        self.manifest = {
            "command": args.command,
            "config": {"path": str(args.config), "sha256": _sha256(config_text)},
            "seed": getattr(args, "seed", None),
            "version": __version__,
            "parameters": params,
        }
        if getattr(args, "cert", None):
            self.manifest["certificate"] = {"path": str(args.cert), "sha256": _sha256(_read(args.cert))}
        self.hash = _sha256(json.dumps(self.manifest, sort_keys=True))
        self.outputs = {}

    def write(self, name, text):
        path = self.out_dir / name
        path.write_text(text)
        self.outputs[name] = _sha256(text)
        return path

    def finish(self):
        manifest = dict(self.manifest, manifest_sha256=self.hash, outputs=self.outputs,
                        timestamp=datetime.now(timezone.utc).isoformat())
        (self.out_dir / f"manifest-{self.manifest['command']}.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        )


def _load_cert(args, plant) -> DesignCertificate:
    try:
        data = json.loads(_read(args.cert))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"certificate is not valid JSON: {exc}") from exc
    cert = DesignCertificate.from_dict(data)
    cert.check_plant(plant)
    return cert


def cmd_design(args) -> int:
    text = _read(args.config)
    cfg = parse_config(text)
    plant = cfg.plant
    gamma = args.gamma if args.gamma is not None else (cfg.gamma if cfg.gamma is not None else 1.0)
    if cfg.K_c is not None:
        K_c = gain_init.accept_user_gain(plant, cfg.K_c)
        source = "config K_c"
    else:
        spec = gain_init.PoleSpec(cfg.poles) if cfg.poles is not None else gain_init.PoleSpec.default(plant)
        K_c = gain_init.place_poles(plant, spec)
        source = f"poles {list(spec.poles)}"
    design = gain_init.diagonalize(plant, K_c)
    cert = certify.find_h_star(
        plant, design, gamma=gamma, tol_h=args.tol_h, h_hi=args.h_hi,
        grid_points=args.grid, theta=args.theta, mu=args.margin,
    )
    run = Run(args, text)
    payload = dict(cert.to_dict(), manifest=run.hash)
    run.write(CERT_NAME, json.dumps(payload, indent=2) + "\n")
    run.finish()
    censored = " (right-censored: no crossing below h_hi)" if cert.right_censored else ""
    print(f"gain source : {source}")
    print(f"K_c         : {np.array2string(cert.K_c, precision=6)}")
    print(f"D           : {np.array2string(cert.D, precision=6)}")
    print(f"cond(T)     : {cert.cond_T:.6g}")
    print(f"gamma       : {cert.gamma:g}")
    print(f"h_star      : {cert.h_star:.6f}{censored}")
    print(f"certificate : {run.out_dir / CERT_NAME}")
    return EXIT_OK


GNUPLOT_TEMPLATE = """\
# residual singular values of the projected transformed map versus period
# manifest {hash}
set datafile separator ','
set key autotitle columnhead
set xlabel 'h'
set ylabel 'singular value'
set yrange [0:*]
n = {n}
m = {m}
plot for [j=m+1:n] '{csv}' using 1:(column(1+j)) with lines lw 2 dt 1, \\
     for [j=m+1:n] '{csv}' using 1:(column(2+n+j)) with lines lw 1 dt 2, \\
     {gamma} with lines lc rgb 'black' dt 3 title 'gamma'
"""


def cmd_sweep(args) -> int:
    text = _read(args.config)
    plant = parse_config(text).plant
    cert = _load_cert(args, plant)
    table = certify.sweep(plant, cert, args.h_lo, args.h_hi, args.steps, gamma=cert.gamma,
                          theta=cert.theta, mu=cert.mu)
    run = Run(args, text)
    run.write("sweep.csv", table.to_csv())
    run.write("sweep.gp", GNUPLOT_TEMPLATE.format(
        hash=run.hash, n=plant.n, m=plant.m, csv="sweep.csv", gamma=format(cert.gamma, "g")))
    run.finish()
    sb = table.sigma_bar
    above = table.h[np.isfinite(sb) & (sb >= cert.gamma)]
    first = f"{above[0]:.6g}" if above.size else "none"
    print(f"rows: {len(table.rows)}; first grid h with sigma_bar >= gamma: {first}")
    print(f"wrote {run.out_dir / 'sweep.csv'} and {run.out_dir / 'sweep.gp'}")
    return EXIT_OK


def _parse_x0(text, n):
    if text is None:
        return np.ones(n)
    try:
        x0 = np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ValidationError(f"--x0 must be comma separated numbers: {exc}") from exc
    if x0.shape != (n,):
        raise ValidationError(f"--x0 needs {n} values")
    return x0


def cmd_simulate(args) -> int:
    text = _read(args.config)
    cfg = parse_config(text)
    plant = cfg.plant
    cert = _load_cert(args, plant)
    h_min = args.h_min if args.h_min is not None else (cfg.h_min if cfg.h_min is not None else 0.01)
    h_max = args.h_max if args.h_max is not None else (cfg.h_max if cfg.h_max is not None else 0.95 * cert.h_star)
    window = SamplingWindow(h_min, h_max)
    if window.h_max >= cert.h_star:
        raise WindowError(f"sampling window [{h_min:g}, {h_max:g}] exceeds the certificate h_star = {cert.h_star:g}")
    table = None
    if args.schedule == "worst_case_grid":
        table = certify.sweep(plant, cert, window.h_min, window.h_max, args.steps)
    schedule = sim.gen_schedule(args.schedule, window, args.N, seed=args.seed, h=args.h, table=table)
    if args.schedule == "constant" and args.h >= cert.h_star:
        raise WindowError(f"period {args.h:g} exceeds the certificate h_star = {cert.h_star:g}")
    x0 = _parse_x0(args.x0, plant.n)
    traj = sim.simulate(plant, cert, schedule, x0, substeps=args.substeps)
    report = sim.lyapunov_check(traj)
    run = Run(args, text)
    run.write("trajectory.csv", traj.to_csv())
    run.finish()
    print(f"steps: {report.steps}; final |x|_2 = {np.linalg.norm(traj.x[-1]):.6g}; "
          f"max |x|_T ratio = {report.max_ratio:.6g}")
    print(f"wrote {run.out_dir / 'trajectory.csv'}")
    if report.violations:
        print(f"Lyapunov violations at steps {list(report.violations)}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_verify(args) -> int:
    text = _read(args.config)
    plant = parse_config(text).plant
    cert = _load_cert(args, plant)
    report = certify.verify_certificate(plant, cert, refinement=args.refinement)
    print(f"probes: {report.probes} (step {report.step:.6g}); violations: {len(report.violations)}")
    for h, sb in report.violations[:20]:
        print(f"  h = {h:.6g}: sigma_bar = {sb:.6g} >= gamma = {cert.gamma:g}")
    return EXIT_VIOLATION if report.violations else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nustab",
        description="Sampling-period-varying state feedback for nonuniformly sampled LTI plants.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, cert=True):
        p.add_argument("--config", required=True, help="plant configuration (JSON)")
        if cert:
            p.add_argument("--cert", required=True, help="certificate written by 'design'")
        p.add_argument("--out-dir", default=".", help="directory for output files")

    p = sub.add_parser("design", help="design the transform and certify h_star")
    common(p, cert=False)
    p.add_argument("--gamma", type=float, default=None, help="contraction bound (default: config or 1)")
    p.add_argument("--theta", type=float, default=sva.THETA)
    p.add_argument("--margin", type=float, default=sva.MU)
    p.add_argument("--grid", type=int, default=certify.DEFAULT_GRID_POINTS)
    p.add_argument("--tol-h", type=float, default=certify.DEFAULT_TOL_H)
    p.add_argument("--h-hi", type=float, default=None)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("sweep", help="residual singular values over a period grid")
    common(p)
    p.add_argument("--h-lo", type=float, default=0.01)
    p.add_argument("--h-hi", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=100)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="closed-loop run under a sampling schedule")
    common(p)
    p.add_argument("--schedule", choices=sim.SCHEDULE_KINDS, default="uniform_random")
    p.add_argument("--h", type=float, default=None, help="period for the constant schedule")
    p.add_argument("--h-min", type=float, default=None)
    p.add_argument("--h-max", type=float, default=None)
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--x0", default=None, help="comma separated initial state (default: ones)")
    p.add_argument("--substeps", type=int, default=sim.DEFAULT_SUBSTEPS)
    p.add_argument("--steps", type=int, default=64, help="grid size for worst_case_grid")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="re-check a certificate on a finer grid")
    common(p)
    p.add_argument("--refinement", type=int, default=8)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SynthesisError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SYNTHESIS


if __name__ == "__main__":
    sys.exit(main())
