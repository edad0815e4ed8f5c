"""``tsconsensus`` command line.

Exit codes: 0 when every certificate is ExponentiallyStable (or the command
does not certify), 2 when some certificate is Inconclusive, 1 on errors.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from pathlib import Path

from . import __version__
from .certify import certify
from .scenario import BUILTIN, ScenarioError, load_builtin, load_scenario
from .simulate import empirical_c, run, write_csv
from .timescale import TimeScaleError, decompose

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONCLUSIVE = 2


def _load(args):
    if getattr(args, "scenario", None):
        sc = load_scenario(args.scenario)
    elif getattr(args, "example", None):
        sc = load_builtin(args.example)
    else:
        raise ScenarioError("pass --scenario PATH or --example NAME")
    if getattr(args, "horizon", None) is not None:
        sc = sc.with_horizon(args.horizon)
    return sc


def _decompose_report(sc) -> str:
    d = decompose(sc.build_timescale())
    lines = [d.labels()]
    for i, pts in enumerate(d.scattered_points):
        lo, hi = d.boundary(2 * i), d.boundary(2 * i + 1)
        if not lo.is_finite:
            break
        lines.append(f"  segment [T{2 * i}, T{2 * i + 1}) = [{lo}, {hi}): {len(pts)} scattered points")
    return "\n".join(lines) + "\n"


def _certificate(sc):
    return certify(sc.system(), sc.build_timescale(), sc.certify_config())


def _trajectory(sc, step=None, cert=None):
    bc = cert.constants if cert is not None else _certificate(sc).constants
    h = sc.h if step is None else step
    return run(sc.system(), sc.build_timescale(), h=h, bc=bc, dense_samples=sc.dense_samples)


def _summary(traj) -> str:
    norms = traj.norms
    n0, nf = float(norms[0]), float(norms[-1])
    ratio = nf / n0 if n0 else 0.0
    verdict = "decayed" if ratio <= 1e-2 else "not decayed"
    c = empirical_c(traj)
    c_line = f"empirical c = {c:.6g}" if math.isfinite(c) else "empirical c unavailable: M is not in (0, 1)"
    return (
        f"final |eps| = {nf:.6g} at t = {traj.times[-1]:.6g}; "
        f"|eps|/|eps0| = {ratio:.6g} ({verdict} below 1e-2)\n{c_line}\n"
    )


def cmd_decompose(args) -> int:
    sys.stdout.write(_decompose_report(_load(args)))
    return EXIT_OK


def cmd_certify(args) -> int:
    cert = _certificate(_load(args))
    sys.stdout.write(cert.to_json() if args.json else cert.to_text())
    return EXIT_OK if cert.stable else EXIT_INCONCLUSIVE


def cmd_simulate(args) -> int:
    sc = _load(args)
    traj = _trajectory(sc, args.step)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_csv(traj, fh)
        sys.stdout.write(_summary(traj))
    else:
        write_csv(traj, sys.stdout)
        sys.stderr.write(_summary(traj))
    return EXIT_OK


def run_example(name: str, out_dir: Path | None, step: float | None = None, horizon: float | None = None):
    """Certify and simulate one built-in scenario; returns (certificate, trajectory, csv text, json text)."""
    sc = load_builtin(name)
    if horizon is not None:
        sc = sc.with_horizon(horizon)
    cert = _certificate(sc)
    traj = _trajectory(sc, step, cert)
    buf = io.StringIO()
    write_csv(traj, buf)
    csv_text, json_text = buf.getvalue(), cert.to_json()
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{name}.csv").write_text(csv_text, encoding="utf-8")
        (out_dir / f"{name}.certificate.json").write_text(json_text, encoding="utf-8")
    return cert, traj, csv_text, json_text


def cmd_example(args) -> int:
    names = list(BUILTIN) if args.all_examples else [args.name]
    if not names or names == [None]:
        raise ScenarioError("name an example or pass --all-examples")
    out_dir = Path(args.out) if args.out else None
    code = EXIT_OK
    for name in names:
        cert, traj, _, json_text = run_example(name, out_dir, args.step, args.horizon)
        if args.json:
            sys.stdout.write(json_text)
        else:
            sys.stdout.write(f"== {name} ==\n" + cert.to_text() + _summary(traj))
        if not cert.stable:
            code = EXIT_INCONCLUSIVE
    return code


class _Parser(argparse.ArgumentParser):
    # usage errors share exit code 1 with other failures; 2 means Inconclusive
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tsconsensus", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def source(sp):
        g = sp.add_mutually_exclusive_group(required=True)
        g.add_argument("--scenario", metavar="PATH", help="scenario JSON file")
        g.add_argument("--example", metavar="NAME", choices=BUILTIN, help="built-in scenario")
        sp.add_argument("--horizon", type=float, metavar="T", help="override the window end")

    sp = sub.add_parser("decompose", help="print the segment boundaries T0, T1, ...")
    source(sp)
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("certify", help="check the stability routes")
    source(sp)
    sp.add_argument("--json", action="store_true", help="emit the certificate as JSON")
    sp.add_argument("--text", dest="json", action="store_false", help="emit a text report (default)")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("simulate", help="integrate the error dynamics and write CSV")
    source(sp)
    sp.add_argument("--out", metavar="PATH", help="CSV destination (default: standard output)")
    sp.add_argument("--step", type=float, metavar="H", help="RK4 step on dense runs")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("example", help="certify and simulate a built-in scenario")
    sp.add_argument("name", nargs="?", choices=BUILTIN)
    sp.add_argument("--all-examples", action="store_true")
    sp.add_argument("--out", metavar="DIR", help="write NAME.csv and NAME.certificate.json here")
    sp.add_argument("--step", type=float, metavar="H")
    sp.add_argument("--horizon", type=float, metavar="T")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_example)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, TimeScaleError, OSError, ValueError, ArithmeticError) as exc:
        sys.stderr.write(f"tsconsensus: error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
