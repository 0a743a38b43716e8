"""Command-line scenarios.

Every subcommand writes CSV (when ``--out`` is given) and prints one summary
line.  Exit status: 0 on success, 1 for invalid configuration, 2 for numerical
failures such as non-convergence or a complexity guard.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

import numpy as np

from . import scenarios as sc
from .errors import NumericalError
from .network import load_compiled
from .pathsum import PhotonConfig, conditional_fidelity, fidelity_report, hom_dip_scan
from .shapeopt import OptimizeSpec, gaussian_distance, optimize_shape, uncertainty_product
from .wavepacket import CONJUGATE_PHASE, DEFAULT_POINTS, NATIVE_SHIFT, iter_grid, write_csv

CONVENTIONS = {"native": NATIVE_SHIFT, "conjugate": CONJUGATE_PHASE}


def _pattern(text: str) -> dict[int, int]:
    """``"2:1,3:0"`` -> ``{2: 1, 3: 0}``."""
    out = {}
    for item in filter(None, text.split(",")):
        mode, _, count = item.partition(":")
        out[int(mode)] = int(count or 1)
    return out


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _taus(args) -> np.ndarray:
    if getattr(args, "tau", None) is not None:
        return np.array([args.tau])
    return iter_grid(args.tau_min, args.tau_max, args.step)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--grid-points", type=int, default=DEFAULT_POINTS, help="samples per packet grid (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="seed for randomised suites")
    p.add_argument("--convention", choices=sorted(CONVENTIONS), default="conjugate")
    p.add_argument("--normalized", action="store_true", help="divide fidelities by the displaced-state norm")


def _add_range(p: argparse.ArgumentParser, lo: float, hi: float, step: float) -> None:
    p.add_argument("--tau", type=float, help="single delay (overrides the range)")
    p.add_argument("--tau-min", type=float, default=lo)
    p.add_argument("--tau-max", type=float, default=hi)
    p.add_argument("--step", type=float, default=step)


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors: exit 1 rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="modematch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("fig1", help="HOM dips of the gaussian, lorentzian and double-sided lorentzian presets")
    _add_common(p)
    _add_range(p, -4.0, 4.0, 0.02)

    p = sub.add_parser("hom-sweep", help="coincidence versus delay on a beamsplitter")
    _add_common(p)
    _add_range(p, -4.0, 4.0, 0.02)
    p.add_argument("--preset", default="gaussian")
    p.add_argument("--eta", type=float, default=0.5)

    p = sub.add_parser("fidelity-sweep", help="fidelity versus the displacement of one network edge")
    _add_common(p)
    _add_range(p, -2.0, 2.0, 0.05)
    p.add_argument("--network", required=True, help="network JSON file")
    p.add_argument("--inputs", required=True, help="occupied input modes, e.g. 0,1")
    p.add_argument("--edge", required=True, help="input,output pair whose displacement is swept")
    p.add_argument("--preset", default="gaussian")
    p.add_argument("--pattern", help="post-selection pattern, e.g. 2:1 (conditional fidelity)")

    p = sub.add_parser("curvature-table", help="fidelity curvature ratios over random circuits")
    _add_common(p)
    p.add_argument("--circuits", type=int, default=20)
    p.add_argument("--max-modes", type=int, default=5)
    p.add_argument("--max-photons", type=int, default=3)

    p = sub.add_parser("optimize", help="minimum-curvature packet at fixed variance")
    _add_common(p)
    p.add_argument("--variance", type=float, required=True)
    p.add_argument("--points", type=int, default=2048, help="optimiser grid points")

    p = sub.add_parser("jitter-study", help="HOM visibility under gaussian emission-time jitter")
    _add_common(p)
    p.add_argument("--fractions", default="0,0.05,0.1,0.2", help="jitter widths in units of the packet duration")

    p = sub.add_parser("filter-study", help="gaussian filtering of the heralded double-sided-lorentzian packet")
    _add_common(p)
    p.add_argument("--widths", default="2,1,0.5,0.25")

    p = sub.add_parser("oracle", help="engine versus independent oracles")
    _add_common(p)
    p.add_argument("--kind", choices=("inner", "two-photon", "conditional"), default="inner")
    p.add_argument("--instances", type=int)
    # diagnostic subcommand: accepted, but kept out of the help listing
    sub._choices_actions = [a for a in sub._choices_actions if a.dest != "oracle"]
    return parser


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def run(args) -> str:
    """Execute one scenario; returns the summary line."""
    conv = CONVENTIONS[args.convention]
    n_points = args.grid_points
    cmd = args.command

    if cmd == "fig1":
        header, rows = sc.fig1_table(_taus(args), conv, n_points)
        sc.write_table(args.out, header, rows)
        bad = sc.fig1_ordering_violations(rows)
        order = "holds" if not bad else f"fails at {len(bad)} delays (first |tau|={min(abs(t) for t in bad):.3g})"
        return f"fig1: {len(rows)} delays; ordering lorentzian > dsl > gaussian {order}"

    if cmd == "hom-sweep":
        w = sc.packet(args.preset, n_points)
        scan = hom_dip_scan(w, _taus(args), args.eta, conv)
        if args.out:
            scan.to_csv(args.out)
        if len(scan.values) == 1:
            return f"hom-sweep: {args.preset} eta={args.eta} tau={scan.params[0]!r} coincidence={scan.values[0]!r}"
        return f"hom-sweep: {args.preset} eta={args.eta} {len(scan.values)} delays, min={min(scan.values):.6g} max={max(scan.values):.6g}"

    if cmd == "fidelity-sweep":
        c = load_compiled(args.network)
        k, l = _ints(args.edge)
        p = PhotonConfig(_ints(args.inputs), sc.packet(args.preset, n_points), conv)
        pattern = _pattern(args.pattern) if args.pattern else None
        base = np.array(c.displacements)
        rows, norms = [], []
        for tau in _taus(args):
            t = base.copy()
            t[k, l] += tau
            ct = c.with_displacements(t)
            if pattern is None:
                rep = fidelity_report(ct, p, args.normalized)
                rows.append([float(tau), rep.fidelity])
                norms.append(rep.norm_check)
            else:
                f, prob = conditional_fidelity(ct, p, pattern)
                rows.append([float(tau), f])
                norms.append(prob)
        sc.write_table(args.out, ["tau", "value"], rows)
        label = "p_success" if pattern else "norm_check"
        return (
            f"fidelity-sweep: edge ({k},{l}) {len(rows)} delays, min F={min(r[1] for r in rows):.6g}; "
            f"{label} in [{min(norms):.6g}, {max(norms):.6g}]"
        )

    if cmd == "curvature-table":
        header, rows = sc.curvature_table(args.seed, args.circuits, args.max_modes, args.max_photons, conv, n_points)
        sc.write_table(args.out, header, rows)
        return f"curvature-table: {args.circuits} circuits, {len(rows)} edges, worst ratio error {sc.curvature_ratio_error(rows):.3g}"

    if cmd == "optimize":
        w, curv = optimize_shape(OptimizeSpec(args.variance, n_points=args.points))
        if args.out:
            write_csv(w, args.out)
        return (
            f"optimize: variance={args.variance!r} curvature={curv:.10g} "
            f"uncertainty_product={uncertainty_product(w):.10g} gaussian_distance={gaussian_distance(w):.3g}"
        )

    if cmd == "jitter-study":
        header, rows = sc.jitter_study(fractions=_floats(args.fractions), convention=conv, n_points=n_points)
        sc.write_table(args.out, header, rows)
        worst = {r[0]: r[4] for r in rows}
        return "jitter-study: visibility at largest jitter " + ", ".join(f"{k}={v:.6g}" for k, v in worst.items())

    if cmd == "filter-study":
        header, rows = sc.filter_study(_floats(args.widths), conv, n_points)
        sc.write_table(args.out, header, rows)
        last = rows[-1]
        return (
            f"filter-study: width {last[0]} transmits {last[1]:.4g}, gaussian_distance {rows[0][2]:.4g} -> {last[2]:.4g}, "
            f"curvature {rows[0][3]:.4g} -> {last[3]:.4g}"
        )

    if cmd == "oracle":
        if args.kind == "inner":
            header, rows = sc.inner_oracle_table(args.seed, args.instances or 200, n_points=n_points)
            worst = max(r[-1] for r in rows)
        elif args.kind == "two-photon":
            header, rows = sc.two_photon_table(args.seed, args.instances or 50, conv, n_points)
            worst = max(r[-1] for r in rows)
        else:
            header, rows = sc.conditional_oracle_table(args.seed, args.instances or 20, n_points)
            worst = max(max(abs(r[4] - r[5]), abs(r[6] - r[7])) for r in rows)
        sc.write_table(args.out, header, rows)
        return f"oracle {args.kind}: {len(rows)} instances, worst disagreement {worst:.3g}"

    raise ValueError(f"unknown command {cmd!r}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        print(run(args))
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
