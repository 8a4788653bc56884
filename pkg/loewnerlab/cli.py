"""Command-line entry point: `python -m loewnerlab <command> ...`."""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from loewnerlab.config import build_experiment_config, config, load_experiment_config, read_config_values
from loewnerlab.conformal import domain_projection, save_map, uniformize
from loewnerlab.crossings import AnnulusQuery, QuadQuery, detect_unforced_crossings, quad_modulus
from loewnerlab.curves import CurveClass, read_trace, write_curve, write_driving
from loewnerlab.errors import InvalidInputError, LabError
from loewnerlab.experiments import run_experiment, run_stability_experiment, run_warning_example
from loewnerlab.fjords import Fjord, build_fjords, split_marked
from loewnerlab.lattice import BoundaryEdge, read_domain
from loewnerlab.loewner import extract_driving, sample_sle, trace_in_disc
from loewnerlab.render import write_csv
from loewnerlab.stochastic import edges_in_sector, harmonic_measure_mc

logger = logging.getLogger(__name__)

EXPERIMENT_COMMANDS = {"commute", "warning", "stability"}
# keys a --config file may supply to the other subcommands
FILE_KEYS = ("seed", "out", "kappa", "T", "dt")


def parse_point(text: str) -> complex:
    """Accept `x,y`, `x+yi` or `x+yj`."""
    text = text.strip()
    try:
        if "," in text:
            x, y = text.split(",")
            return complex(float(x), float(y))
        return complex(text.replace("i", "j").replace(" ", ""))
    except ValueError as e:
        raise InvalidInputError(f"cannot parse point {text!r}") from e


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise InvalidInputError(f"cannot parse numbers from {text!r}") from e


def _pairs(text: str) -> List[tuple]:
    out = []
    for item in text.split(";"):
        if item.strip():
            x, y = item.split(",")
            out.append((int(x), int(y)))
    return out


def _edges(text: str) -> List[BoundaryEdge]:
    out = []
    for item in text.split(";"):
        if item.strip():
            i, j, d = item.split(",")
            out.append(BoundaryEdge(int(i), int(j), d.strip().upper()))
    return out


def _fmt(z: complex) -> str:
    return f"{z.real:.12g} {z.imag:.12g}"


def _require(args, *names: str) -> None:
    missing = [f"--{name}" for name in names if getattr(args, name, None) is None]
    if missing:
        raise InvalidInputError(f"{args.command} needs {', '.join(missing)} on the command line or in --config")


def cmd_sle(args) -> int:
    _require(args, "kappa", "seed", "out")
    hull = sample_sle(args.kappa, args.T, args.dt, args.seed)
    if args.disc:
        curve = trace_in_disc(hull)
        write_curve(args.out, curve.t, curve.z)
    else:
        write_curve(args.out, hull.times, hull.tips)
    if args.driving_out:
        write_driving(args.driving_out, hull.driving)
    print(f"wrote {len(hull.times)} trace samples to {args.out}")
    return 0


def cmd_extract(args) -> int:
    _require(args, "out")
    _, z = read_trace(args.trace)
    w = extract_driving(z, args.npts)
    write_driving(args.out, w)
    print(f"extraction error {w.extraction_error:.6g}")
    return 0


def cmd_map(args) -> int:
    dom = read_domain(args.domain)
    fmap = uniformize(dom)
    if args.save:
        save_map(args.save, fmap)
    for text in args.probe:
        z = parse_point(text)
        value = fmap.from_disc(z) if args.inverse else fmap.to_disc(z)
        print(_fmt(complex(value)))
    return 0


def cmd_project(args) -> int:
    dom = read_domain(args.domain)
    fmap = uniformize(dom)
    for text in args.point:
        print(_fmt(domain_projection(fmap, parse_point(text), args.eps)))
    return 0


def cmd_fjords(args) -> int:
    dom = read_domain(args.domain)
    fjords = build_fjords(dom, delta=args.delta, C=args.C, reference=args.reference, refinement=args.refinement)
    rows = [
        {"index": k, "depth": f.depth, "mouth_diameter": f.mouth_diameter, "marked": f.marked, "nodes": f.points.size}
        for k, f in enumerate(fjords)
    ]
    columns = ["index", "depth", "mouth_diameter", "marked", "nodes"]
    if args.out:
        write_csv(args.out, columns, rows)
    marked, unmarked = split_marked(fjords)
    if args.reference == "ab":
        print(f"marked fjords: {len(marked)}")
        for f in marked:
            _print_fjord(fjords.index(f), f)
        print(f"unmarked fjords: {len(unmarked)}")
    for f in unmarked if args.reference == "ab" else fjords:
        _print_fjord(fjords.index(f), f)
    return 0


def _print_fjord(index: int, f: Fjord) -> None:
    print(f"fjord {index}: depth {f.depth:.6g}, mouth {f.mouth_diameter:.6g}")


def _quad(args) -> QuadQuery:
    corners = _pairs(args.corners)
    if len(corners) != 4:
        raise InvalidInputError("--corners needs four lattice vertices")
    return QuadQuery(frozenset(_pairs(args.cells)), tuple(corners))


def cmd_crossings(args) -> int:
    dom = read_domain(args.domain)
    _, z = read_trace(args.curve)
    curve = CurveClass(z)
    if args.annulus:
        x, y, r, R = _floats(args.annulus)
        query = AnnulusQuery(complex(x, y), r, R)
    elif args.cells and args.corners:
        query = _quad(args)
    else:
        raise InvalidInputError("give --annulus x,y,r,R or --cells with --corners")
    report = detect_unforced_crossings(dom, curve, query, refinement=args.refinement)
    print(f"crossings {report.total_crossings} unforced {report.unforced_crossings} forced {report.forced_crossings}")
    return 0


def cmd_modulus(args) -> int:
    dom = read_domain(args.domain) if args.domain else None
    print(f"{quad_modulus(dom, _quad(args), refinement=args.refinement, check_boundary=dom is not None):.10g}")
    return 0


def cmd_hm(args) -> int:
    dom = read_domain(args.domain)
    z = parse_point(args.z)
    if args.edges:
        target = _edges(args.edges)
    elif args.sector:
        theta0, theta1 = _floats(args.sector)
        target = edges_in_sector(dom, z, theta0, theta1)
    else:
        raise InvalidInputError("give --edges or --sector")
    seed = 0 if args.seed is None else args.seed
    est = harmonic_measure_mc(dom, z, target, args.walks, args.step, seed, args.refinement)
    print(f"{est.mean:.6f} {est.stderr:.6f} {est.n_samples}")
    return 0


def cmd_commute(args) -> int:
    overrides = {"experiment": "commute", "seed": args.seed, "out": str(args.out) if args.out else None}
    if args.config:
        cfg = load_experiment_config(args.config, overrides)
    else:
        cfg = build_experiment_config({k: v for k, v in overrides.items() if v is not None})
    report = run_experiment(cfg)
    print(f"{len(report.rows)} rows written to {cfg.out}")
    return 0


def cmd_warning(args) -> int:
    if args.config:
        overrides = {"experiment": "warning", "seed": args.seed, "alpha": args.alpha, "n_values": args.n, "out": str(args.out) if args.out else None}
        cfg = load_experiment_config(args.config, overrides)
        report = run_experiment(cfg)
    else:
        _require(args, "alpha", "n")
        report = run_warning_example(args.n, args.alpha, args.out or Path(config.OUTPUT_DIR))
    print(f"min gap {report.summary['min_gap']:.6f} over n={report.column('n')}")
    return 0


def cmd_stability(args) -> int:
    if args.config:
        cfg = load_experiment_config(args.config, {"experiment": "stability", "seed": args.seed, "out": str(args.out) if args.out else None})
        report = run_experiment(cfg)
    else:
        _require(args, "seed")
        dom = read_domain(args.domain) if args.domain else None
        report = run_stability_experiment(
            args.kappa, _floats(args.kappas), args.samples, args.seed, args.T, args.dt, dom=dom, out=args.out or Path(config.OUTPUT_DIR)
        )
    print(f"monotone fraction {report.summary['monotone_fraction']:.3f}")
    return 0


def _common_options() -> argparse.ArgumentParser:
    """Options every subcommand accepts; a --config file fills the ones not given."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path)
    return common


def build_parser(file_defaults: Optional[dict] = None) -> argparse.ArgumentParser:
    """
    Argument parser of the lab CLI.

    Args:
        file_defaults: Values read from --config; they replace the built-in defaults
            and give way to flags on the command line
    """
    common = _common_options()
    parser = argparse.ArgumentParser(prog="loewnerlab", description="Loewner chains, lattice domains and SLE experiments")
    parser.add_argument("--log-level", default=config.LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sle", parents=[common], help="sample an SLE(kappa) trace")
    p.add_argument("--kappa", type=float)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--driving-out", type=Path)
    p.add_argument("--disc", action="store_true", help="write the trace mapped to the unit disc")
    p.set_defaults(func=cmd_sle)

    p = sub.add_parser("extract", parents=[common], help="driving function of a half-plane trace")
    p.add_argument("--trace", type=Path, required=True)
    p.add_argument("--npts", type=int, default=1000)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("map", parents=[common], help="evaluate the Riemann map of a lattice domain")
    p.add_argument("--domain", type=Path, required=True)
    p.add_argument("--probe", action="append", required=True)
    p.add_argument("--inverse", action="store_true")
    p.add_argument("--save", type=Path, help="write the map cache file")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("project", parents=[common], help="radial projection P_eps inside a domain")
    p.add_argument("--domain", type=Path, required=True)
    p.add_argument("--point", action="append", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("fjords", parents=[common], help="fjords of a lattice domain")
    p.add_argument("--domain", type=Path, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--C", type=float, default=config.FJORD_C)
    p.add_argument("--reference", choices=["u", "ab"], default="u")
    p.add_argument("--refinement", type=int)
    p.set_defaults(func=cmd_fjords)

    p = sub.add_parser("crossings", parents=[common], help="unforced crossings of an annulus or quadrilateral")
    p.add_argument("--domain", type=Path, required=True)
    p.add_argument("--curve", type=Path, required=True)
    p.add_argument("--annulus", help="x,y,r,R")
    p.add_argument("--cells", help="i,j;i,j;...")
    p.add_argument("--corners", help="x,y;x,y;x,y;x,y")
    p.add_argument("--refinement", type=int)
    p.set_defaults(func=cmd_crossings)

    p = sub.add_parser("modulus", parents=[common], help="conformal modulus of a quadrilateral")
    p.add_argument("--domain", type=Path)
    p.add_argument("--cells", required=True)
    p.add_argument("--corners", required=True)
    p.add_argument("--refinement", type=int)
    p.set_defaults(func=cmd_modulus)

    p = sub.add_parser("hm", parents=[common], help="Monte-Carlo harmonic measure")
    p.add_argument("--domain", type=Path, required=True)
    p.add_argument("--z", required=True)
    p.add_argument("--edges", help="i,j,dir;...")
    p.add_argument("--sector", help="theta0,theta1 seen from z")
    p.add_argument("--walks", type=int, default=10_000)
    p.add_argument("--step", type=float)
    p.add_argument("--refinement", type=int)
    p.set_defaults(func=cmd_hm)

    p = sub.add_parser("commute", parents=[common], help="commutation experiment from a config file")
    p.set_defaults(func=cmd_commute)

    p = sub.add_parser("warning", parents=[common], help="non-conformal twist example")
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int, action="append")
    p.set_defaults(func=cmd_warning)

    p = sub.add_parser("stability", parents=[common], help="coupled SLE stability experiment")
    p.add_argument("--kappa", type=float, default=3.0)
    p.add_argument("--kappas", default="3.1,3.01")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--domain", type=Path)
    p.set_defaults(func=cmd_stability)

    if file_defaults:
        for p in sub.choices.values():
            p.set_defaults(**file_defaults)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s - %(message)s",
    )
    try:
        config.validate()
        if args.config and args.command not in EXPERIMENT_COMMANDS:
            values = read_config_values(args.config)
            args = build_parser({k: values[k] for k in FILE_KEYS if k in values}).parse_args(argv)
        return args.func(args)
    except LabError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
