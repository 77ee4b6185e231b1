"""Command line interface: run one of the four studies and write CSV
reports plus figures into an output directory.

    mmfem convergence|thin|condscale|electro --config cfg.json --out dir
"""

from __future__ import annotations

import argparse
import sys

from .harness.config import StudyConfig


def _default_config(study):
    if study == "convergence":
        return StudyConfig(study="convergence", n_parts=1, degrees=[1],
                           levels=3, coarsest=8)
    if study == "thin":
        return StudyConfig(study="thin", n_parts=3, coarsest=10)
    if study == "condscale":
        return StudyConfig(study="condscale", n_parts=3, levels=3, coarsest=8)
    return StudyConfig(study="electro", steps=20)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mmfem",
        description="Poisson solves on stacks of overlapping meshes: "
                    "convergence, robustness, conditioning and "
                    "electrostatics studies.",
    )
    sub = parser.add_subparsers(dest="study", required=True)
    for name, helptext in [
        ("convergence", "error rates under refinement with random parts"),
        ("thin", "robustness at near-touching part boundaries"),
        ("condscale", "condition number against mesh size"),
        ("electro", "charged rigid bodies bouncing in a box"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON config (see StudyConfig)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--dump-matrix", action="store_true",
                       help="dump the first assembled matrix as 'row col value' text")
        p.add_argument("--dump-quadrature", action="store_true",
                       help="dump a sample cut-cell rule as x,y,w CSV")
        p.add_argument("--no-figures", action="store_true",
                       help="skip matplotlib figure output")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.config:
        cfg = StudyConfig.from_json(args.config)
        if cfg.study != args.study:
            print(f"config is for study {cfg.study!r}, not {args.study!r}",
                  file=sys.stderr)
            return 2
    else:
        cfg = _default_config(args.study)
    if args.out is not None:
        cfg.out_dir = args.out
    if args.dump_matrix:
        cfg.dump_matrix = True
    if args.dump_quadrature:
        cfg.dump_quadrature = True
    if args.no_figures:
        cfg.figures = False

    if args.study == "convergence":
        from .harness.studies import run_convergence

        reports = run_convergence(cfg)
        for r in reports:
            print(f"N={r.n_parts} p={r.degree}: L2 rate {r.l2_rate:.4f}, "
                  f"H1 rate {r.h1_rate:.4f}")
    elif args.study == "thin":
        from .harness.studies import run_thin_intersection

        rows = run_thin_intersection(cfg)
        for row in rows:
            print(f"k={row[1]:3d} x0={row[2]:.3e} L2={row[3]:.4e} "
                  f"H1={row[4]:.4e} kappa={row[5]:.4e}")
    elif args.study == "condscale":
        from .harness.studies import run_condition_scaling

        rows, slope = run_condition_scaling(cfg)
        for row in rows:
            print(f"level={row[0]} h={row[1]:.4e} kappa={row[2]:.4e} "
                  f"cg_iters={row[3]}")
        print(f"fitted slope of log(kappa) vs log(h): {slope:.3f}")
    else:
        from .harness.electro import run_electrostatics

        rows, bodies = run_electrostatics(cfg)
        print(f"completed {cfg.steps} steps; final body centers:")
        for b in bodies:
            print(f"  body {b.part}: ({b.com[0]:+.3f}, {b.com[1]:+.3f})")
    print(f"reports written to {cfg.out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
