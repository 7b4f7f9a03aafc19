"""Command-line interface.

Subcommands: simulate, estimate, table, rates, shift-demo, verify.
Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import ValidationError
from .experiments import (
    PRESETS,
    build_config,
    cmd_estimate,
    cmd_rates,
    cmd_simulate,
    cmd_table,
)
from .regression import shift_demo


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; we reserve that
        raise ValidationError(message)


def _add_config_flags(p):
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--preset", choices=sorted(PRESETS),
                   help="desk (2^7 grid) or paper (2^9 grid) parameter preset")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--sigma", help="sigma model id (sigma1..sigma7, zero, custom:<expr>)")
    p.add_argument("--realizations", type=int)
    p.add_argument("--points", type=int)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--lh-coeff", dest="lh_coeff",
                   help="operator coefficients, e.g. 'a=0.5' or 'a=1,b=0'")
    p.add_argument("--h-list", dest="h_list", help="comma list: '2/nx' or absolute values")
    p.add_argument("--eps-list", dest="eps_list",
                   help="comma list: multiples of h ('4h') or '8/nx' or absolute")
    p.add_argument("--out", help="output directory")


def _build(args) -> "object":
    return build_config(
        preset=args.preset, config_file=args.config,
        seed=args.seed, sigma=args.sigma, realizations=args.realizations,
        points=args.points, bandwidth=args.bandwidth, lh_coeff=args.lh_coeff,
        h_list=args.h_list, eps_list=args.eps_list, out=args.out,
    )


def make_parser() -> _Parser:
    parser = _Parser(prog="spdest", description=__doc__)
    parser.add_argument("--version", action="version", version=f"spdest {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="produce predictor datasets (one CSV per h/eps pair)")
    _add_config_flags(p)
    p.add_argument("--workers", type=int, default=1, help="parallel realization workers")
    p.add_argument("--snapshot-stride", type=int, default=0,
                   help="also write decimated raw rows of realization 0 every N steps")

    p = sub.add_parser("estimate", help="kernel-regression curve for one dataset CSV")
    p.add_argument("dataset")
    p.add_argument("--bandwidth", type=float, default=0.05)
    p.add_argument("--u-min", type=float, default=0.0)
    p.add_argument("--u-max", type=float, default=4.0)
    p.add_argument("--grid-n", type=int, default=512)
    p.add_argument("--sigma", help="override the manifest sigma id for the truth column")
    p.add_argument("--out", help="curve CSV path")

    p = sub.add_parser("table", help="L1-error matrix over the datasets of a run directory")
    p.add_argument("directory")
    p.add_argument("--bandwidth", type=float, default=0.05)
    p.add_argument("--u-min", type=float, default=0.0)
    p.add_argument("--u-max", type=float, default=4.0)
    p.add_argument("--grid-n", type=int, default=512)
    p.add_argument("--out", help="table CSV path")

    p = sub.add_parser("rates", help="normalizer scaling study against theory")
    p.add_argument("--beta", default="",
                   help="comma list of Riesz exponents in (0,1); empty for white noise only")
    p.add_argument("--h", dest="h_values", default="2^-4,2^-5,2^-6,2^-7,2^-8",
                   help="comma list of h values (2^-k or decimals)")
    p.add_argument("--rho", type=float, help="override eps = h^rho exponent")
    p.add_argument("--out", default="rates.csv")

    p = sub.add_parser("shift-demo", help="synthetic skewed-noise peak-shift demonstration")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--literal-composition", action="store_true",
                   help="feed the response itself into the noise amplitude")
    p.add_argument("--bandwidth", type=float, default=0.05)
    p.add_argument("--out", default="shift_demo.csv")

    p = sub.add_parser("verify", help="run the fast invariant suite")
    return parser


def _parse_h_values(text: str) -> list[float]:
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if token.startswith("2^"):
            out.append(2.0 ** float(token[2:]))
        else:
            out.append(float(token))
    return out


def _run(args) -> int:
    if args.command == "simulate":
        config = _build(args)
        result = cmd_simulate(config, workers=max(1, args.workers or 1))
        if args.snapshot_stride:
            from .lattice_sim import NoiseSpec, SnapshotWriter, simulate_stream
            from .sigma_models import model_from_id
            import os
            snap_path = os.path.join(config.output_dir, "snapshots_r0.csv")
            model = model_from_id(config.sigma_id, config.custom_lipschitz)
            with SnapshotWriter(snap_path, args.snapshot_stride) as snap:
                simulate_stream(config.grid, model,
                                NoiseSpec(config.master_seed, 0), observer=snap)
            print(f"wrote {snap_path}")
        print(f"wrote {result['manifest']}")
        for path in result["datasets"]:
            print(f"wrote {path}")
        return 0
    if args.command == "estimate":
        path = cmd_estimate(args.dataset, bandwidth=args.bandwidth,
                            u_min=args.u_min, u_max=args.u_max,
                            grid_n=args.grid_n, out_path=args.out,
                            sigma_id=args.sigma)
        print(f"wrote {path}")
        return 0
    if args.command == "table":
        path = cmd_table(args.directory, bandwidth=args.bandwidth,
                         u_min=args.u_min, u_max=args.u_max,
                         grid_n=args.grid_n, out_path=args.out)
        print(f"wrote {path}")
        return 0
    if args.command == "rates":
        betas = [float(b) for b in args.beta.split(",") if b.strip()]
        result = cmd_rates(_parse_h_values(args.h_values), betas=betas,
                           rho=args.rho, out_path=args.out)
        for rec in result["records"]:
            beta_txt = "white" if rec["beta"] is None else f"beta={rec['beta']:g}"
            print(f"{rec['kind']} ({beta_txt}): slope {rec['slope']:.4f} "
                  f"vs theory {rec['theory_slope']:.4f}")
        print(f"wrote {result['rates']} and {result['summary']}")
        return 0
    if args.command == "shift-demo":
        result = shift_demo(args.n, args.seed,
                            literal_composition=args.literal_composition,
                            bandwidth=args.bandwidth)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write("u,estimate,pi_lower,pi_upper,truth\n")
            c = result.curve
            for k in range(c.u_grid.shape[0]):
                fh.write(f"{c.u_grid[k]:.17g},{c.estimate[k]:.17g},"
                         f"{c.pi_lower[k]:.17g},{c.pi_upper[k]:.17g},"
                         f"{c.truth[k]:.17g}\n")
        print(f"noise mean {result.noise_mean:+.5f}; wrote {args.out}")
        return 0
    if args.command == "verify":
        from .verify import run_all
        return 0 if run_all() else 2
    raise ValidationError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return _run(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (KeyboardInterrupt, BrokenPipeError):
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
