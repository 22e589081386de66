"""Command-line entry point: `mimodab <experiment> --config file.json`."""

import argparse
import json
import sys

import numpy as np

from .experiments import EXPERIMENT_KINDS, ExperimentConfig, run_experiment

_GRADCHECK_TOL = 1e-4


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mimodab",
        description="Massive MIMO downlink precoding simulator with "
                    "nonlinear PA distortion")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for kind in EXPERIMENT_KINDS:
        sp = sub.add_parser(kind, help=f"run the {kind} experiment")
        sp.add_argument("--config", default=None,
                        help="JSON experiment config")
        sp.add_argument("--seed", type=int, default=None,
                        help="override master_seed")
        sp.add_argument("--out", default=None, help="override output dir")
        sp.add_argument("--threads", type=int, default=1,
                        help="concurrent realizations")
        if kind == "gradcheck":
            sp.add_argument("--b", type=int, default=None,
                            help="antenna count")
            sp.add_argument("--u", type=int, default=None, help="user count")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            cfg_dict = json.load(fh)
    else:
        if args.experiment != "gradcheck":
            print("error: --config is required for this experiment",
                  file=sys.stderr)
            return 2
        cfg_dict = {}
    cfg_dict.setdefault("experiment", args.experiment)
    if cfg_dict["experiment"] != args.experiment:
        print(f"error: config is for '{cfg_dict['experiment']}', "
              f"command line says '{args.experiment}'", file=sys.stderr)
        return 2
    if args.experiment == "gradcheck":
        if args.b is not None:
            cfg_dict["b"] = args.b
        if args.u is not None:
            cfg_dict["u"] = args.u
    if args.seed is not None:
        cfg_dict["master_seed"] = args.seed
    if args.out is not None:
        cfg_dict["out_dir"] = args.out

    cfg = ExperimentConfig.from_dict(cfg_dict)
    table = run_experiment(cfg, threads=args.threads)

    if args.experiment == "gradcheck":
        worst = float(np.max(table.values(metric="grad_rel_error")))
        print(f"max relative gradient error: {worst:.3e}")
        return 0 if worst <= _GRADCHECK_TOL else 1

    n_raw = len(table.raw_rows())
    print(f"{cfg.experiment}: wrote {cfg.out_dir}/results.csv "
          f"({n_raw} raw rows, {cfg.n_realizations} realizations) "
          f"and manifest.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
