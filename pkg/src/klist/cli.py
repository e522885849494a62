"""Command-line entry point: ``klist run | smallball | plot | theory``."""
import argparse
import logging
import sys

from . import __version__


def _ints(text):
    return tuple(int(t) for t in text.split(",") if t.strip())


def _floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def build_parser():
    p = argparse.ArgumentParser(prog="klist", description="k-list estimation experiments")
    p.add_argument("--version", action="version", version=f"klist {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the (d, sigma_N, k) sweep")
    run.add_argument("--config", help="INI file with [experiment], [fit] and optional [fit.dN] sections")
    run.add_argument("--d", type=_ints, dest="dims", help="comma-separated dimensions")
    run.add_argument("--sigma-x", type=float, dest="sigma_x")
    run.add_argument("--sigma-n", type=_floats, dest="sigma_n_list", help="comma-separated noise std devs")
    run.add_argument("--k-grid", type=_ints, dest="k_grid", help="comma-separated increasing list sizes")
    run.add_argument("--trials", type=int, help="trials for both estimators")
    run.add_argument("--trials-d1", type=int, dest="trials_d1")
    run.add_argument("--trials-d2", type=int, dest="trials_d2")
    run.add_argument("--restarts", type=int)
    run.add_argument("--max-iters", type=int, dest="max_iters")
    run.add_argument("--n-train", type=int, dest="n_train")
    run.add_argument("--seed", type=int, dest="seed_root")
    run.add_argument("--out", dest="out_dir")
    run.add_argument("--plots", action="store_true", default=None, dest="emit_plots")
    run.add_argument("--workers", type=int, default=1, help="processes (results do not depend on this)")

    sb = sub.add_parser("smallball", help="empirical small-ball probabilities and fitted exponent")
    sb.add_argument("--model", choices=("gaussian", "powerlaw"), default="gaussian")
    sb.add_argument("--d", type=int, default=1)
    sb.add_argument("--sigma-x", type=float, default=1.0)
    sb.add_argument("--sigma-n", type=float, default=1.0)
    sb.add_argument("--beta", type=float, default=1.0)
    sb.add_argument("--r-max", type=float, default=1.0)
    sb.add_argument("--trials", type=int, default=1_000_000)
    sb.add_argument("--seed", type=int, default=0)
    sb.add_argument("--out", default="smallball.csv", help="output CSV path")

    pl = sub.add_parser("plot", help="render fig_d{d}.svg from a results CSV")
    pl.add_argument("csv")
    pl.add_argument("--out", default=".")

    th = sub.add_parser("theory", help="print closed-form predictions")
    th.add_argument("--d", type=int, default=1)
    th.add_argument("--sigma-x", type=float, default=1.0)
    th.add_argument("--sigma-n", type=float, default=1.0)
    th.add_argument("--k", type=_ints, default=tuple(2**i for i in range(11)))
    return p


def _cmd_run(args):
    from .experiment import load_spec, run_experiment

    overrides = {
        name: getattr(args, name)
        for name in ("dims", "sigma_x", "sigma_n_list", "k_grid", "trials_d1", "trials_d2",
                     "restarts", "max_iters", "n_train", "seed_root", "out_dir", "emit_plots")
    }
    if args.trials is not None:
        overrides["trials_d1"] = overrides["trials_d1"] or args.trials
        overrides["trials_d2"] = overrides["trials_d2"] or args.trials
    spec = load_spec(args.config, **overrides)
    path = run_experiment(spec, workers=args.workers)
    print(path)


def _cmd_smallball(args):
    from .experiment import make_error_model, run_smallball

    model = make_error_model(args.model, args.d, args.sigma_x, args.sigma_n, args.beta, args.r_max)
    print(run_smallball(model, args.out, args.trials, args.seed))


def _cmd_plot(args):
    from .plots import render_plots

    for path in render_plots(args.csv, args.out):
        print(path)


def _cmd_theory(args):
    from .model import GaussianModel
    from .theory import ZADOR_CONSTANTS, gaussian_d1_highrate, gaussian_d2_lower

    m = GaussianModel.from_std(args.d, args.sigma_x, args.sigma_n)
    g, prov = ZADOR_CONSTANTS.get(m.d)
    print(f"# d={m.d} sigma_x={args.sigma_x:g} sigma_n={args.sigma_n:g}")
    print(f"# gain={m.gain!r} posterior_var={m.posterior_var!r} sigma_g2={m.sigma_g2!r} G_d={g!r} ({prov})")
    print("k,d1_highrate,d2_lower_bound")
    for k in args.k:
        print(f"{k},{gaussian_d1_highrate(m, k)!r},{gaussian_d2_lower(m, k)!r}")


_COMMANDS = {"run": _cmd_run, "smallball": _cmd_smallball, "plot": _cmd_plot, "theory": _cmd_theory}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        _COMMANDS[args.command](args)
    except (ValueError, TypeError, OSError, ArithmeticError) as exc:
        print(f"klist {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
