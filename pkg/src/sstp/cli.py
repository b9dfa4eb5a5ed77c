"""Command-line surface for the pipeline.

Subcommands mirror the pipeline stages: gen-synth, pretrain, extract,
select, eval, stats.  Every command is deterministic given its flags and
input files; all randomness flows from explicit --seed flags into
Philox4x64-10 counter-based streams (see rng.py).

Exit codes: 0 success, 2 usage error, 3 data/contract error.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import evaluation, features, partitioning, predictor, scene_data
from .errors import SstpError, UsageError

METHODS = ("sstp", "random", "kmeans", "herding")


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError:
        raise UsageError(f"expected LO:HI, got {text!r}") from None


def _positive_seed(args) -> int:
    if args.seed < 0:
        raise UsageError(f"--seed must be >= 0, got {args.seed}")
    return args.seed


def _resolve_threads(args) -> int:
    threads = args.threads
    if threads is None:
        env = os.environ.get("SSTP_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise UsageError(f"--threads must be >= 1, got {threads}")
    # Upper bound on internal parallelism; the reference implementation runs
    # sequentially, and results never depend on this value.
    return threads


def _synth_config(args) -> scene_data.SynthConfig:
    head_lo, head_hi = _parse_range(args.head_densities)
    tail_lo, tail_hi = _parse_range(args.tail_densities)
    if args.scenes < 0:
        raise UsageError(f"--scenes must be >= 0, got {args.scenes}")
    if not (0.0 <= args.tail_weight <= 1.0):
        raise UsageError(f"--tail-weight must be in [0, 1], got {args.tail_weight}")
    defaults = scene_data.SynthConfig(0)
    head = scene_data.MixtureComponent(
        head_lo, head_hi, 1.0 - args.tail_weight,
        speed_lo=defaults.head.speed_lo, speed_hi=defaults.head.speed_hi,
        turn_prob=defaults.head.turn_prob,
        turn_rate_lo=defaults.head.turn_rate_lo, turn_rate_hi=defaults.head.turn_rate_hi,
    )
    tail = scene_data.MixtureComponent(
        tail_lo, tail_hi, args.tail_weight,
        speed_lo=defaults.tail.speed_lo, speed_hi=defaults.tail.speed_hi,
        turn_prob=defaults.tail.turn_prob,
        turn_rate_lo=defaults.tail.turn_rate_lo, turn_rate_hi=defaults.tail.turn_rate_hi,
    )
    return scene_data.SynthConfig(
        num_scenes=args.scenes, t_obs=args.t_obs, t_pred=args.t_pred,
        head=head, tail=tail, noise_std=args.noise_std,
    )


def cmd_gen_synth(args) -> int:
    ds = scene_data.generate_synthetic(_synth_config(args), _positive_seed(args))
    scene_data.save_dataset(ds, args.out)
    print(f"wrote {len(ds)} scenes to {args.out}")
    return 0


def cmd_pretrain(args) -> int:
    if args.epochs < 0:
        raise UsageError(f"--epochs must be >= 0, got {args.epochs}")
    if args.lr <= 0:
        raise UsageError(f"--lr must be > 0, got {args.lr}")
    ds = scene_data.load_dataset(args.dataset)
    model = predictor.ModelConfig(
        t_obs=ds.t_obs, t_pred=ds.t_pred, hidden_dim=args.hidden,
        latent_dim=args.latent, num_modes=args.modes, density_cap=args.density_cap,
    )
    params = predictor.init_params(model, _positive_seed(args))
    params = predictor.pretrain(params, ds, args.epochs, args.lr, args.seed)
    predictor.write_params(params, args.out)
    print(f"wrote params ({params.hidden_dim}x{params.latent_dim}, M={params.num_modes}) to {args.out}")
    return 0


def cmd_extract(args) -> int:
    ds = scene_data.load_dataset(args.dataset)
    params = predictor.read_params(args.params, density_cap=args.density_cap)
    fs = features.extract_features(params, ds)
    features.write_features(fs, args.out)
    print(f"wrote {len(fs)} feature records (dim {fs.dim}) to {args.out}")
    return 0


def cmd_select(args) -> int:
    if not (0.0 < args.alpha <= 1.0):
        raise UsageError(f"--alpha must be in (0, 1], got {args.alpha}")
    if args.tau < 1:
        raise UsageError(f"--tau must be >= 1, got {args.tau}")
    _positive_seed(args)
    fs = features.read_features(args.features)
    feature_hash = "sha256:" + partitioning.file_sha256(args.features)
    params_hash = "sha256:" + partitioning.file_sha256(args.params) if args.params else "unknown"
    if args.method == "sstp":
        result = partitioning.select_sstp(
            fs, args.alpha, args.tau, args.seed,
            include_self=args.include_self,
            feature_hash=feature_hash, params_hash=params_hash,
        )
    else:
        result = partitioning.select_baseline(
            fs, args.method, args.alpha, args.tau, args.seed,
            per_bucket=args.per_bucket,
            feature_hash=feature_hash, params_hash=params_hash,
        )
    partitioning.write_selection(result, args.out)
    print(f"selected {len(result.ids)} of {len(fs)} scenes -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    if args.epochs < 0:
        raise UsageError(f"--epochs must be >= 0, got {args.epochs}")
    if args.lr <= 0:
        raise UsageError(f"--lr must be > 0, got {args.lr}")
    if args.mr_threshold <= 0:
        raise UsageError(f"--mr-threshold must be > 0, got {args.mr_threshold}")
    full = scene_data.load_dataset(args.dataset)
    eval_set = scene_data.load_dataset(args.eval_set)
    selection = partitioning.read_selection(args.selection)
    config = evaluation.ExperimentConfig(
        eval_set=eval_set,
        epochs=args.epochs,
        lr=args.lr,
        seed=_positive_seed(args),
        mr_threshold=args.mr_threshold,
        include_full_arm=not args.no_full_arm,
    )
    report = evaluation.run_experiment(full, selection.ids, config)
    evaluation.write_report(report, args.out)
    if args.table:
        evaluation.write_report_table(report, args.table)
    arm_names = ", ".join(name for name, _ in report.arms)
    print(f"wrote report ({arm_names}) to {args.out}")
    return 0


def cmd_stats(args) -> int:
    if args.tau < 1:
        raise UsageError(f"--tau must be >= 1, got {args.tau}")
    if bool(args.features) == bool(args.dataset):
        raise UsageError("provide exactly one of --features / --dataset")
    if args.features:
        fs = features.read_features(args.features)
        pairs = [(r.scene_id, r.density) for r in fs.records]
        source = args.features
    else:
        ds = scene_data.load_dataset(args.dataset)
        pairs = [(s.scene_id, s.density) for s in ds.scenes]
        source = args.dataset
    if not pairs:
        raise UsageError("no scenes to summarize")
    plan = partitioning.partition_pairs(pairs, args.tau)
    density_of = dict(pairs)
    total = len(pairs)
    high = sum(1 for _, d in pairs if d >= args.high_threshold)

    lines = [
        "#STATS v1",
        f"source={source}",
        f"total={total}",
        f"tau={args.tau}",
        f"rho_min={plan.rho_min}",
        f"high_density_threshold={args.high_threshold}",
        f"high_density_share={high / total!r}",
    ]
    selected_ids = None
    if args.selection:
        selected_ids = list(partitioning.read_selection(args.selection).ids)
        missing = [i for i in selected_ids if i not in density_of]
        if missing:
            raise UsageError(f"selection ids not in source: {missing[:5]}")
        sel_high = sum(1 for i in selected_ids if density_of[i] >= args.high_threshold)
        lines.append(f"selected_total={len(selected_ids)}")
        lines.append(f"selected_high_density_share={sel_high / max(len(selected_ids), 1)!r}")
    for b in plan.buckets:
        lines.append(f"#BUCKET k={b.k} lo={b.lo} hi={b.hi}")
        lines.append(f"count={b.size}")
        lines.append(f"share={b.size / total!r}")
        if selected_ids is not None:
            members = set(b.member_ids)
            sel_count = sum(1 for i in selected_ids if i in members)
            lines.append(f"selected_count={sel_count}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sstp",
        description="Density-balanced coreset selection for trajectory prediction datasets.",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap internal parallelism (env fallback SSTP_THREADS); never changes results")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic long-tail scene file")
    p.add_argument("--out", required=True)
    p.add_argument("--scenes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-obs", type=int, default=10)
    p.add_argument("--t-pred", type=int, default=6)
    p.add_argument("--head-densities", default="2:10", help="LO:HI inclusive")
    p.add_argument("--tail-densities", default="40:80", help="LO:HI inclusive")
    p.add_argument("--tail-weight", type=float, default=0.1)
    p.add_argument("--noise-std", type=float, default=0.05)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("pretrain", help="initialize and pretrain the toy predictor")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--latent", type=int, default=32)
    p.add_argument("--modes", type=int, default=6)
    p.add_argument("--density-cap", type=float, default=predictor.DEFAULT_DENSITY_CAP)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("extract", help="compute gradient features for every scene")
    p.add_argument("--dataset", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--density-cap", type=float, default=predictor.DEFAULT_DENSITY_CAP)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("select", help="select a subset from a feature file")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=METHODS, default="sstp")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--tau", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-bucket", action="store_true",
                   help="run baselines inside the density buckets instead of globally")
    p.add_argument("--include-self", action="store_true",
                   help="include i=j in the unselected similarity sum (argmin-equivalent)")
    p.add_argument("--params", default=None, help="params file, hashed into provenance")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("eval", help="train paired arms on a selection and report metrics")
    p.add_argument("--dataset", required=True, help="training pool scene file")
    p.add_argument("--selection", required=True)
    p.add_argument("--eval-set", required=True, help="held-out scene file")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mr-threshold", type=float, default=evaluation.MR_THRESHOLD)
    p.add_argument("--no-full-arm", action="store_true")
    p.add_argument("--table", default=None, help="also write a TSV table here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="density histogram and partition summary")
    p.add_argument("--features", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--selection", default=None, help="report before/after shares")
    p.add_argument("--tau", type=int, default=10)
    p.add_argument("--high-threshold", type=int, default=40)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _resolve_threads(args)
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SstpError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
