"""Command-line entry point: ``gaitmatch {train,predict,eval,synth,bench}``.

Any subcommand accepts ``--config FILE`` holding ``key=value`` lines whose
keys are the long flag names (``min-sep-s=0.6``); explicit flags win.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench as benchmod
from .core import GaitMatchError
from .evaluation import score
from .formats import (
    ensure_parent,
    read_kernel_dir,
    read_predictions,
    read_stream,
    write_kernel,
    write_predictions,
    write_stream,
)
from .matcher import EfficientMatcher, NaiveMatcher
from .synthgait import GenConfig, generate_session, parse_schedule, profiles_by_id
from .training import HS_CHANNELS, PeakConfig, train_kernel

log = logging.getLogger("gaitmatch")

REQUIRED = {
    "train": ("input", "mode", "out"),
    "predict": ("kernels", "input", "out"),
    "eval": ("pred", "truth"),
    "synth": ("profile", "out"),
    "bench": (),
}


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaitmatch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key=value file with flag defaults")
        return p

    p = add("train", "build one mode kernel from a steady-state stream")
    p.add_argument("--input", help="stream CSV")
    p.add_argument("--mode", help="mode id to store in the kernel")
    p.add_argument("--hs-channel", choices=HS_CHANNELS, default="rft",
                   help="signal whose peaks mark heel strikes (rft: right foot, rsh: right shank)")
    p.add_argument("--out", help="kernel CSV to write")
    p.add_argument("--min-sep-s", type=float, default=0.5, help="minimum time between heel strikes")
    p.add_argument("--min-prom-deg", type=float, default=5.0, help="minimum heel-strike peak prominence")

    p = add("predict", "run the matcher over a stream")
    p.add_argument("--kernels", help="directory of kernel CSVs (loaded in file-name order)")
    p.add_argument("--input", help="stream CSV")
    p.add_argument("--algo", choices=("efficient", "naive"), default="efficient")
    p.add_argument("--out", help="prediction CSV to write")

    p = add("eval", "score predictions against a labelled stream")
    p.add_argument("--pred", help="prediction CSV")
    p.add_argument("--truth", help="labelled stream CSV")

    p = add("synth", "generate a synthetic labelled stream")
    p.add_argument("--profile", help="mode id, or a session like Slow:10,Med:10,Fast:10")
    p.add_argument("--duration", type=float, help="seconds (for a bare mode id)")
    p.add_argument("--noise", type=float, default=0.0, help="Gaussian noise sigma, degrees")
    p.add_argument("--jitter", type=float, default=0.0, help="per-stride cadence jitter fraction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="stream CSV to write")

    p = add("bench", "time naive vs efficient matching")
    p.add_argument("--steps", type=int, default=10000)
    p.add_argument("--modes", type=int, default=7)
    p.add_argument("--n", type=int, default=400, help="kernel length")
    p.add_argument("--algo", choices=("both", "efficient", "naive"), default="both")
    p.add_argument("--repeat", type=int, default=1, help="timing rounds; the fastest round is reported")
    return parser


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, argv) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    given = {a.dest for a in sub._actions
             if any(tok == opt or tok.startswith(opt + "=") for opt in a.option_strings for tok in argv)}
    path = Path(args.config)
    if not path.is_file():
        raise GaitMatchError(f"config file not found: {path}")
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        dest = key.lstrip("-").replace("-", "_")
        if dest not in known:
            raise UsageError(f"{path}:{line_no}: unknown option {key!r} for {args.command}")
        if dest in given:
            continue
        action = known[dest]
        try:
            converted = action.type(value) if action.type else value
        except ValueError:
            raise UsageError(f"{path}:{line_no}: bad value {value!r} for {key}") from None
        if action.choices and converted not in action.choices:
            raise UsageError(f"{path}:{line_no}: {key} must be one of {list(action.choices)}")
        setattr(args, dest, converted)
    return args


def cmd_train(args) -> int:
    if not args.mode or not args.mode.strip():
        raise UsageError("--mode must be a non-empty id")
    stream = read_stream(args.input)
    cfg = PeakConfig(min_separation_s=args.min_sep_s, min_prominence_deg=args.min_prom_deg)
    result = train_kernel(stream, args.mode, hs_channel=args.hs_channel, cfg=cfg)
    ensure_parent(args.out)
    write_kernel(result.kernel, args.out)
    k = result.kernel
    print(f"mode={k.mode_id} strides={len(result.strides)} n={k.n} "
          f"resolution={k.resolution:.6f} ({100 * k.resolution:.2f}% of gait)")
    return 0


def cmd_predict(args) -> int:
    kernels = read_kernel_dir(args.kernels)
    stream = read_stream(args.input)
    if args.algo == "efficient":
        # zero-history start and cache-summed errors make the file identical to --algo naive
        matcher = EfficientMatcher(kernels, init="history", exact_report=True)
    else:
        matcher = NaiveMatcher(kernels)
    preds = matcher.run(stream)
    ensure_parent(args.out)
    write_predictions(preds, args.out)
    used = sorted(set(preds.predicted_modes))
    print(f"frames={len(preds)} modes={len(kernels)} warm_from={kernels.max_n} predicted={','.join(used)}")
    return 0


def cmd_eval(args) -> int:
    preds = read_predictions(args.pred)
    truth = read_stream(args.truth)
    result = score(preds, truth)
    print(result.confusion.format())
    print(f"accuracy={result.accuracy:.6f} ({result.confusion.correct}/{result.confusion.total} warm samples)")
    print(result.phase.format())
    print(f"mean_phase_error={result.phase.overall_mean:.6f} "
          f"misclassified_max_phase_error={result.phase.misclassified_max:.6f}")
    return 0


def cmd_synth(args) -> int:
    profiles = profiles_by_id()
    if ":" in args.profile or "," in args.profile:
        schedule = parse_schedule(args.profile, args.duration)
    else:
        if args.duration is None:
            raise UsageError("--duration is required with a single --profile")
        schedule = [(args.profile, args.duration)]
    cfg = GenConfig(noise_sigma_deg=args.noise, cadence_jitter_frac=args.jitter, seed=args.seed)
    stream = generate_session(profiles, schedule, cfg)
    ensure_parent(args.out)
    write_stream(stream, args.out)
    print(f"frames={len(stream)} strides={len(stream.hs_indices)} "
          f"segments={','.join(f'{m}:{d:g}' for m, d in schedule)}")
    return 0


def cmd_bench(args) -> int:
    algos = benchmod.ALGOS if args.algo == "both" else (args.algo,)
    if args.repeat < 1:
        raise UsageError("--repeat must be >= 1")
    reports = benchmod.run_sweep([args.n], [args.modes], args.steps, algos=algos, repeat=args.repeat)
    for r in reports:
        print(f"{r.algo:<10} n={r.n} M={r.m} steps={r.steps} mean={r.mean_us:.3f}us "
              f"median={r.median_us:.3f}us p99={r.p99_us:.3f}us cache_bytes={r.cache_bytes}")
    ratio = benchmod.speedups(reports)
    for (n, m), s in ratio.items():
        print(f"speedup naive/efficient = {s:.1f}x")
    return 0


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "synth": cmd_synth,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _apply_config(parser, args, argv)
        missing = [f"--{k.replace('_', '-')}" for k in REQUIRED[args.command] if getattr(args, k) is None]
        if missing:
            raise UsageError(f"missing required option(s): {' '.join(missing)}")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"gaitmatch {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (GaitMatchError, ValueError, KeyError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"gaitmatch {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
