"""``streamwaic`` command line.

Exit codes: 0 success, 1 usage, 2 data or format error, 3 numerical failure.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .datasets import load_dataset
from .engine import checkpoint_load, checkpoint_save, waic_finalize
from .exceptions import InsufficientSamplesError, NumericalError, WaicError
from .harness import emit_report, format_pretty, load_study_config, preset, run_study
from .models import DESCRIPTIONS, HIER_MODELS, SV_MODELS, build_model
from .partition import build_partition, load_partition
from .predictive import CONDITIONAL, MARGINAL, PredictiveConfig
from .samplers import McmcConfig, run_mcmc_waic
from .stream import StreamWriter, ingest_stream_state, resume_stream

OUTPUT_ENV = "STREAMWAIC_OUTPUT_DIR"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("streamwaic")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _result_lines(result):
    lines = [f"mode={result.mode} K={result.K} M={result.M} S={result.S}"]
    for s in result.summaries:
        lines.append(f"fraction={s.fraction:g} waic={s.waic!r} lppd={s.lppd!r} p_waic={s.p_waic!r}")
    return lines


def _print_result(result, as_json):
    if as_json:
        print(json.dumps(result.to_dict(), indent=1))
    else:
        print("\n".join(_result_lines(result)))


def _cmd_study_run(args):
    if bool(args.config) == bool(args.preset):
        raise UsageError("study run: give exactly one of --config or --preset")
    config = load_study_config(args.config) if args.config else preset(args.preset)
    if args.full_scale:
        config = config.full_scale()
    overrides = {k: v for k, v in (("replicates", args.replicates), ("n_jobs", args.jobs)) if v is not None}
    if overrides:
        from dataclasses import replace
        config = replace(config, **overrides)
    out = args.out or os.environ.get(OUTPUT_ENV) or "streamwaic-out"

    def progress(done, total):
        if not args.quiet:
            print(f"replicate {done}/{total}", file=sys.stderr, flush=True)

    report = run_study(config, progress=progress)
    written = emit_report(report, out, formats=tuple(args.format.split(",")))
    print(format_pretty(report), end="")
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def _cmd_waic_ingest(args):
    state = ingest_stream_state(args.stream, args.meta)
    if args.save:
        Path(args.save).write_bytes(checkpoint_save(state))
    _print_result(waic_finalize(state), args.json)
    return EXIT_OK


def _cmd_waic_resume(args):
    state = checkpoint_load(Path(args.checkpoint).read_bytes())
    state = resume_stream(state, args.stream)
    if args.save:
        Path(args.save).write_bytes(checkpoint_save(state))
    _print_result(waic_finalize(state), args.json)
    return EXIT_OK


def _cmd_waic_run(args):
    dataset = load_dataset(args.data)
    model = build_model(args.model, dataset)
    if args.partition:
        partition = load_partition(args.partition, model.data_labels)
    else:
        partition = build_partition(model.data_labels)
    config = PredictiveConfig(args.mode, args.K)
    mcmc = McmcConfig(args.burn_in, args.keep, seed=args.seed)
    handle = open(args.stream_out, "w") if args.stream_out else None
    try:
        sink = StreamWriter(handle, partition.n_elements, config.mode) if handle else None
        result = run_mcmc_waic(args.model, dataset, partition, config, mcmc, h_sink=sink)
    finally:
        if handle:
            handle.close()
    _print_result(result, args.json)
    return EXIT_OK


def _cmd_model_list(args):
    for name in HIER_MODELS + SV_MODELS:
        family = "hier" if name in HIER_MODELS else "sv"
        print(f"{name}  [{family}]  {DESCRIPTIONS[name]}")
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="streamwaic", description="Streaming WAIC for MCMC output.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    study = sub.add_parser("study", help="replicated simulation studies")
    study_sub = study.add_subparsers(dest="action", parser_class=_Parser)
    run = study_sub.add_parser("run", help="run a study and write report tables")
    run.add_argument("--config", help="YAML or JSON study configuration")
    run.add_argument("--preset", choices=("hier1", "hier2", "sv"), help="built-in desk-scale study")
    run.add_argument("--full-scale", action="store_true", help="500/300 replicates, keep 5000, K 1000/3000")
    run.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./streamwaic-out)")
    run.add_argument("--replicates", type=int)
    run.add_argument("--jobs", type=int, help="worker processes for replicates")
    run.add_argument("--format", default="csv,json,pretty", help="comma list of csv, json, pretty")
    run.add_argument("-q", "--quiet", action="store_true")
    run.set_defaults(func=_cmd_study_run)

    waic = sub.add_parser("waic", help="WAIC from h-vector streams and checkpoints")
    waic_sub = waic.add_subparsers(dest="action", parser_class=_Parser)
    ingest = waic_sub.add_parser("ingest", help="compute WAIC from a stream file")
    ingest.add_argument("--stream", required=True)
    ingest.add_argument("--meta", help="JSON with M, mode, K, or a partition file")
    ingest.add_argument("--save", metavar="CHECKPOINT", help="also write the final state as a checkpoint")
    ingest.add_argument("--json", action="store_true")
    ingest.set_defaults(func=_cmd_waic_ingest)

    resume = waic_sub.add_parser("resume", help="continue a checkpoint with more samples")
    resume.add_argument("--checkpoint", required=True)
    resume.add_argument("--stream", required=True)
    resume.add_argument("--save", metavar="CHECKPOINT", help="write the updated state")
    resume.add_argument("--json", action="store_true")
    resume.set_defaults(func=_cmd_waic_resume)

    mc = waic_sub.add_parser("run", help="fit one model to a dataset file and report WAIC")
    mc.add_argument("--model", required=True, choices=HIER_MODELS + SV_MODELS)
    mc.add_argument("--data", required=True, help="dataset file")
    mc.add_argument("--partition", help="partition file (default: one element per data node)")
    mc.add_argument("--mode", choices=(CONDITIONAL, MARGINAL), default=CONDITIONAL)
    mc.add_argument("-K", type=int, default=1000)
    mc.add_argument("--burn-in", type=int, default=500)
    mc.add_argument("--keep", type=int, default=2000)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--stream-out", help="dump h-vectors to this stream file")
    mc.add_argument("--json", action="store_true")
    mc.set_defaults(func=_cmd_waic_run)

    model = sub.add_parser("model", help="model catalogue")
    model_sub = model.add_subparsers(dest="action", parser_class=_Parser)
    model_sub.add_parser("list", help="list available models").set_defaults(func=_cmd_model_list)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            raise UsageError("missing subcommand; try --help")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with np.errstate(all="ignore"):
            return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (WaicError, InsufficientSamplesError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
