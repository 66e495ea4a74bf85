"""Command-line entry point.

Every experiment procedure is one subcommand over a shared artifact
directory. Exit codes: 0 success, 2 invalid config or arguments, 3 stage
failure (partial artifacts are kept).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import InvalidArgument, StageFailure
from .pipeline import (DIRECT_SYSTEMS, PipelineConfig, STAGES, Workspace,
                       rescore_external, run_pipeline, stage_adapt,
                       stage_translate)
from .training import StopRule

OUT_ENV_VAR = "DEBIASMT_OUT"

ADAPT_SETS = (
    "adapt_original", "adapt_ftrans_original", "adapt_ftrans_swapped",
    "adapt_balanced", "handcrafted", "handcrafted_no_overlap",
    "handcrafted_converged",
)

_OVERRIDE_FLAGS = {
    "seed": int,
    "train_seed": int,
    "n_professions": int,
    "train_size": int,
    "valid_size": int,
    "test_size": int,
    "bias_ratio": float,
    "challenge_size": int,
    "max_steps": int,
    "beam_width": int,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (defaults apply otherwise)")
    parser.add_argument(
        "--out",
        help=f"artifact directory (or set ${OUT_ENV_VAR}; default ./debiasmt-out)",
    )
    for name, kind in _OVERRIDE_FLAGS.items():
        parser.add_argument(f"--{name.replace('_', '-')}", type=kind, default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="debiasmt",
        description="Synthetic NMT gender-debiasing experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for verb in ("gen-lexicon", "gen-corpus", "gen-challenge", "train",
                 "fisher", "evaluate", "report"):
        _add_common(sub.add_parser(verb))

    p = sub.add_parser("adapt", help="fine-tune the baseline on one set")
    _add_common(p)
    p.add_argument("--set", dest="adapt_set", choices=ADAPT_SETS + ("all",),
                   default="all")
    p.add_argument("--ewc-lambda", type=float, default=None,
                   help="run the penalty grid stage instead (value ignored "
                        "when the configured grid is used)")
    p.add_argument("--stop", default=None,
                   help="override stop rule: epochs:N | bleu:PCT | converged")

    p = sub.add_parser("translate", help="decode challenge + test hypotheses")
    _add_common(p)
    p.add_argument("--beam", type=int, default=None)
    p.add_argument("--system", choices=DIRECT_SYSTEMS, default=None)

    p = sub.add_parser("rescore", help="lattice-rescore hypotheses")
    _add_common(p)
    p.add_argument("--hyps", default=None,
                   help="external challenge hypothesis file (black-box mode)")
    p.add_argument("--name", default="external",
                   help="system name for black-box metrics")
    p.add_argument("--model", default="handcrafted_converged",
                   help="rescoring checkpoint for black-box mode")

    p = sub.add_parser("pipeline", help="run every stage in order")
    _add_common(p)
    p.add_argument("--stage", choices=STAGES, default=None,
                   help="run a single stage against existing artifacts")
    return parser


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    if args.config:
        config = PipelineConfig.from_file(args.config)
    else:
        config = PipelineConfig()
    for name in _OVERRIDE_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    # re-validate after overrides
    return PipelineConfig.from_dict(
        {f: getattr(config, f) for f in PipelineConfig.__dataclass_fields__}
    )


def _out_dir(args: argparse.Namespace) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUT_ENV_VAR)
    return Path(env) if env else Path("debiasmt-out")


_COMMAND_STAGES = {
    "gen-lexicon": ["lexicon"],
    "gen-corpus": ["corpus"],
    "gen-challenge": ["challenge"],
    "train": ["train"],
    "fisher": ["fisher"],
    "evaluate": ["evaluate"],
    "report": ["report"],
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args)
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = _out_dir(args)

    try:
        if args.command in _COMMAND_STAGES:
            run_pipeline(config, out, _COMMAND_STAGES[args.command])
        elif args.command == "adapt":
            ws = Workspace(out, config)
            if args.ewc_lambda is not None:
                run_pipeline(config, out, ["ewc"])
            elif args.adapt_set == "all":
                run_pipeline(config, out, ["adapt"])
            elif args.stop is not None:
                _adapt_with_stop(ws, args.adapt_set, args.stop)
            else:
                stage_adapt(ws, only=args.adapt_set)
        elif args.command == "translate":
            ws = Workspace(out, config)
            stage_translate(ws, beam_width=args.beam, only=args.system)
        elif args.command == "rescore":
            ws = Workspace(out, config)
            if args.hyps:
                rescore_external(ws, args.name, args.hyps, args.model)
            else:
                run_pipeline(config, out, ["rescore"])
        elif args.command == "pipeline":
            stages = [args.stage] if args.stage else None
            run_pipeline(config, out, stages)
        else:  # pragma: no cover - argparse enforces choices
            return 2
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageFailure as exc:
        print(f"error: {exc} (partial artifacts kept in {out})", file=sys.stderr)
        return 3
    except Exception as exc:  # stage-equivalent failures outside run_pipeline
        print(f"error: {args.command} failed: {exc} "
              f"(partial artifacts kept in {out})", file=sys.stderr)
        return 3
    return 0


def _adapt_with_stop(ws: Workspace, name: str, stop_text: str) -> None:
    from .corpus import read_corpus
    from .model import save_adam_state, save_params
    from .training import fine_tune
    from .pipeline import _load_baseline

    stop = StopRule.parse(stop_text)
    if name.startswith("adapt_"):
        base = ws.dir("counterfactual") / f"adapt.{name[len('adapt_'):]}"
    elif name == "handcrafted_converged":
        base = ws.corpus_base("handcrafted")
    else:
        base = ws.corpus_base(name)
    params, state = _load_baseline(ws)
    result = fine_tune(
        params, state, ws.encode_pairs(read_corpus(base)), ws.valid_suite(),
        stop, ws.model_config(), ws.settings(19),
    )
    save_params(ws.checkpoint(name), result.params)
    save_adam_state(ws.opt_state_path(name), result.opt_state)
    result.log.write(ws.log_path(name))
    print(f"[adapt] {name}: stop {stop_text}, valid BLEU {result.valid_bleu:.2f}")


if __name__ == "__main__":
    sys.exit(main())
