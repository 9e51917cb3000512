"""Command-line interface mirroring the extraction operations."""

import argparse
import sys
from pathlib import Path

from . import acceptability, formats
from .activations import dump_activations
from .checkpoint import CheckpointRef
from .generate import DEFAULT_SEEDS, generate_sweep
from .logprobs import dump_logprobs


def _ref_from_args(args) -> CheckpointRef:
    return CheckpointRef(
        model_id=args.model, tokens_seen=args.tokens_seen, revision=args.revision
    )


def cmd_logprobs(args) -> int:
    out = dump_logprobs(_ref_from_args(args), args.suite, args.out, device=args.device)
    print(f"wrote log-prob dump to {out}")
    return 0


def cmd_activations(args) -> int:
    written = dump_activations(
        _ref_from_args(args),
        args.words,
        args.onsets,
        layers=args.layers,
        out_dir=args.out_dir,
        run_index=args.run_index,
        pool=args.pool,
        device=args.device,
    )
    print(f"wrote {len(written)} layer matrices to {args.out_dir}")
    return 0


def cmd_generate(args) -> int:
    prompts = None
    if args.prompts_file is not None:
        lines = Path(args.prompts_file).read_text(encoding="utf-8").splitlines()
        prompts = tuple(line.strip() for line in lines if line.strip())
    entries = generate_sweep(
        _ref_from_args(args),
        args.out_dir,
        **({} if prompts is None else {"prompts": prompts}),
        seeds=tuple(args.seeds),
        min_new_tokens=args.min_new_tokens,
        max_new_tokens=args.max_new_tokens,
        greedy=args.greedy,
        temperature=args.temperature,
        top_p=args.top_p,
        device=args.device,
    )
    print(f"wrote {len(entries)} texts to {args.out_dir}")
    return 0


def _make_scorer(spec: str, label, device: str):
    kind, _, rest = spec.partition(":")
    if kind == "constant":
        try:
            return acceptability.ConstantScorer(float(rest))
        except ValueError as err:
            raise ValueError(f"bad constant scorer spec {spec!r}: {err}") from err
    if kind == "classifier":
        if not rest:
            raise ValueError("classifier scorer needs a model id: classifier:<model>")
        return acceptability.ClassifierScorer(rest, label=label, device=device)
    raise ValueError(f"unknown scorer {spec!r} (use constant:<v> or classifier:<model>)")


def cmd_acceptability(args) -> int:
    per_checkpoint = {}
    for spec in args.sweep:
        tokens_text, _, directory = spec.partition("=")
        try:
            tokens = int(tokens_text)
        except ValueError as err:
            raise ValueError(f"bad sweep spec {spec!r} (want TOKENS=DIR)") from err
        if tokens in per_checkpoint:
            raise ValueError(f"duplicate sweep checkpoint {tokens}")
        texts = sorted(Path(directory).glob("*.txt"))
        if not texts:
            raise ValueError(f"no .txt files under {directory!r}")
        per_checkpoint[tokens] = texts
    scorer = _make_scorer(args.scorer, args.label, args.device)
    csv_text = acceptability.sweep_trajectory(per_checkpoint, scorer, label=args.label_name)
    formats.atomic_write_text(args.out, csv_text)
    print(f"wrote trajectory for {len(per_checkpoint)} checkpoints to {args.out}")
    return 0


def _add_checkpoint_args(parser):
    parser.add_argument("--model", required=True, help="model id or local path")
    parser.add_argument("--tokens-seen", type=int, required=True,
                        help="training tokens for this checkpoint (from its metadata)")
    parser.add_argument("--revision", default=None, help="checkpoint revision/branch")
    parser.add_argument("--device", default="cpu")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hemitrace-extract",
        description="Dump model-side inputs for the analysis toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    lp = sub.add_parser("logprobs", help="dump per-token log-probs for a suite")
    _add_checkpoint_args(lp)
    lp.add_argument("--suite", required=True, help="suite JSONL path")
    lp.add_argument("--out", required=True, help="dump JSONL path")
    lp.set_defaults(fn=cmd_logprobs)

    act = sub.add_parser("activations", help="dump per-layer word features")
    _add_checkpoint_args(act)
    act.add_argument("--words", required=True, help="one word per line")
    act.add_argument("--onsets", required=True, help="one onset seconds value per line")
    act.add_argument("--layers", type=int, nargs="+", required=True)
    act.add_argument("--out-dir", required=True)
    act.add_argument("--run-index", type=int, default=0)
    act.add_argument("--pool", choices=("last", "mean"), default="last")
    act.set_defaults(fn=cmd_activations)

    gen = sub.add_parser("generate", help="run the prompts x seeds sweep")
    _add_checkpoint_args(gen)
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--prompts-file", default=None,
                     help="one prompt per line (default: built-in ten)")
    gen.add_argument("--seeds", type=int, nargs="+", default=list(DEFAULT_SEEDS))
    gen.add_argument("--min-new-tokens", type=int, default=192)
    gen.add_argument("--max-new-tokens", type=int, default=256)
    gen.add_argument("--greedy", action="store_true")
    gen.add_argument("--temperature", type=float, default=1.0)
    gen.add_argument("--top-p", type=float, default=1.0)
    gen.set_defaults(fn=cmd_generate)

    acc = sub.add_parser("acceptability", help="score texts into a trajectory CSV")
    acc.add_argument("--sweep", nargs="+", required=True,
                     help="TOKENS=DIR per checkpoint (scores all .txt in DIR)")
    acc.add_argument("--scorer", required=True,
                     help="constant:<value> or classifier:<model id>")
    acc.add_argument("--label", default=1,
                     help="classifier class treated as acceptable (index or name)")
    acc.add_argument("--label-name", default="acceptability",
                     help="trajectory label in the output CSV")
    acc.add_argument("--out", required=True, help="trajectory CSV path")
    acc.add_argument("--device", default="cpu")
    acc.set_defaults(fn=cmd_acceptability)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
