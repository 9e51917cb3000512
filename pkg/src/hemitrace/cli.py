"""Command-line entry points: generate benchmark suites, score log-prob
dumps, run the encoding pipeline over checkpoints, fit transition sigmoids,
and synthesize ground-truth BOLD datasets.

All artifacts are written atomically, embed the hash of the configuration
that produced them, and are byte-identical across reruns with unchanged
inputs. Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import corpus, encoding, formats, scoring, svgplot, synth, transition

SUITE_MANIFEST_SCHEMA = "hemitrace.suite-manifest.v1"
SCORE_SCHEMA = "hemitrace.score.v1"
EXPERIMENT_SCHEMA = "hemitrace.experiment.v1"
BRAINSCORE_SCHEMA = "hemitrace.brainscore.v1"
ASYMMETRY_SCHEMA = "hemitrace.asymmetry.v1"
FITS_SCHEMA = "hemitrace.fits.v1"
SYNTH_MANIFEST_SCHEMA = "hemitrace.synth-manifest.v1"


@contextmanager
def _stage(name: str, checkpoint: int | None = None):
    """Re-raise stage failures with the stage name and checkpoint attached."""
    where = f"stage {name!r}" if checkpoint is None else f"stage {name!r}, checkpoint {checkpoint}"
    try:
        yield
    except ValueError as err:
        raise ValueError(f"{where}: {err}") from err
    except OSError as err:
        raise OSError(f"{where}: {err}") from err


def _write_json(path: Path, doc) -> None:
    formats.atomic_write_text(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------- gen


def cmd_gen(args) -> int:
    if args.kind == "dyck":
        spec = corpus.DyckSpec(k=args.k, length=args.length, count=args.count or 1024, seed=args.seed)
        pairs = corpus.gen_dyck(spec)
        out = Path(args.out) if args.out else Path(f"dyck{args.k}.jsonl")
        spec_doc = {"k": spec.k, "length": spec.length, "count": spec.count, "seed": spec.seed}
    else:
        spec = corpus.ArithmeticSpec(
            subtask=args.subtask,
            count=args.count or 2048,
            seed=args.seed,
            operand_lo=args.operand_lo,
            operand_hi=args.operand_hi,
        )
        pairs = corpus.gen_arithmetic(spec)
        out = Path(args.out) if args.out else Path(f"{args.subtask}.jsonl")
        lo, hi = spec.bounds()
        spec_doc = {
            "subtask": spec.subtask,
            "count": spec.count,
            "seed": spec.seed,
            "operand_lo": lo,
            "operand_hi": hi,
            "error_set": list(spec.error_set),
        }
    formats.atomic_write_text(out, corpus.suite_to_jsonl(pairs))
    manifest = {
        "schema": SUITE_MANIFEST_SCHEMA,
        "config_hash": formats.config_hash({"command": "gen", "kind": args.kind, **spec_doc}),
        "kind": args.kind,
        "spec": spec_doc,
        "n_pairs": len(pairs),
        "suite_file": out.name,
    }
    _write_json(out.with_name(out.name + ".manifest.json"), manifest)
    print(f"wrote {len(pairs)} pairs to {out}")
    return 0


# ---------------------------------------------------------------- score


def cmd_score(args) -> int:
    pairs = corpus.load_suite(args.suite)
    entries = scoring.read_logprob_dump(args.dump)
    suite_ids = {p.id for p in pairs}
    dump_ids = {e.pair_id for e in entries}
    offenders = sorted(suite_ids.symmetric_difference(dump_ids))
    if offenders:
        shown = ", ".join(offenders[:10])
        raise ValueError(
            f"suite and dump disagree on {len(offenders)} pair ids; first: {shown}"
        )
    by_id = {}
    for good, bad in scoring.collate_sides(entries):
        by_id[good.pair_id] = (good, bad)
    scored = [by_id[p.id] for p in pairs]
    acc = scoring.pair_accuracy(
        scored, paradigms=[p.paradigm for p in pairs], suite=Path(args.suite).stem
    )
    report = {
        "schema": SCORE_SCHEMA,
        "config_hash": formats.config_hash(
            {"command": "score", "suite": str(args.suite), "dump": str(args.dump)}
        ),
        "suite": acc.suite,
        "n_pairs": acc.n_pairs,
        "overall": acc.overall,
        "per_paradigm": dict(acc.per_paradigm),
    }
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if args.out:
        formats.atomic_write_text(Path(args.out), text)
        print(f"overall {acc.overall:.4f} over {acc.n_pairs} pairs -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------- brainscore


def _load_experiment(config_path: Path, args) -> dict:
    with open(config_path, encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValueError(f"{config_path}: malformed JSON ({err.msg})") from err
    base = config_path.parent

    config.setdefault("cutoff_seconds", 128.0)
    config.setdefault("reliability_fraction", 0.25)
    config.setdefault("asymmetry_sign", "left_minus_right")
    config.setdefault("lambda_grid", [float(l) for l in encoding.DEFAULT_LAMBDA_GRID])
    config.setdefault("workers", 1)
    # command-line flags take precedence over the config file
    if args.workers is not None:
        config["workers"] = args.workers
    if args.output_dir is not None:
        config["output_dir"] = args.output_dir

    for key in ("output_dir", "bold", "mask_path", "checkpoints"):
        if key not in config:
            raise ValueError(f"{config_path}: missing key {key!r}")
    if not config["bold"]:
        raise ValueError(f"{config_path}: no subjects listed under 'bold'")
    if not config["checkpoints"]:
        raise ValueError(f"{config_path}: no checkpoints listed")
    tokens = [int(c["tokens_seen"]) for c in config["checkpoints"]]
    if any(b <= a for a, b in zip(tokens, tokens[1:])) or tokens[0] <= 0:
        raise ValueError(f"{config_path}: checkpoint tokens_seen must be strictly increasing and positive")

    referenced = [config["mask_path"]]
    for subject in config["bold"]:
        referenced.extend(subject)
    n_runs = len(config["bold"][0])
    for i, subject in enumerate(config["bold"]):
        if len(subject) != n_runs:
            raise ValueError(f"{config_path}: subject {i} lists {len(subject)} runs, expected {n_runs}")
    for ckpt in config["checkpoints"]:
        if "features" not in ckpt or not ckpt["features"]:
            raise ValueError(f"{config_path}: checkpoint {ckpt.get('tokens_seen')}: no feature layers")
        for layer, paths in ckpt["features"].items():
            if len(paths) != n_runs:
                raise ValueError(
                    f"{config_path}: checkpoint {ckpt['tokens_seen']} layer {layer}: "
                    f"{len(paths)} feature files for {n_runs} runs"
                )
            referenced.extend(paths)
    missing = [p for p in referenced if not (base / p).exists()]
    if missing:
        raise ValueError(f"{config_path}: missing referenced files: {missing[:10]}")

    if len(config["bold"]) == 1 and config["reliability_fraction"] < 1.0:
        raise ValueError(
            f"{config_path}: reliability selection needs >= 2 subjects; "
            "set reliability_fraction to 1.0 for single-subject data"
        )
    config["_base"] = base
    return config


def _score_checkpoint(ckpt, averaged, lambda_grid, base, n_scans_per_run, tr):
    tokens = int(ckpt["tokens_seen"])
    per_layer = {}
    for layer_str in sorted(ckpt["features"], key=int):
        layer = int(layer_str)
        designs = []
        with _stage("build_design", tokens):
            for run_idx, rel_path in enumerate(ckpt["features"][layer_str]):
                fm, sidecar_run = formats.read_feature_matrix(base / rel_path)
                if sidecar_run != run_idx:
                    raise ValueError(
                        f"feature file {rel_path} has run_index {sidecar_run}, expected {run_idx}"
                    )
                designs.append(encoding.build_design(fm, n_scans_per_run[run_idx], tr))
        with _stage("ridge_cv", tokens):
            per_layer[layer] = encoding.ridge_cv_scores(designs, averaged, lambda_grid)
    with _stage("best_layer", tokens):
        return encoding.best_layer_map(per_layer, checkpoint_tokens=tokens)


def cmd_brainscore(args) -> int:
    config_path = Path(args.config)
    config = _load_experiment(config_path, args)
    base = config["_base"]
    out_dir = base / config["output_dir"]
    out_dir.mkdir(parents=True, exist_ok=True)
    hash_doc = {k: v for k, v in config.items() if k != "_base"}
    chash = formats.config_hash(hash_doc)

    with _stage("read_bold"):
        subjects = [
            [formats.read_bold_run(base / p) for p in subject] for subject in config["bold"]
        ]
    with _stage("preprocess"):
        cutoff = float(config["cutoff_seconds"])
        subjects = [
            [encoding.preprocess_run(run, cutoff) for run in runs] for runs in subjects
        ]
    n_voxels = subjects[0][0].n_voxels
    with _stage("reliability"):
        fraction = float(config["reliability_fraction"])
        if len(subjects) >= 2:
            reliability = encoding.isc_reliability(subjects)
            subset = encoding.top_fraction_mask(reliability, fraction)
        else:
            subset = np.arange(n_voxels)
    with _stage("average"):
        n_runs = len(subjects[0])
        averaged = [
            encoding.average_subjects([runs[r] for runs in subjects]) for r in range(n_runs)
        ]
    mask = formats.read_mask(base / config["mask_path"])

    tr = averaged[0].tr_seconds
    n_scans_per_run = [run.n_scans for run in averaged]
    lambda_grid = [float(l) for l in config["lambda_grid"]]
    sign = config["asymmetry_sign"]

    def one(ckpt):
        score_map = _score_checkpoint(ckpt, averaged, lambda_grid, base, n_scans_per_run, tr)
        with _stage("asymmetry", score_map.checkpoint_tokens):
            value = encoding.region_asymmetry(score_map, mask, voxel_subset=subset, sign=sign)
        return score_map, value

    workers = int(config["workers"])
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, config["checkpoints"]))
    else:
        results = [one(ckpt) for ckpt in config["checkpoints"]]

    rows = []
    for score_map, value in results:
        doc = {
            "schema": BRAINSCORE_SCHEMA,
            "config_hash": chash,
            "checkpoint_tokens": score_map.checkpoint_tokens,
            "asymmetry": value,
            "asymmetry_sign": sign,
            "n_selected_voxels": int(len(subset)),
            "scores": [float(v) for v in score_map.scores],
            "layer_of_max": [int(v) for v in score_map.layer_of_max],
        }
        _write_json(out_dir / f"brainscore_{score_map.checkpoint_tokens}.json", doc)
        rows.append((score_map.checkpoint_tokens, value))

    traj = transition.Trajectory(
        points=tuple((tokens, value) for tokens, value in rows), label=sign
    ) if len(rows) >= 4 else None
    comments = [f"schema: {ASYMMETRY_SCHEMA}", f"config_hash: {chash}"]
    if traj is not None:
        text = transition.trajectories_to_csv([traj], comments=comments)
    else:
        buf = io.StringIO()
        for comment in comments:
            buf.write(f"# {comment}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["tokens", "value", "label"])
        for tokens, value in rows:
            writer.writerow([tokens, repr(float(value)), sign])
        text = buf.getvalue()
    formats.atomic_write_text(out_dir / "asymmetry.csv", text)
    print(f"wrote {len(rows)} checkpoint scores to {out_dir}")
    return 0


# ---------------------------------------------------------------- transition


def cmd_transition(args) -> int:
    trajectories = []
    labels_seen = set()
    for path in args.trajectories:
        for traj in transition.load_trajectories(path):
            if traj.label in labels_seen:
                raise ValueError(f"duplicate trajectory label {traj.label!r} in {path}")
            labels_seen.add(traj.label)
            trajectories.append(traj)
    if args.reference not in labels_seen:
        raise ValueError(
            f"reference label {args.reference!r} not among trajectories "
            f"{sorted(labels_seen)}"
        )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chash = formats.config_hash(
        {
            "command": "transition",
            "trajectories": [str(p) for p in args.trajectories],
            "reference": args.reference,
        }
    )

    fits = {traj.label: transition.fit_sigmoid(traj) for traj in trajectories}
    fit_docs = []
    for traj in trajectories:
        fit = fits[traj.label]
        fit_docs.append(
            {
                "label": fit.label,
                "y_min": fit.y_min,
                "y_max": fit.y_max,
                "x0": None if fit.degenerate else fit.x0,
                "beta": None if fit.degenerate else fit.beta,
                "mse": fit.mse,
                "degenerate": fit.degenerate,
            }
        )
    _write_json(out_dir / "fits.json", {"schema": FITS_SCHEMA, "config_hash": chash, "fits": fit_docs})

    reference_fit = fits[args.reference]
    if reference_fit.degenerate:
        raise ValueError(f"reference trajectory {args.reference!r} has no transition (degenerate fit)")
    distances = []
    for traj in trajectories:
        if traj.label == args.reference:
            continue
        fit = fits[traj.label]
        if fit.degenerate:
            print(
                f"warning: trajectory {traj.label!r} has no transition; "
                "excluded from the distance table",
                file=sys.stderr,
            )
            continue
        distances.append((traj.label, transition.transition_distance(fit, reference_fit)))
    distances.sort(key=lambda item: (item[1], item[0]))
    buf = io.StringIO()
    buf.write(f"# config_hash: {chash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "distance"])
    for label, dist in distances:
        writer.writerow([label, repr(float(dist))])
    formats.atomic_write_text(out_dir / "distances.csv", buf.getvalue())

    reference_traj = next(t for t in trajectories if t.label == args.reference)
    series = [(args.reference, list(reference_traj.log_tokens()), list(reference_traj.values()))]
    for traj in trajectories:
        if traj.label == args.reference:
            continue
        aligned = transition.align_curve(traj, reference_traj)
        series.append((traj.label, list(aligned.log_tokens()), list(aligned.values())))
    overlay = svgplot.line_plot(
        series,
        title="Trajectories aligned to " + args.reference,
        x_label="log10 tokens seen",
        y_label=args.reference,
        comment=f"config_hash: {chash}",
    )
    formats.atomic_write_text(out_dir / "overlay.svg", overlay)

    points = [
        (fit.label, fit.x0, fit.beta)
        for traj in trajectories
        if not (fit := fits[traj.label]).degenerate
    ]
    plane = svgplot.scatter_plot(
        points,
        title="Transition plane",
        x_label="x0 (log10 tokens)",
        y_label="beta",
        comment=f"config_hash: {chash}",
    )
    formats.atomic_write_text(out_dir / "plane.svg", plane)
    print(f"fit {len(fit_docs)} trajectories; {len(distances)} distances -> {out_dir}")
    return 0


# ---------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    spec_path = Path(args.spec)
    with open(spec_path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValueError(f"{spec_path}: malformed JSON ({err.msg})") from err
    checkpoint_tokens = int(doc.pop("checkpoint_tokens", 1))
    try:
        spec = synth.SynthSpec(**doc)
    except TypeError as err:
        raise ValueError(f"{spec_path}: {err}") from err
    dataset = synth.make_synthetic(spec, checkpoint_tokens=checkpoint_tokens)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chash = formats.config_hash({"command": "synth", **doc, "checkpoint_tokens": checkpoint_tokens})

    bold_files = []
    for s, runs in enumerate(dataset.bold):
        names = []
        for run in runs:
            name = f"bold_s{s:02d}_r{run.run_index:02d}.f32"
            formats.write_bold_run(out_dir / name, run)
            names.append(name)
        bold_files.append(names)
    feature_files = []
    for r, fm in enumerate(dataset.features):
        name = f"features_r{r:02d}.f32"
        formats.write_feature_matrix(out_dir / name, fm, run_index=r)
        feature_files.append(name)
    signal_files = []
    for r, signal in enumerate(dataset.signal):
        name = f"signal_r{r:02d}.f32"
        formats.write_matrix(
            out_dir / name, signal, kind="bold", tr_seconds=spec.tr_seconds, run_index=r
        )
        signal_files.append(name)
    formats.write_mask(out_dir / "mask.json", dataset.mask)

    manifest = {
        "schema": SYNTH_MANIFEST_SCHEMA,
        "config_hash": chash,
        "spec": {**doc, "checkpoint_tokens": checkpoint_tokens},
        "planted": {
            "snr_left": dataset.planted.snr_left,
            "snr_right": dataset.planted.snr_right,
            "noise_sd": dataset.planted.noise_sd,
            "seed": dataset.planted.seed,
            "sign": dataset.planted.sign,
        },
        "bold": bold_files,
        "features": feature_files,
        "signal": signal_files,
        "mask": "mask.json",
    }
    _write_json(out_dir / "manifest.json", manifest)

    experiment = {
        "schema": EXPERIMENT_SCHEMA,
        "output_dir": "scores",
        "bold": bold_files,
        "mask_path": "mask.json",
        "cutoff_seconds": 128.0,
        # whole-brain selection: a strongly lateralized planted signal can
        # concentrate the entire top reliability quartile on one side, which
        # would leave the other side empty under the usual 0.25 cut
        "reliability_fraction": 1.0,
        "asymmetry_sign": "left_minus_right",
        "workers": 1,
        "checkpoints": [{"tokens_seen": checkpoint_tokens, "features": {"0": feature_files}}],
    }
    _write_json(out_dir / "experiment.json", experiment)
    print(f"wrote synthetic dataset ({spec.n_subjects} subjects, {spec.n_runs} runs) to {out_dir}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hemitrace",
        description="Minimal-pair benchmarks, voxelwise brain scores, and "
        "phase-transition analysis of training trajectories.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a minimal-pair suite")
    gen.add_argument("kind", choices=("dyck", "arith"))
    gen.add_argument("--k", type=int, default=3, help="bracket alphabet size (dyck)")
    gen.add_argument("--length", type=int, default=32, help="symbols per string (dyck)")
    gen.add_argument("--subtask", choices=("addition", "multiplication"), default="addition")
    gen.add_argument("--operand-lo", type=int, default=None)
    gen.add_argument("--operand-hi", type=int, default=None)
    gen.add_argument("--count", type=int, default=None, help="pairs to generate")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", default=None, help="suite JSONL path")
    gen.set_defaults(func=cmd_gen)

    score = sub.add_parser("score", help="score a log-probability dump against a suite")
    score.add_argument("--suite", required=True)
    score.add_argument("--dump", required=True)
    score.add_argument("--out", default=None, help="report path (stdout if omitted)")
    score.set_defaults(func=cmd_score)

    brainscore = sub.add_parser("brainscore", help="run the encoding pipeline per checkpoint")
    brainscore.add_argument("--config", required=True, help="experiment config JSON")
    brainscore.add_argument("--workers", type=int, default=None, help="overrides config workers")
    brainscore.add_argument("--output-dir", default=None, help="overrides config output_dir")
    brainscore.set_defaults(func=cmd_brainscore)

    trans = sub.add_parser("transition", help="fit sigmoids and compare transitions")
    trans.add_argument("--trajectories", nargs="+", required=True, help="trajectory CSV files")
    trans.add_argument("--reference", default="left_minus_right", help="label of the reference curve")
    trans.add_argument("--out-dir", default=".")
    trans.set_defaults(func=cmd_transition)

    syn = sub.add_parser("synth", help="write a synthetic ground-truth dataset")
    syn.add_argument("--spec", required=True, help="synthesis spec JSON")
    syn.add_argument("--out-dir", required=True)
    syn.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
