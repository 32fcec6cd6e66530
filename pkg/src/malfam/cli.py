"""Command-line surface: one subcommand per pipeline stage.

Stages compose through files (manifest CSV, bags JSONL, matrix + mask JSON,
model JSON, PNG trees), and every run writes its fully resolved
configuration next to its outputs so an experiment can be replayed.  All
randomness flows from --seed; rerunning a stage with identical arguments
reproduces its outputs byte for byte, timing fields aside.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import ablation, imaging, ingest, pipeline, synth, vectorize
from .corpus import (Manifest, SampleRecord, plurality_family, prune_families,
                     split, stratified_sample)
from .errors import InvalidParamsError, MalfamError
from .learn import evaluate, load_model, save_model
from .pipeline import ClassifierConfig

log = logging.getLogger("malfam")


def _parse_channels(args):
    channels = list(ingest.ALL_CHANNELS)
    if getattr(args, "include_udp", False):
        channels += list(ingest.UDP_CHANNELS)
    if getattr(args, "channels", None):
        requested = [c.strip() for c in args.channels.split(",") if c.strip()]
        unknown = set(requested) - set(ingest.ALL_CHANNELS) - set(ingest.UDP_CHANNELS)
        if unknown:
            raise InvalidParamsError(f"unknown channels: {sorted(unknown)}")
        channels = requested
    if getattr(args, "drop", None):
        dropped = {c.strip() for c in args.drop.split(",") if c.strip()}
        unknown = dropped - set(channels)
        if unknown:
            raise InvalidParamsError(f"cannot drop channels not in the set: {sorted(unknown)}")
        channels = [c for c in channels if c not in dropped]
    if not channels:
        raise InvalidParamsError("channel set is empty")
    return channels


def _persist_run_config(args, anchor):
    """Write the resolved configuration next to the stage's outputs."""
    anchor = Path(anchor)
    out_dir = anchor if anchor.is_dir() else anchor.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = {k: v for k, v in vars(args).items() if k != "func"}
    resolved["subcommand"] = args.subcommand
    path = out_dir / f"run_{args.subcommand}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)


def _print_metrics(metrics, title="results"):
    print(f"{title}: "
          f"Accuracy {100 * metrics.accuracy:.2f}  "
          f"Precision {100 * metrics.precision:.2f}  "
          f"Recall {100 * metrics.recall:.2f}  "
          f"F-score {100 * metrics.f1:.2f}  "
          f"Time (s) {metrics.time_s:.2f}")


def _split_rows(manifest, matrix, which):
    """Row indices of the matrix whose manifest split matches; all when unsplit."""
    by_id = {r.sample_id: r.split for r in manifest}
    assigned = any(s in ("train", "test") for s in by_id.values())
    if not assigned:
        return list(range(len(matrix.row_ids)))
    return [i for i, rid in enumerate(matrix.row_ids) if by_id.get(rid) == which]


def _classifier_config(args):
    params = json.loads(args.params) if getattr(args, "params", None) else {}
    grid = None
    if getattr(args, "grid_search", False):
        grid = pipeline.DEFAULT_GRIDS.get(args.clf)
        if grid is None:
            raise InvalidParamsError(f"no default grid for classifier {args.clf!r}")
    return ClassifierConfig(kind=args.clf, params=params, grid=grid,
                            cv_folds=getattr(args, "cv_folds", 3))


# --- subcommand implementations -------------------------------------------

def cmd_synth(args):
    channels = tuple(args.signal_channels.split(",")) if args.signal_channels \
        else synth.DEFAULT_SIGNAL_CHANNELS
    manifest = synth.synth_corpus(args.out, n_families=args.families,
                                  per_family=args.per_family, signal=args.signal,
                                  seed=args.seed, signal_channels=channels)
    _persist_run_config(args, args.out)
    print(f"wrote {len(manifest)} samples across {args.families} families to {args.out}")


def cmd_label(args):
    root = Path(args.reports)
    static_dir = next((d for d in (root / "reports" / "static", root / "static", root)
                       if d.is_dir() and any(d.glob("*.json"))), root)
    out_dir = Path(args.out).resolve().parent
    records = []
    skipped = 0
    for report_path in sorted(static_dir.glob("*.json")):
        sample_id = report_path.stem
        try:
            report = ingest.load_static_report(report_path.read_bytes())
            family = plurality_family(report.scans.labels)
        except MalfamError as exc:
            log.warning("skipping %s: %s", sample_id, exc)
            skipped += 1
            continue
        dynamic = report_path.parent.parent / "dynamic" / report_path.name
        binary = root / "binaries" / f"{sample_id}.bin"
        records.append(SampleRecord(
            sample_id=sample_id,
            family=family,
            static_report=_rel(report_path, out_dir),
            dynamic_report=_rel(dynamic, out_dir) if dynamic.is_file() else "",
            binary=_rel(binary, out_dir) if binary.is_file() else "",
        ))
    manifest = Manifest(records)
    manifest.save(args.out)
    _persist_run_config(args, args.out)
    print(f"labeled {len(manifest)} samples ({skipped} skipped) -> {args.out}")


def _rel(path, base):
    try:
        return str(Path(path).resolve().relative_to(base))
    except ValueError:
        return str(Path(path).resolve())


def cmd_prune(args):
    manifest = prune_families(Manifest.load(args.manifest), args.min_count)
    manifest.save(args.out)
    _persist_run_config(args, args.out)
    print(f"kept {len(manifest)} records in {len(manifest.family_counts)} families")


def cmd_sample(args):
    manifest = stratified_sample(Manifest.load(args.manifest), args.per_family,
                                 args.min_family_size, args.seed)
    manifest.save(args.out)
    _persist_run_config(args, args.out)
    print(f"sampled {len(manifest)} records "
          f"({args.per_family} per family, families >= {args.min_family_size})")


def cmd_split(args):
    manifest = split(Manifest.load(args.manifest), args.test_fraction, args.seed)
    manifest.save(args.out)
    _persist_run_config(args, args.out)
    n_test = sum(1 for r in manifest if r.split == "test")
    print(f"split {len(manifest)} records: {len(manifest) - n_test} train, {n_test} test")


def cmd_extract(args):
    manifest = Manifest.load(args.manifest)
    bags = pipeline.extract_bags(manifest, args.manifest,
                                 include_udp=args.include_udp, jobs=args.jobs)
    pipeline.save_bags(bags, args.out)
    _persist_run_config(args, args.out)
    print(f"extracted {len(bags)} of {len(manifest)} samples -> {args.out}")


def cmd_vectorize(args):
    manifest = Manifest.load(args.manifest)
    bags = pipeline.load_bags(args.bags)
    channels = _parse_channels(args)
    orders = {c: vectorize.DEFAULT_CHANNEL_ORDERS[c] for c in channels}
    records = [r for r in manifest if r.sample_id in bags]
    fit_records = [r for r in records if r.split == "train"] or records
    vocab = vectorize.build_vocabulary(
        (bags[r.sample_id].restricted(channels) for r in fit_records), orders)
    matrix = vectorize.build_matrix(
        [bags[r.sample_id].restricted(channels) for r in records],
        [r.sample_id for r in records], [r.family for r in records], vocab, orders)
    matrix.save(args.out)
    _persist_run_config(args, args.out)
    print(f"matrix {matrix.shape[0]} x {matrix.shape[1]} -> {args.out}")


def cmd_select(args):
    matrix = vectorize.TermMatrix.load(args.matrix)
    manifest = Manifest.load(args.manifest)
    fit = matrix.rows(_split_rows(manifest, matrix, "train"))
    scores = vectorize.chi2_rank(fit)
    mask = vectorize.select_top_fraction(scores, args.fraction)
    mask.save(args.out)
    _persist_run_config(args, args.out)
    print(f"kept {len(mask.kept)} of {matrix.shape[1]} terms -> {args.out}")


def cmd_train(args):
    matrix = vectorize.TermMatrix.load(args.matrix)
    manifest = Manifest.load(args.manifest)
    fit = matrix.rows(_split_rows(manifest, matrix, "train"))
    X = fit.X
    mask = None
    if args.mask:
        mask = vectorize.SelectionMask.load(args.mask)
        X = X[:, mask.kept]
    config = _classifier_config(args)
    model, best = pipeline.train_classifier(config, X, fit.labels, args.seed)
    model.selection_mask = mask
    save_model(model, args.out)
    _persist_run_config(args, args.out)
    print(f"trained {args.clf} on {X.shape[0]} rows, params {best} -> {args.out}")


def cmd_evaluate(args):
    matrix = vectorize.TermMatrix.load(args.matrix)
    manifest = Manifest.load(args.manifest)
    model = load_model(args.model)
    test = matrix.rows(_split_rows(manifest, matrix, "test"))
    X = test.X
    if model.selection_mask is not None:
        X = X[:, model.selection_mask.kept]
    metrics = evaluate(model, X, test.labels)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(metrics.to_json(), fh, indent=2, sort_keys=True)
    _persist_run_config(args, args.out)
    _print_metrics(metrics, title=f"{model.kind} on {X.shape[0]} test rows")


def cmd_ablate(args):
    manifest = Manifest.load(args.manifest)
    bags = pipeline.load_bags(args.bags)
    channels = _parse_channels_no_drop(args)
    config = _classifier_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.drop:
        dropped = {c.strip() for c in args.drop.split(",") if c.strip()}
        metrics = ablation.drop_channels(bags, manifest, dropped, channels,
                                         config, args.seed,
                                         select_fraction=args.fraction)
        with open(out_dir / "final_metrics.json", "w", encoding="utf-8") as fh:
            json.dump(metrics.to_json(), fh, indent=2, sort_keys=True)
        _print_metrics(metrics, title=f"retrained without {sorted(dropped)}")
    else:
        report = ablation.leave_one_out(bags, manifest, channels, config,
                                        args.seed, select_fraction=args.fraction)
        ablation.write_report_csv(report, out_dir / "ablation.csv")
        table = ablation.format_report_table(report)
        (out_dir / "ablation.txt").write_text(table + "\n", encoding="utf-8")
        print(table)
    _persist_run_config(args, args.out)


def _parse_channels_no_drop(args):
    """Channel universe for ablate; --drop is handled by the stage itself."""
    saved = args.drop
    args.drop = None
    try:
        return _parse_channels(args)
    finally:
        args.drop = saved


def _manifest_binaries(manifest, manifest_path):
    out = []
    for record in manifest:
        if not record.binary:
            continue
        path = pipeline.resolve_path(manifest_path, record.binary)
        out.append((record.sample_id, path.read_bytes()))
    return out


def cmd_visualize(args):
    manifest = Manifest.load(args.manifest)
    modes = args.modes.split(",") if args.modes else list(imaging.MODES)
    out_dir = Path(args.out)
    binaries = _manifest_binaries(manifest, args.manifest)
    count = 0
    for mode in modes:
        target = out_dir / mode / "original"
        target.mkdir(parents=True, exist_ok=True)

        def emit(item, mode=mode, target=target):
            sample_id, blob = item
            imaging.emit_image(imaging.image_for_mode(blob, mode),
                               target / f"{sample_id}.png")

        pipeline.parallel_map(emit, binaries, args.jobs)
        count += len(binaries)
    _persist_run_config(args, args.out)
    print(f"wrote {count} images under {out_dir}")


def cmd_dims(args):
    manifest = Manifest.load(args.manifest)
    binaries = _manifest_binaries(manifest, args.manifest)
    counts = {mode: [imaging.pixel_count(imaging.image_for_mode(blob, mode))
                     for _, blob in binaries]
              for mode in imaging.MODES}
    dims = imaging.normalized_dims(counts)
    imaging.save_dims(dims, args.out)
    _persist_run_config(args, args.out)
    for mode in imaging.MODES:
        sides = dims[mode]
        print(f"{mode}: compressed {sides['compressed']}, "
              f"median {sides['median']}, expanded {sides['expanded']}")


def cmd_resize(args):
    manifest = Manifest.load(args.manifest)
    dims = imaging.load_dims(args.dims)
    modes = args.modes.split(",") if args.modes else list(imaging.MODES)
    norms = args.norms.split(",") if args.norms else list(imaging.NORMALIZATIONS)
    out_dir = Path(args.out)
    binaries = _manifest_binaries(manifest, args.manifest)
    count = 0
    for mode in modes:
        for norm in norms:
            side = dims[mode][norm]
            target = out_dir / mode / norm
            target.mkdir(parents=True, exist_ok=True)

            def emit(item, mode=mode, side=side, target=target):
                sample_id, blob = item
                img = imaging.resize_nearest(imaging.image_for_mode(blob, mode), side)
                imaging.emit_image(img, target / f"{sample_id}.png")

            pipeline.parallel_map(emit, binaries, args.jobs)
            count += len(binaries)
    _persist_run_config(args, args.out)
    print(f"wrote {count} normalized images under {out_dir}")


# --- parser ----------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="malfam",
        description="Malware family attribution pipeline over hybrid analysis reports.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func, subcommand=name)
        p.add_argument("--seed", type=int, default=0, help="root random seed")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="worker parallelism for per-sample stages (default: all cores)")
        return p

    p = add("synth", cmd_synth, "generate a synthetic labeled corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--families", type=int, default=10)
    p.add_argument("--per-family", type=int, default=100)
    p.add_argument("--signal", type=float, default=0.5)
    p.add_argument("--signal-channels", default="")

    p = add("label", cmd_label, "assign families by scanner-label plurality vote")
    p.add_argument("--reports", required=True, help="corpus root or static report dir")
    p.add_argument("--out", required=True)

    p = add("prune", cmd_prune, "drop families below a size threshold")
    p.add_argument("--manifest", required=True)
    p.add_argument("--min-count", type=int, default=20)
    p.add_argument("--out", required=True)

    p = add("sample", cmd_sample, "stratified per-family sampling")
    p.add_argument("--manifest", required=True)
    p.add_argument("--per-family", type=int, required=True)
    p.add_argument("--min-family-size", type=int, required=True)
    p.add_argument("--out", required=True)

    p = add("split", cmd_split, "stratified train/test assignment")
    p.add_argument("--manifest", required=True)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--out", required=True)

    p = add("extract", cmd_extract, "parse reports into feature bags")
    p.add_argument("--manifest", required=True)
    p.add_argument("--include-udp", action="store_true")
    p.add_argument("--out", required=True)

    p = add("vectorize", cmd_vectorize, "bags to sparse n-gram count matrix")
    p.add_argument("--manifest", required=True)
    p.add_argument("--bags", required=True)
    p.add_argument("--channels", default="")
    p.add_argument("--drop", default="")
    p.add_argument("--include-udp", action="store_true")
    p.add_argument("--out", required=True)

    p = add("select", cmd_select, "chi-squared ranking and top-fraction mask")
    p.add_argument("--matrix", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, "fit a classifier on the train split")
    p.add_argument("--matrix", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--mask", default="")
    p.add_argument("--clf", choices=["mnb", "svm", "bagging"], default="svm")
    p.add_argument("--params", default="", help="JSON object of fixed hyper-parameters")
    p.add_argument("--grid-search", action="store_true")
    p.add_argument("--cv-folds", type=int, default=3)
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "metrics of a model on the test split")
    p.add_argument("--matrix", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)

    p = add("ablate", cmd_ablate, "leave-one-out channel contribution study")
    p.add_argument("--manifest", required=True)
    p.add_argument("--bags", required=True)
    p.add_argument("--channels", default="")
    p.add_argument("--drop", default="", help="retrain once without these channels")
    p.add_argument("--include-udp", action="store_true")
    p.add_argument("--clf", choices=["mnb", "svm", "bagging"], default="mnb")
    p.add_argument("--params", default="")
    p.add_argument("--grid-search", action="store_true")
    p.add_argument("--cv-folds", type=int, default=3)
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--out", required=True)

    p = add("visualize", cmd_visualize, "binaries to original-size images")
    p.add_argument("--manifest", required=True)
    p.add_argument("--modes", default="")
    p.add_argument("--out", required=True)

    p = add("dims", cmd_dims, "corpus-normalized square sides per image mode")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)

    p = add("resize", cmd_resize, "emit normalized images at corpus sides")
    p.add_argument("--manifest", required=True)
    p.add_argument("--dims", required=True)
    p.add_argument("--modes", default="")
    p.add_argument("--norms", default="")
    p.add_argument("--out", required=True)

    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except MalfamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
