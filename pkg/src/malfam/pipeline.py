"""End-to-end attribution runs: bags -> matrix -> selection -> model -> metrics.

The same runner backs the CLI stages, the ablation experiments, and the
test suite, so a "pipeline run" always means the same thing: vocabulary and
chi-squared ranking are fitted on the train split only, the model is trained
on the selected columns, and metrics come from the held-out test split.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

from . import ingest, vectorize
from .errors import InvalidParamsError, MalfamError
from .learn import (evaluate, grid_search, train_bagging, train_linear_svm,
                    train_mnb)

log = logging.getLogger(__name__)

DEFAULT_GRIDS = {
    "mnb": {"alpha": [0.1, 0.5, 1.0]},
    "svm": {"C": [0.01, 0.1, 1.0, 10.0, 100.0]},
}

_TRAINERS = {
    "mnb": train_mnb,
    "svm": train_linear_svm,
    "bagging": train_bagging,
}


@dataclass
class ClassifierConfig:
    """Which learner to run and how to parameterize it."""

    kind: str = "svm"
    params: dict = field(default_factory=dict)
    grid: dict = None            # when set, grid-search before the final fit
    cv_folds: int = 3

    def to_json(self):
        return {"kind": self.kind, "params": self.params,
                "grid": self.grid, "cv_folds": self.cv_folds}

    @classmethod
    def from_json(cls, doc):
        return cls(doc["kind"], dict(doc.get("params") or {}),
                   doc.get("grid"), doc.get("cv_folds", 3))


def make_trainer(kind, seed, fixed_params=None):
    if kind not in _TRAINERS:
        raise InvalidParamsError(f"unknown classifier kind {kind!r}")
    fixed = dict(fixed_params or {})
    if kind != "mnb":
        fixed.setdefault("seed", seed)
    return partial(_TRAINERS[kind], **fixed)


def train_classifier(config, X, y, seed):
    """Fit per the config, grid-searching first when a grid is present."""
    best_params = dict(config.params)
    if config.grid:
        search_fixed = {k: v for k, v in config.params.items() if k not in config.grid}
        trainer = make_trainer(config.kind, seed, search_fixed)
        found, _ = grid_search(trainer, X, y, config.grid,
                               folds=config.cv_folds, seed=seed)
        best_params.update(found)
    model = make_trainer(config.kind, seed, best_params)(X, y)
    return model, best_params


@dataclass
class PipelineResult:
    metrics: object
    model: object
    mask: object
    vocab: object
    best_params: dict


def run_attribution(bags_by_id, manifest, channels, config, seed,
                    select_fraction=0.5, channel_orders=None):
    """One full attribution run over an already-split manifest."""
    channels = list(channels)
    if channel_orders is None:
        channel_orders = {c: vectorize.DEFAULT_CHANNEL_ORDERS[c] for c in channels}
    train_recs = [r for r in manifest if r.split == "train"]
    test_recs = [r for r in manifest if r.split == "test"]
    if not train_recs or not test_recs:
        raise InvalidParamsError("manifest must carry both train and test rows")

    def bags_for(records):
        return [bags_by_id[r.sample_id].restricted(channels) for r in records]

    train_bags = bags_for(train_recs)
    test_bags = bags_for(test_recs)
    vocab = vectorize.build_vocabulary(train_bags, channel_orders)
    train_m = vectorize.build_matrix(train_bags, [r.sample_id for r in train_recs],
                                     [r.family for r in train_recs], vocab, channel_orders)
    test_m = vectorize.build_matrix(test_bags, [r.sample_id for r in test_recs],
                                    [r.family for r in test_recs], vocab, channel_orders)

    scores = vectorize.chi2_rank(train_m)
    mask = vectorize.select_top_fraction(scores, select_fraction)
    X_train = train_m.X[:, mask.kept]
    X_test = test_m.X[:, mask.kept]

    model, best_params = train_classifier(config, X_train, train_m.labels, seed)
    model.selection_mask = mask
    metrics = evaluate(model, X_test, test_m.labels)
    return PipelineResult(metrics, model, mask, vocab, best_params)


def resolve_path(manifest_path, record_path):
    """Manifest paths may be relative to the manifest's own directory."""
    p = Path(record_path)
    return p if p.is_absolute() else Path(manifest_path).parent / p


def extract_sample(record, manifest_path, include_udp=False):
    """FeatureBag for one record, merging its static and dynamic reports.

    A missing or unparseable report on one side just yields that side's
    channels empty; the sample is skipped (returns None) only when neither
    report is usable.
    """
    static_bag = dynamic_bag = None
    if record.static_report:
        path = resolve_path(manifest_path, record.static_report)
        try:
            report = ingest.load_static_report(path.read_bytes())
            static_bag = ingest.extract_static_features(report)
        except (OSError, MalfamError) as exc:
            log.warning("static report for %s unusable: %s", record.sample_id, exc)
    if record.dynamic_report:
        path = resolve_path(manifest_path, record.dynamic_report)
        try:
            report = ingest.load_dynamic_report(path.read_bytes())
            dynamic_bag = ingest.extract_dynamic_features(report, include_udp=include_udp)
        except (OSError, MalfamError) as exc:
            log.warning("dynamic report for %s unusable: %s", record.sample_id, exc)
    if static_bag is None and dynamic_bag is None:
        return None
    bag = static_bag or ingest.FeatureBag()
    if dynamic_bag is not None:
        bag = bag.merged(dynamic_bag)
    return bag


def parallel_map(worker, items, jobs=1):
    """Order-preserving map; results are independent of the worker count."""
    items = list(items)
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(worker, items))
    return [worker(item) for item in items]


def extract_bags(manifest, manifest_path, include_udp=False, jobs=1):
    """FeatureBags for every record; samples with no usable report are skipped."""
    worker = partial(extract_sample, manifest_path=manifest_path, include_udp=include_udp)
    results = parallel_map(worker, manifest.records, jobs)
    bags = {}
    for record, bag in zip(manifest.records, results):
        if bag is None:
            log.warning("skipping %s: no usable report", record.sample_id)
            continue
        bags[record.sample_id] = bag
    return bags


def save_bags(bags_by_id, path):
    """One JSON object per line: {"sample_id": ..., "channels": {...}}."""
    with open(path, "w", encoding="utf-8") as fh:
        for sample_id in sorted(bags_by_id):
            doc = {"sample_id": sample_id, "channels": bags_by_id[sample_id].channels}
            fh.write(json.dumps(doc, sort_keys=True) + "\n")


def load_bags(path):
    bags = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            bags[doc["sample_id"]] = ingest.FeatureBag(doc["channels"])
    return bags
