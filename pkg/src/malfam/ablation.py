"""Leave-one-channel-out contribution experiments.

Every row retrains the full pipeline (vocabulary, chi-squared selection,
classifier) with one channel excluded, against the same frozen train/test
split and seed as the baseline, so metric deltas are attributable to the
dropped channel alone.  A channel whose removal does not decrease accuracy
gets flagged non-useful; the operator decides whether to drop it for a
final retrained run.
"""

import csv
import hashlib
import logging
from dataclasses import dataclass

from .errors import AllChannelsDroppedError, InvalidParamsError
from .pipeline import run_attribution

log = logging.getLogger(__name__)


@dataclass
class AblationRow:
    channel: str
    metrics: object
    empty_channel: bool = False     # channel contributed zero terms
    non_useful: bool = False        # dropping it did not decrease accuracy


@dataclass
class AblationReport:
    baseline: object                # Metrics with the full channel set
    rows: list                      # one AblationRow per candidate channel
    classifier_config: dict
    fingerprint: str                # hash of manifest rows + baseline vocabulary


def _fingerprint(manifest, vocab):
    digest = hashlib.sha256()
    for r in manifest:
        digest.update(f"{r.sample_id},{r.family},{r.split}\n".encode())
    for term in vocab.terms:
        digest.update(term.encode())
        digest.update(b"\x00")
    return digest.hexdigest()


def _channel_term_count(vocab, channel):
    prefix = channel + "|"
    return sum(1 for t in vocab.terms if t.startswith(prefix))


def leave_one_out(bags_by_id, manifest, channels, config, seed, select_fraction=0.5):
    """Baseline plus one retrained row per left-out channel."""
    channels = list(channels)
    if len(channels) < 2:
        raise InvalidParamsError(f"need >= 2 channels to ablate, got {channels}")
    base = run_attribution(bags_by_id, manifest, channels, config, seed,
                           select_fraction=select_fraction)
    rows = []
    for dropped in channels:
        remaining = [c for c in channels if c != dropped]
        result = run_attribution(bags_by_id, manifest, remaining, config, seed,
                                 select_fraction=select_fraction)
        empty = _channel_term_count(base.vocab, dropped) == 0
        if empty:
            log.warning("channel %s contributed zero terms", dropped)
        rows.append(AblationRow(
            channel=dropped,
            metrics=result.metrics,
            empty_channel=empty,
            non_useful=result.metrics.accuracy >= base.metrics.accuracy,
        ))
    return AblationReport(
        baseline=base.metrics,
        rows=rows,
        classifier_config=config.to_json(),
        fingerprint=_fingerprint(manifest, base.vocab),
    )


def drop_channels(bags_by_id, manifest, drop, channels, config, seed,
                  select_fraction=0.5):
    """Metrics of one retrained run with ``drop`` removed from the channel set."""
    drop = set(drop)
    channels = list(channels)
    unknown = drop - set(channels)
    if unknown:
        raise InvalidParamsError(f"channels not in the run set: {sorted(unknown)}")
    remaining = [c for c in channels if c not in drop]
    if not remaining:
        raise AllChannelsDroppedError("cannot drop every channel")
    result = run_attribution(bags_by_id, manifest, remaining, config, seed,
                             select_fraction=select_fraction)
    return result.metrics


BASELINE_LABEL = "(baseline)"


def write_report_csv(report, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dropped_feature", "accuracy", "precision", "recall",
                         "f1", "time_s"])
        writer.writerow([BASELINE_LABEL] + _metric_cells(report.baseline))
        for row in report.rows:
            writer.writerow([row.channel] + _metric_cells(row.metrics))


def _metric_cells(m):
    return [f"{m.accuracy:.6f}", f"{m.precision:.6f}", f"{m.recall:.6f}",
            f"{m.f1:.6f}", f"{m.time_s:.6f}"]


def format_report_table(report):
    """Text table in the reporting column order: accuracy first, time last."""
    header = ["Dropped Feature", "Accuracy", "Precision", "Recall", "F-score", "Time (s)"]
    body = [[BASELINE_LABEL] + _table_cells(report.baseline)]
    for row in report.rows:
        name = row.channel + (" [empty]" if row.empty_channel else "") \
            + (" [non-useful]" if row.non_useful else "")
        body.append([name] + _table_cells(row.metrics))
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)),
             "  ".join("-" * w for w in widths)]
    lines.extend("  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in body)
    return "\n".join(lines)


def _table_cells(m):
    return [f"{100 * m.accuracy:.2f}", f"{100 * m.precision:.2f}",
            f"{100 * m.recall:.2f}", f"{100 * m.f1:.2f}", f"{m.time_s:.2f}"]
