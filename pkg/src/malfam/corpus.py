"""Corpus manifests: family labeling, pruning, sampling, and splitting.

A manifest is the unit of exchange between pipeline stages.  Each record
names one executable by content hash and carries its family label, the
paths of its analysis artifacts, and a train/test split assignment.
"""

import csv
import logging
import random
import re
from collections import Counter
from dataclasses import dataclass, replace

from .errors import InvalidParamsError, NoCandidateError, NoLabelError

log = logging.getLogger(__name__)

MANIFEST_FIELDS = ("sample_id", "family", "static_report", "dynamic_report", "binary", "split")

# Generic tokens that scanners attach to almost every label.  Votes on these
# would swamp the actual family name, so they never count.  Tokens of length
# <= 2 are filtered by the same rule.
GENERIC_TOKENS = frozenset({
    "trojan", "virus", "worm", "malware", "generic", "agent", "win32", "win64",
    "heur", "variant", "gen", "behaveslike", "application", "riskware", "unwanted",
})

_TOKEN_SPLIT = re.compile(r"[^0-9a-zA-Z]+")


@dataclass
class SampleRecord:
    """One executable: identity, family label, artifact paths, split."""

    sample_id: str
    family: str = ""
    static_report: str = ""
    dynamic_report: str = ""
    binary: str = ""
    split: str = "unassigned"


class Manifest:
    """Ordered collection of sample records, keyed and sorted by sample_id."""

    def __init__(self, records=()):
        records = sorted(records, key=lambda r: r.sample_id)
        seen = set()
        for r in records:
            if r.sample_id in seen:
                raise InvalidParamsError(f"duplicate sample_id {r.sample_id!r}")
            seen.add(r.sample_id)
        self.records = records

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __eq__(self, other):
        return isinstance(other, Manifest) and self.records == other.records

    @property
    def family_counts(self):
        """Map family -> number of records carrying that label."""
        return Counter(r.family for r in self.records if r.family)

    def by_family(self):
        """Map family -> records, preserving manifest order."""
        groups = {}
        for r in self.records:
            groups.setdefault(r.family, []).append(r)
        return groups

    def save(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(MANIFEST_FIELDS)
            for r in self.records:
                writer.writerow([r.sample_id, r.family, r.static_report,
                                 r.dynamic_report, r.binary, r.split])

    @classmethod
    def load(cls, path):
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            records = [SampleRecord(
                sample_id=row["sample_id"],
                family=row.get("family", ""),
                static_report=row.get("static_report", ""),
                dynamic_report=row.get("dynamic_report", ""),
                binary=row.get("binary", ""),
                split=row.get("split", "unassigned") or "unassigned",
            ) for row in reader]
        return cls(records)


def label_tokens(label):
    """Split a scanner label into candidate family tokens.

    Splits on every non-alphanumeric character, lowercases, and discards
    generic tokens and tokens of length <= 2.
    """
    out = []
    for tok in _TOKEN_SPLIT.split(label.lower()):
        if len(tok) <= 2 or tok in GENERIC_TOKENS:
            continue
        out.append(tok)
    return out


def plurality_family(labels):
    """Pick the family name asserted by the most scanners.

    ``labels`` maps scanner name -> raw label string.  Each scanner votes at
    most once per distinct token regardless of how often the token repeats
    inside its label.  Ties break to the lexicographically smallest token.

    Raises NoLabelError when no scanner reported anything, NoCandidateError
    when every token was filtered out.
    """
    present = {s: l for s, l in labels.items() if l}
    if not present:
        raise NoLabelError("no scanner labels present")
    votes = Counter()
    for label in present.values():
        for tok in set(label_tokens(label)):
            votes[tok] += 1
    if not votes:
        raise NoCandidateError(f"all tokens filtered from labels: {sorted(present.values())!r}")
    best = min(votes, key=lambda t: (-votes[t], t))
    return best


def prune_families(manifest, min_count):
    """Drop every family with fewer than ``min_count`` records."""
    if min_count < 1:
        raise InvalidParamsError(f"min_count must be positive, got {min_count}")
    counts = manifest.family_counts
    kept = [r for r in manifest.records if counts[r.family] >= min_count]
    return Manifest(kept)


def stratified_sample(manifest, per_family, min_family_size, seed):
    """Sample ``per_family`` records from each family of size >= ``min_family_size``.

    Families below the size threshold are dropped entirely.  Selection is
    uniform without replacement and reproducible from ``seed``.
    """
    if per_family > min_family_size:
        raise InvalidParamsError(
            f"per_family ({per_family}) exceeds min_family_size ({min_family_size})")
    if per_family < 1:
        raise InvalidParamsError(f"per_family must be positive, got {per_family}")
    rng = random.Random(seed)
    chosen = []
    groups = manifest.by_family()
    for family in sorted(groups):
        members = groups[family]
        if len(members) < min_family_size:
            continue
        chosen.extend(rng.sample(members, per_family))
    return Manifest(chosen)


def split(manifest, test_fraction, seed):
    """Assign train/test per family, reproducibly from ``seed``.

    Test count per family is round(fraction * size), clamped to [1, size - 1]
    so every family of size >= 2 appears on both sides.  A family of size 1
    goes to train with a warning.
    """
    if not 0 < test_fraction < 1:
        raise InvalidParamsError(f"test_fraction must be in (0,1), got {test_fraction}")
    for r in manifest.records:
        if not r.family:
            raise InvalidParamsError(f"record {r.sample_id} is unlabeled")
    rng = random.Random(seed)
    assigned = []
    groups = manifest.by_family()
    for family in sorted(groups):
        members = list(groups[family])
        if len(members) == 1:
            log.warning("family %r has a single sample; assigning it to train", family)
            assigned.append(replace(members[0], split="train"))
            continue
        n_test = min(len(members) - 1, max(1, round(test_fraction * len(members))))
        rng.shuffle(members)
        test_ids = {r.sample_id for r in members[:n_test]}
        for r in members:
            assigned.append(replace(r, split="test" if r.sample_id in test_ids else "train"))
    return Manifest(assigned)
