import json

import pytest

from malfam import ingest
from malfam.corpus import Manifest, SampleRecord
from malfam.errors import InvalidParamsError
from malfam.pipeline import (ClassifierConfig, extract_bags, extract_sample,
                             load_bags, run_attribution, save_bags,
                             train_classifier)

STATIC = {"scans": {"A": {"result": "zbot"}},
          "additional_info": {"imports": {"k.dll": ["F"]}}}
DYNAMIC = {"signatures": [{"name": "sig_a"}]}


def write_corpus(tmp_path, *, static=True, dynamic=True, broken=False):
    root = tmp_path / "corpus"
    (root / "reports" / "static").mkdir(parents=True)
    (root / "reports" / "dynamic").mkdir(parents=True)
    record = SampleRecord(sample_id="aa11", family="zbot")
    if static:
        path = root / "reports" / "static" / "aa11.json"
        path.write_bytes(b"not json" if broken else json.dumps(STATIC).encode())
        record.static_report = "reports/static/aa11.json"
    if dynamic:
        path = root / "reports" / "dynamic" / "aa11.json"
        path.write_bytes(b"not json" if broken else json.dumps(DYNAMIC).encode())
        record.dynamic_report = "reports/dynamic/aa11.json"
    manifest = Manifest([record])
    manifest.save(root / "manifest.csv")
    return root, manifest, record


class TestExtractSample:
    def test_merges_both_reports(self, tmp_path):
        root, manifest, record = write_corpus(tmp_path)
        bag = extract_sample(record, root / "manifest.csv")
        assert bag.tokens(ingest.IMPORTS_LIST) == ["k.dll:F"]
        assert bag.tokens(ingest.SIGNATURES) == ["sig_a"]

    def test_one_missing_side_still_extracts(self, tmp_path):
        root, manifest, record = write_corpus(tmp_path, dynamic=False)
        bag = extract_sample(record, root / "manifest.csv")
        assert bag.tokens(ingest.IMPORTS_LIST) == ["k.dll:F"]
        assert bag.tokens(ingest.SIGNATURES) == []

    def test_skipped_only_when_both_unusable(self, tmp_path):
        root, manifest, record = write_corpus(tmp_path, broken=True)
        assert extract_sample(record, root / "manifest.csv") is None
        bags = extract_bags(manifest, root / "manifest.csv")
        assert bags == {}

    def test_jobs_do_not_change_results(self, tiny_corpus):
        root, manifest = tiny_corpus
        serial = extract_bags(manifest, root / "manifest.csv", jobs=1)
        parallel = extract_bags(manifest, root / "manifest.csv", jobs=4)
        assert serial == parallel


class TestBagsIO:
    def test_jsonl_roundtrip(self, tmp_path):
        bags = {"s1": ingest.FeatureBag({ingest.SIGNATURES: ["a", "b"]}),
                "s2": ingest.FeatureBag({ingest.IMPORTS_LIST: ["x:y"]})}
        save_bags(bags, tmp_path / "bags.jsonl")
        assert load_bags(tmp_path / "bags.jsonl") == bags

    def test_lines_sorted_by_sample_id(self, tmp_path):
        bags = {"zz": ingest.FeatureBag(), "aa": ingest.FeatureBag()}
        save_bags(bags, tmp_path / "bags.jsonl")
        ids = [json.loads(line)["sample_id"]
               for line in (tmp_path / "bags.jsonl").read_text().splitlines()]
        assert ids == ["aa", "zz"]


class TestRunAttribution:
    def test_high_signal_corpus_separates(self, tiny_corpus):
        root, manifest = tiny_corpus
        bags = extract_bags(manifest, root / "manifest.csv")
        config = ClassifierConfig(kind="mnb", params={"alpha": 1.0})
        result = run_attribution(bags, manifest, ingest.ALL_CHANNELS, config, seed=0)
        assert result.metrics.accuracy == 1.0
        assert len(result.mask.kept) == -(-len(result.vocab) // 2)  # ceil(V/2)

    def test_requires_split(self, tiny_corpus):
        root, _ = tiny_corpus
        unsplit = Manifest.load(root / "manifest.csv")
        bags = extract_bags(unsplit, root / "manifest.csv")
        config = ClassifierConfig(kind="mnb")
        with pytest.raises(InvalidParamsError):
            run_attribution(bags, unsplit, ingest.ALL_CHANNELS, config, seed=0)

    def test_unknown_classifier_kind(self):
        with pytest.raises(InvalidParamsError):
            train_classifier(ClassifierConfig(kind="mystery"), None, None, seed=0)
