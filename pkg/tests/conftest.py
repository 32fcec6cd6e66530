import pytest


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            if report.when == "call" or (report.when == "setup" and status != "passed"):
                lines.append((nodeid.split("::")[-1], status.upper()))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"{name}: {status}")


@pytest.fixture
def tiny_corpus(tmp_path):
    """Small high-signal corpus with an assigned 80/20 split."""
    from malfam.corpus import split
    from malfam.synth import synth_corpus

    root = tmp_path / "corpus"
    manifest = synth_corpus(root, n_families=3, per_family=10, signal=1.0, seed=5)
    return root, split(manifest, 0.2, seed=5)
