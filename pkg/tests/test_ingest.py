import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from malfam import ingest
from malfam.errors import EmptyUrlError, MalformedJsonError, SchemaMismatchError
from malfam.ingest import (extract_dynamic_features, extract_static_features,
                           load_dynamic_report, load_static_report, strip_url)

STATIC_DOC = {
    "additional_info": {
        "trid": [{"file_type": "Win32 EXE", "probability": 52.1},
                 {"file_type": "Generic", "probability": 30.0}],
        "pe-resource-list": {"abc123": "RT_ICON"},
        "domains": ["http://www.evil.com/a?b=1", "https://sub.domain.org"],
        "imports": {"kernel32.dll": ["CreateFileA", "ReadFile"]},
        "contacted_urls": ["foo.net/path"],
    },
    "scans": {"A": {"result": "Zbot.A"}, "B": {"result": None}},
}

DYNAMIC_DOC = {
    "signatures": [{"name": "allocates_rwx"}, {"name": "persists_autorun"}],
    "behavior": {
        "processes": [{"calls": [{"api": "NtOpenFile"}, {"api": "NtClose"}]},
                      {"calls": [{"api": "NtCreateProcess"}]}],
        "summary": {"dll_loaded": ["user32.dll"]},
    },
    "network": {
        "http": [{"uri": "http://c2.example/gate.php"}],
        "hosts": ["10.0.0.1"],
        "udp": [{"src": "10.0.0.1", "sport": 53, "dst": "8.8.8.8", "dport": 5353},
                {"src": "10.0.0.2", "sport": 99999, "dst": "x", "dport": 1}],
    },
    "strings": ["hello world", "  "],
}


class TestLoadStaticReport:
    def test_full_document(self):
        r = load_static_report(json.dumps(STATIC_DOC).encode())
        assert r.trid == [("Win32 EXE", 52.1), ("Generic", 30.0)]
        assert r.pe_resources == [("abc123", "RT_ICON")]
        assert r.imports == {"kernel32.dll": ["CreateFileA", "ReadFile"]}
        assert r.scans.labels == {"A": "Zbot.A"}

    def test_scans_only_document(self):
        r = load_static_report(b'{"scans": {"A": {"result": "Foo"}}}')
        assert r.trid == [] and r.imports == {} and r.embedded_domains == []
        assert r.scans.labels == {"A": "Foo"}

    def test_malformed_json(self):
        with pytest.raises(MalformedJsonError):
            load_static_report(b"MZ\x90\x00 not json")

    def test_schema_mismatch(self):
        with pytest.raises(SchemaMismatchError):
            load_static_report(b'{"unrelated": 1}')
        with pytest.raises(SchemaMismatchError):
            load_static_report(b'[1, 2]')


class TestLoadDynamicReport:
    def test_full_document(self):
        r = load_dynamic_report(json.dumps(DYNAMIC_DOC).encode())
        assert r.signatures == ["allocates_rwx", "persists_autorun"]
        assert r.behavior_calls == [["NtOpenFile", "NtClose"], ["NtCreateProcess"]]
        assert r.dlls_loaded == ["user32.dll"]
        assert r.network_http == ["http://c2.example/gate.php"]
        # the second udp entry has an out-of-range port and is dropped
        assert r.udp_src == [("10.0.0.1", 53)]
        assert r.udp_dst == [("8.8.8.8", 5353), ("x", 1)]

    def test_empty_behavior(self):
        r = load_dynamic_report(b'{"behavior": {}}')
        assert r.behavior_calls == [] and r.dlls_loaded == []

    def test_malformed_json(self):
        with pytest.raises(MalformedJsonError):
            load_dynamic_report(b"\x00\x01")


class TestStripUrl:
    def test_scheme_www_and_path(self):
        assert strip_url("http://www.evil.com/a?b=1") == "evil.com"

    def test_scheme_only(self):
        assert strip_url("https://sub.domain.org") == "sub.domain.org"

    def test_bare_host(self):
        assert strip_url("foo.net") == "foo.net"

    def test_port_kept(self):
        assert strip_url("http://evil.com:8080/x") == "evil.com:8080"

    def test_empty_result(self):
        with pytest.raises(EmptyUrlError):
            strip_url("http://")

    @given(st.text(alphabet=st.characters(min_codepoint=33, max_codepoint=126),
                   min_size=1, max_size=40))
    def test_idempotent(self, raw):
        try:
            once = strip_url(raw)
        except EmptyUrlError:
            return
        assert strip_url(once) == once


class TestExtractStatic:
    def test_imports_token_format(self):
        r = load_static_report(json.dumps(STATIC_DOC).encode())
        bag = extract_static_features(r)
        assert bag.tokens(ingest.IMPORTS_LIST) == ["kernel32.dll:CreateFileA",
                                                   "kernel32.dll:ReadFile"]

    def test_trid_keeps_highest_probability(self):
        r = load_static_report(json.dumps(STATIC_DOC).encode())
        assert extract_static_features(r).tokens(ingest.TRID) == ["Win32 EXE"]

    def test_resource_token_format(self):
        r = load_static_report(json.dumps(STATIC_DOC).encode())
        assert extract_static_features(r).tokens(ingest.PE_RESOURCE_LIST) == ["abc123:RT_ICON"]

    def test_urls_stripped(self):
        r = load_static_report(json.dumps(STATIC_DOC).encode())
        bag = extract_static_features(r)
        assert bag.tokens(ingest.EMBEDDED_DOMAINS_LIST) == ["evil.com", "sub.domain.org"]
        assert bag.tokens(ingest.CONTACTED_URLS_LIST) == ["foo.net"]

    def test_empty_report(self):
        bag = extract_static_features(load_static_report(b'{"scans": {}}'))
        assert all(bag.tokens(c) == [] for c in ingest.STATIC_CHANNELS)


class TestExtractDynamic:
    def test_spaces_removed_from_strings(self):
        r = load_dynamic_report(json.dumps(DYNAMIC_DOC).encode())
        bag = extract_dynamic_features(r)
        assert bag.tokens(ingest.STRINGS) == ["helloworld"]

    def test_calls_concatenated_in_report_order(self):
        r = load_dynamic_report(json.dumps(DYNAMIC_DOC).encode())
        bag = extract_dynamic_features(r)
        assert bag.tokens(ingest.BEHAVIOR_CALLS) == ["NtOpenFile", "NtClose", "NtCreateProcess"]

    def test_udp_only_when_requested(self):
        r = load_dynamic_report(json.dumps(DYNAMIC_DOC).encode())
        without = extract_dynamic_features(r)
        assert ingest.NETWORK_UDP_SRC not in without.channels
        with_udp = extract_dynamic_features(r, include_udp=True)
        assert with_udp.tokens(ingest.NETWORK_UDP_SRC) == ["10.0.0.1:53"]
        assert with_udp.tokens(ingest.NETWORK_UDP_DST) == ["8.8.8.8:5353", "x:1"]

    def test_extraction_deterministic(self):
        r = load_dynamic_report(json.dumps(DYNAMIC_DOC).encode())
        assert extract_dynamic_features(r) == extract_dynamic_features(r)

    def test_channel_set_fixed(self):
        r = load_dynamic_report(json.dumps(DYNAMIC_DOC).encode())
        bag = extract_dynamic_features(r, include_udp=True)
        allowed = set(ingest.ALL_CHANNELS) | set(ingest.UDP_CHANNELS)
        assert set(bag.channels) <= allowed
