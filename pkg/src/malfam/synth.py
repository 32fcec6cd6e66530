"""Synthetic corpus generation for pipeline testing.

Emits static/dynamic report files and binaries whose class signal is fully
controlled: each family owns a pool of discriminative tokens planted into
the chosen signal channels, and a bright byte stripe at a family-specific
relative file offset.  ``signal`` is the probability that any one token (or
stripe byte) comes from the family pool instead of the shared noise pool,
so signal=1.0 makes families trivially separable and signal=0.0 reduces
every channel to shared noise.
"""

import hashlib
import json
from pathlib import Path

import numpy as np

from . import ingest
from .corpus import Manifest, SampleRecord
from .errors import InvalidParamsError

DEFAULT_SIGNAL_CHANNELS = (ingest.IMPORTS_LIST, ingest.SIGNATURES)

# Tokens drawn per channel per sample.
_CHANNEL_TOKENS = {
    ingest.PE_RESOURCE_LIST: 6,
    ingest.EMBEDDED_DOMAINS_LIST: 4,
    ingest.IMPORTS_LIST: 20,
    ingest.CONTACTED_URLS_LIST: 4,
    ingest.SIGNATURES: 10,
    ingest.BEHAVIOR_CALLS: 30,
    ingest.BEHAVIOR_DLL_LOADED: 8,
    ingest.NETWORK_HTTP: 4,
    ingest.NETWORK_HOSTS: 4,
    ingest.STRINGS: 10,
}

_FAMILY_POOL = 12
_SHARED_POOL = 30

_MIN_SIZE = 2048
_MAX_SIZE = 8192


def _family_name(idx):
    return f"fam{idx:02d}"


def _shared_pools():
    pools = {
        ingest.TRID: [f"Win32 EXE v{i}" for i in range(6)],
        ingest.PE_RESOURCE_LIST: [(f"res{i:04x}", "RT_ICON" if i % 2 else "RT_STRING")
                                  for i in range(_SHARED_POOL)],
        ingest.EMBEDDED_DOMAINS_LIST: [f"cdn{i}.shared-noise.net" for i in range(_SHARED_POOL)],
        ingest.IMPORTS_LIST: [(f"sys{i % 6}.dll", f"CommonProc{i}") for i in range(_SHARED_POOL)],
        ingest.CONTACTED_URLS_LIST: [f"http://www.update{i}.shared-noise.org/check"
                                     for i in range(_SHARED_POOL)],
        ingest.SIGNATURES: [f"common_behavior_{i}" for i in range(_SHARED_POOL)],
        ingest.BEHAVIOR_CALLS: [f"NtCommonCall{i}" for i in range(_SHARED_POOL)],
        ingest.BEHAVIOR_DLL_LOADED: [f"loaded{i % 10}.dll" for i in range(_SHARED_POOL)],
        ingest.NETWORK_HTTP: [f"GET /noise/{i} HTTP/1.1" for i in range(_SHARED_POOL)],
        ingest.NETWORK_HOSTS: [f"203.0.113.{i}" for i in range(_SHARED_POOL)],
        ingest.STRINGS: [f"shared string {i}" for i in range(_SHARED_POOL)],
    }
    return pools


def _family_pools(family):
    return {
        ingest.TRID: [f"{family} packed EXE v{i}" for i in range(3)],
        ingest.PE_RESOURCE_LIST: [(f"{family}res{i:02d}", "RT_RCDATA")
                                  for i in range(_FAMILY_POOL)],
        ingest.EMBEDDED_DOMAINS_LIST: [f"c2-{family}-{i}.evil.example" for i in range(_FAMILY_POOL)],
        ingest.IMPORTS_LIST: [(f"{family}core{i % 4}.dll", f"Run{family.capitalize()}Stage{i}")
                              for i in range(_FAMILY_POOL)],
        ingest.CONTACTED_URLS_LIST: [f"https://drop-{family}-{i}.evil.example/payload"
                                     for i in range(_FAMILY_POOL)],
        ingest.SIGNATURES: [f"{family}_marker_{i}" for i in range(_FAMILY_POOL)],
        ingest.BEHAVIOR_CALLS: [f"Nt{family.capitalize()}Op{i}" for i in range(_FAMILY_POOL)],
        ingest.BEHAVIOR_DLL_LOADED: [f"{family}hook{i % 6}.dll" for i in range(_FAMILY_POOL)],
        ingest.NETWORK_HTTP: [f"POST /{family}/beacon/{i} HTTP/1.1" for i in range(_FAMILY_POOL)],
        ingest.NETWORK_HOSTS: [f"198.51.{sum(map(ord, family)) % 100}.{i}"
                               for i in range(_FAMILY_POOL)],
        ingest.STRINGS: [f"{family} implant build {i}" for i in range(_FAMILY_POOL)],
    }


def _draw_tokens(rng, channel, count, family_pool, shared_pool, use_signal, signal):
    out = []
    for _ in range(count):
        if use_signal and rng.random() < signal:
            pool = family_pool[channel]
        else:
            pool = shared_pool[channel]
        out.append(pool[int(rng.integers(len(pool)))])
    return out


def _binary_bytes(rng, family_idx, n_families, signal):
    """Noise bytes with a bright stripe at the family's relative offset."""
    size = int(rng.integers(_MIN_SIZE, _MAX_SIZE))
    data = rng.integers(0, 256, size=size).astype(np.uint8)
    slot = 1.0 / n_families
    start = int(size * slot * (family_idx + 0.25))
    stop = int(size * slot * (family_idx + 0.75))
    stripe = rng.random(stop - start) < signal
    bright = (200 + rng.integers(0, 56, size=stop - start)).astype(np.uint8)
    data[start:stop] = np.where(stripe, bright, data[start:stop])
    return data.tobytes()


def _static_doc(tokens, family):
    return {
        "additional_info": {
            "trid": [{"file_type": tokens[ingest.TRID][0], "probability": 72.4},
                     {"file_type": "Generic fallback", "probability": 11.1}],
            "pe-resource-list": {h: t for h, t in tokens[ingest.PE_RESOURCE_LIST]},
            "domains": tokens[ingest.EMBEDDED_DOMAINS_LIST],
            "imports": _imports_map(tokens[ingest.IMPORTS_LIST]),
            "contacted_urls": tokens[ingest.CONTACTED_URLS_LIST],
        },
        "scans": {
            "AlphaAV": {"result": f"Trojan:Win32/{family}.A"},
            "BetaScan": {"result": f"{family}.gen"},
            "GammaSec": {"result": f"Win32.{family}"},
            "DeltaGuard": {"result": "Malware.Generic"},
        },
    }


def _imports_map(pairs):
    imports = {}
    for dll, func in pairs:
        imports.setdefault(dll, []).append(func)
    return imports


def _dynamic_doc(tokens):
    calls = tokens[ingest.BEHAVIOR_CALLS]
    half = len(calls) // 2
    return {
        "signatures": [{"name": s} for s in tokens[ingest.SIGNATURES]],
        "behavior": {
            "processes": [{"calls": [{"api": a} for a in calls[:half]]},
                          {"calls": [{"api": a} for a in calls[half:]]}],
            "summary": {"dll_loaded": tokens[ingest.BEHAVIOR_DLL_LOADED]},
        },
        "network": {
            "http": [{"uri": u} for u in tokens[ingest.NETWORK_HTTP]],
            "hosts": tokens[ingest.NETWORK_HOSTS],
            "udp": [{"src": "10.0.0.2", "sport": 1337, "dst": "10.0.0.3", "dport": 53}],
        },
        "strings": tokens[ingest.STRINGS],
    }


def synth_corpus(out_dir, n_families=10, per_family=100, signal=0.5, seed=0,
                 signal_channels=DEFAULT_SIGNAL_CHANNELS):
    """Generate a labeled corpus under ``out_dir``; returns its manifest.

    Layout: reports/static/<id>.json, reports/dynamic/<id>.json,
    binaries/<id>.bin, manifest.csv.  Manifest paths are relative to
    ``out_dir`` so the corpus is relocatable, and the whole tree is
    byte-identical for a given (n_families, per_family, signal, seed).
    """
    if n_families < 2 or per_family < 2:
        raise InvalidParamsError("need n_families >= 2 and per_family >= 2")
    if not 0.0 <= signal <= 1.0:
        raise InvalidParamsError(f"signal must be in [0,1], got {signal}")
    unknown = set(signal_channels) - set(ingest.ALL_CHANNELS)
    if unknown:
        raise InvalidParamsError(f"unknown signal channels {sorted(unknown)}")

    out_dir = Path(out_dir)
    static_dir = out_dir / "reports" / "static"
    dynamic_dir = out_dir / "reports" / "dynamic"
    binary_dir = out_dir / "binaries"
    for d in (static_dir, dynamic_dir, binary_dir):
        d.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    shared = _shared_pools()
    records = []
    for family_idx in range(n_families):
        family = _family_name(family_idx)
        family_pool = _family_pools(family)
        for _ in range(per_family):
            tokens = {ingest.TRID: _draw_tokens(rng, ingest.TRID, 1, family_pool, shared,
                                                ingest.TRID in signal_channels, signal)}
            for channel, count in _CHANNEL_TOKENS.items():
                tokens[channel] = _draw_tokens(rng, channel, count, family_pool, shared,
                                               channel in signal_channels, signal)
            blob = _binary_bytes(rng, family_idx, n_families, signal)
            sample_id = hashlib.sha256(blob).hexdigest()

            (binary_dir / f"{sample_id}.bin").write_bytes(blob)
            with open(static_dir / f"{sample_id}.json", "w", encoding="utf-8") as fh:
                json.dump(_static_doc(tokens, family), fh, sort_keys=True)
            with open(dynamic_dir / f"{sample_id}.json", "w", encoding="utf-8") as fh:
                json.dump(_dynamic_doc(tokens), fh, sort_keys=True)

            records.append(SampleRecord(
                sample_id=sample_id,
                family=family,
                static_report=f"reports/static/{sample_id}.json",
                dynamic_report=f"reports/dynamic/{sample_id}.json",
                binary=f"binaries/{sample_id}.bin",
            ))

    manifest = Manifest(records)
    manifest.save(out_dir / "manifest.csv")
    return manifest
