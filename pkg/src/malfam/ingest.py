"""Report parsing and feature-channel extraction.

Static reports are VirusTotal-style JSON, dynamic reports are Cuckoo-style
JSON.  Both formats drift between scanner versions, so parsing goes through
a small adapter table of canonical paths; unknown extra fields are ignored
and absent fields simply yield empty channels.
"""

import json
from dataclasses import dataclass, field

from .errors import EmptyUrlError, MalformedJsonError, SchemaMismatchError

# Feature channels.  UDP endpoints are extractable but excluded from the
# default set: they measurably hurt attribution, so they only appear when a
# caller opts in.
TRID = "TRID"
PE_RESOURCE_LIST = "PE_RESOURCE_LIST"
EMBEDDED_DOMAINS_LIST = "EMBEDDED_DOMAINS_LIST"
IMPORTS_LIST = "IMPORTS_LIST"
CONTACTED_URLS_LIST = "CONTACTED_URLS_LIST"
SIGNATURES = "SIGNATURES"
BEHAVIOR_CALLS = "BEHAVIOR_CALLS"
BEHAVIOR_DLL_LOADED = "BEHAVIOR_DLL_LOADED"
NETWORK_HTTP = "NETWORK_HTTP"
NETWORK_HOSTS = "NETWORK_HOSTS"
STRINGS = "STRINGS"
NETWORK_UDP_SRC = "NETWORK_UDP_SRC"
NETWORK_UDP_DST = "NETWORK_UDP_DST"

STATIC_CHANNELS = (TRID, PE_RESOURCE_LIST, EMBEDDED_DOMAINS_LIST,
                   IMPORTS_LIST, CONTACTED_URLS_LIST)
DYNAMIC_CHANNELS = (SIGNATURES, BEHAVIOR_CALLS, BEHAVIOR_DLL_LOADED,
                    NETWORK_HTTP, NETWORK_HOSTS, STRINGS)
UDP_CHANNELS = (NETWORK_UDP_SRC, NETWORK_UDP_DST)
ALL_CHANNELS = STATIC_CHANNELS + DYNAMIC_CHANNELS


@dataclass
class ScanLabels:
    """Per-scanner raw label strings from a static report."""

    labels: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.labels)


@dataclass
class StaticReport:
    trid: list = field(default_factory=list)            # (file_type, probability)
    pe_resources: list = field(default_factory=list)    # (resource_hash, data_type)
    embedded_domains: list = field(default_factory=list)
    imports: dict = field(default_factory=dict)          # dll -> [function, ...]
    contacted_urls: list = field(default_factory=list)
    scans: ScanLabels = field(default_factory=ScanLabels)


@dataclass
class DynamicReport:
    signatures: list = field(default_factory=list)
    behavior_calls: list = field(default_factory=list)   # per-process call lists
    dlls_loaded: list = field(default_factory=list)
    network_http: list = field(default_factory=list)
    network_hosts: list = field(default_factory=list)
    strings: list = field(default_factory=list)
    udp_src: list = field(default_factory=list)           # (ip, port)
    udp_dst: list = field(default_factory=list)


@dataclass
class FeatureBag:
    """Per-sample map from channel id to its ordered token list."""

    channels: dict = field(default_factory=dict)

    def tokens(self, channel):
        return self.channels.get(channel, [])

    def merged(self, other):
        out = dict(self.channels)
        out.update(other.channels)
        return FeatureBag(out)

    def restricted(self, keep):
        keep = set(keep)
        return FeatureBag({c: t for c, t in self.channels.items() if c in keep})


def _parse_json(data):
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8", errors="replace")
    try:
        doc = json.loads(data)
    except (ValueError, TypeError) as exc:
        raise MalformedJsonError(f"report is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaMismatchError("report JSON is not an object")
    return doc


def load_static_report(data):
    """Parse VirusTotal-style report bytes into a StaticReport.

    Adapter paths: additional_info.{trid,pe-resource-list,domains,imports,
    contacted_urls} and scans.<scanner>.result.  Absent fields become empty.
    """
    doc = _parse_json(data)
    info = doc.get("additional_info")
    scans = doc.get("scans")
    if not isinstance(info, dict) and not isinstance(scans, dict):
        raise SchemaMismatchError("no static report layout matched "
                                  "(expected 'additional_info' or 'scans')")
    report = StaticReport()
    info = info if isinstance(info, dict) else {}

    for entry in _as_list(info.get("trid")):
        if isinstance(entry, dict) and "file_type" in entry:
            try:
                prob = float(entry.get("probability", 0.0))
            except (TypeError, ValueError):
                continue
            report.trid.append((str(entry["file_type"]), prob))
        elif isinstance(entry, (list, tuple)) and len(entry) == 2:
            try:
                report.trid.append((str(entry[0]), float(entry[1])))
            except (TypeError, ValueError):
                continue

    resources = info.get("pe-resource-list")
    if isinstance(resources, dict):
        report.pe_resources = [(str(h), str(t)) for h, t in resources.items()]
    else:
        for entry in _as_list(resources):
            if isinstance(entry, (list, tuple)) and len(entry) == 2:
                report.pe_resources.append((str(entry[0]), str(entry[1])))

    report.embedded_domains = [str(d) for d in _as_list(info.get("domains"))]

    imports = info.get("imports")
    if isinstance(imports, dict):
        report.imports = {str(dll): [str(f) for f in _as_list(funcs)]
                          for dll, funcs in imports.items()}

    for entry in _as_list(info.get("contacted_urls")):
        if isinstance(entry, dict) and "url" in entry:
            report.contacted_urls.append(str(entry["url"]))
        elif isinstance(entry, str):
            report.contacted_urls.append(entry)

    if isinstance(scans, dict):
        for scanner, result in scans.items():
            if isinstance(result, dict) and result.get("result"):
                report.scans.labels[str(scanner)] = str(result["result"])

    return report


def load_dynamic_report(data):
    """Parse Cuckoo-style report bytes into a DynamicReport.

    Adapter paths: signatures[].name, behavior.processes[].calls[].api,
    behavior.summary.dll_loaded[], network.http[].uri, network.hosts[],
    strings[], network.udp[].{src,sport,dst,dport}.
    """
    doc = _parse_json(data)
    known = ("signatures", "behavior", "network", "strings")
    if not any(key in doc for key in known):
        raise SchemaMismatchError(f"no dynamic report layout matched (expected one of {known})")
    report = DynamicReport()

    for entry in _as_list(doc.get("signatures")):
        if isinstance(entry, dict) and entry.get("name"):
            report.signatures.append(str(entry["name"]))
        elif isinstance(entry, str):
            report.signatures.append(entry)

    behavior = doc.get("behavior") or {}
    for proc in _as_list(behavior.get("processes")):
        if not isinstance(proc, dict):
            continue
        calls = [str(call["api"]) for call in _as_list(proc.get("calls"))
                 if isinstance(call, dict) and call.get("api")]
        report.behavior_calls.append(calls)
    summary = behavior.get("summary") or {}
    report.dlls_loaded = [str(d) for d in _as_list(summary.get("dll_loaded"))]

    network = doc.get("network") or {}
    for entry in _as_list(network.get("http")):
        if isinstance(entry, dict) and entry.get("uri"):
            report.network_http.append(str(entry["uri"]))
        elif isinstance(entry, str):
            report.network_http.append(entry)
    report.network_hosts = [str(h) for h in _as_list(network.get("hosts"))]
    for entry in _as_list(network.get("udp")):
        if not isinstance(entry, dict):
            continue
        src = _endpoint(entry.get("src"), entry.get("sport"))
        if src:
            report.udp_src.append(src)
        dst = _endpoint(entry.get("dst"), entry.get("dport"))
        if dst:
            report.udp_dst.append(dst)

    report.strings = [str(s) for s in _as_list(doc.get("strings"))]
    return report


def _as_list(value):
    return value if isinstance(value, list) else []


def _endpoint(ip, port):
    """Validate one UDP endpoint; drop entries with missing or bad ports."""
    if not ip:
        return None
    try:
        port = int(port)
    except (TypeError, ValueError):
        return None
    if not 0 <= port <= 65535:
        return None
    return (str(ip), port)


def strip_url(url):
    """Reduce a URL to its base host.

    Strips one leading scheme (http:// or https://), any leading www.
    prefixes, and everything from the first '/', '?' or '#'.  Hostnames are
    case-insensitive, so the result is lowercased.  Stripping all www.
    prefixes (not just the first) keeps the operation idempotent.
    """
    url = url.strip().lower()
    for scheme in ("http://", "https://"):
        if url.startswith(scheme):
            url = url[len(scheme):]
            break
    while url.startswith("www."):
        url = url[len("www."):]
    for stop in "/?#":
        cut = url.find(stop)
        if cut != -1:
            url = url[:cut]
    if not url:
        raise EmptyUrlError(f"URL reduced to empty string: {url!r}")
    return url


def _stripped_urls(urls):
    out = []
    for u in urls:
        try:
            out.append(strip_url(u))
        except EmptyUrlError:
            continue
    return out


def extract_static_features(report):
    """Turn a StaticReport into its five feature channels.

    TRID keeps only the highest-probability file type.  Resources and imports
    are joined into single "left:right" tokens.  URL channels keep only the
    base host of each entry.
    """
    trid = []
    if report.trid:
        best = max(report.trid, key=lambda pair: pair[1])
        trid = [best[0]]
    resources = [f"{h}:{t}" for h, t in report.pe_resources]
    imports = [f"{dll}:{func}"
               for dll, funcs in report.imports.items() for func in funcs]
    return FeatureBag({
        TRID: trid,
        PE_RESOURCE_LIST: resources,
        EMBEDDED_DOMAINS_LIST: _stripped_urls(report.embedded_domains),
        IMPORTS_LIST: imports,
        CONTACTED_URLS_LIST: _stripped_urls(report.contacted_urls),
    })


def extract_dynamic_features(report, include_udp=False):
    """Turn a DynamicReport into its dynamic feature channels.

    Per-process API call sequences are concatenated in report order.  Strings
    lose every space character.  UDP endpoints become "ip:port" tokens and
    appear only when ``include_udp`` is set.
    """
    calls = [api for proc in report.behavior_calls for api in proc]
    strings = [s.replace(" ", "") for s in report.strings]
    strings = [s for s in strings if s]
    channels = {
        SIGNATURES: list(report.signatures),
        BEHAVIOR_CALLS: calls,
        BEHAVIOR_DLL_LOADED: list(report.dlls_loaded),
        NETWORK_HTTP: list(report.network_http),
        NETWORK_HOSTS: list(report.network_hosts),
        STRINGS: strings,
    }
    if include_udp:
        channels[NETWORK_UDP_SRC] = [f"{ip}:{port}" for ip, port in report.udp_src]
        channels[NETWORK_UDP_DST] = [f"{ip}:{port}" for ip, port in report.udp_dst]
    return FeatureBag(channels)
