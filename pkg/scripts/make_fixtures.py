#!/usr/bin/env python3
"""Regenerate the bundled test fixtures under tests/fixtures/.

Everything here is deterministic; the checked-in files are the source of
truth and this script only exists to rebuild or extend them.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"

sys.path.insert(0, str(ROOT / "src"))

from exposure_engine.clustering import select_k, kmeans_best  # noqa: E402
import numpy as np  # noqa: E402


def write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# sample knowledge base: 12 techniques, 8 countermeasures, 5 technologies,
# 20 edges (13 Mitigates + 7 Targets). Reference counts by hand:
#   C001:3 C002:2 C003:2 C004:2 C005:1 C006:1 C007:1 C008:1 (total 13)
# ---------------------------------------------------------------------------

def sample_kb() -> dict:
    techniques = [
        ("T0001", "Phishing", "High"),
        ("T0002", "Credential dumping", "High"),
        ("T0003", "Lateral movement", "Medium"),
        ("T0004", "SQL injection", "High"),
        ("T0005", "Ransomware deployment", "High"),
        ("T0006", "Port scanning", "Low"),
        ("T0007", "Brute force", "Medium"),
        ("T0008", "Supply chain implant", "High"),
        ("T0009", "Privilege escalation", "High"),
        ("T0010", "Data exfiltration", "High"),
        ("T0011", "Web shell", "Medium"),
        ("T0012", "Denial of service", "Medium"),
    ]
    countermeasures = [
        ("C001", "Multi-factor authentication", ["Preventive", "Identity_and_access_management", "Confidentiality", "Protect"]),
        ("C002", "Patch management", ["Preventive", "Threat_and_vulnerability_management", "Integrity", "Protect"]),
        ("C003", "Network segmentation", ["Preventive", "System_and_network_security", "Protection"]),
        ("C004", "Log monitoring", ["Detective", "Information_security_event_management", "Detect"]),
        ("C005", "Supply chain review", ["Preventive", "Supplier_relationships_security", "Identify"]),
        ("C006", "Backup strategy", ["Corrective", "Continuity", "Availability", "Recover"]),
        ("C007", "Web application firewall", ["Preventive", "Application_security", "Integrity"]),
        ("C008", "Account lockout policy", ["Preventive", "Identity_and_access_management", "Confidentiality"]),
    ]
    technologies = [
        ("TECH01", "Linux server fleet"),
        ("TECH02", "Public web application"),
        ("TECH03", "Windows endpoints"),
        ("TECH04", "Relational database"),
        ("TECH05", "Cloud object storage"),
    ]
    nodes = []
    for tid, name, severity in techniques:
        nodes.append({"id": tid, "kind": "Technique", "name": name, "severity": severity})
    for cid, name, attributes in countermeasures:
        nodes.append({"id": cid, "kind": "Countermeasure", "name": name, "attributes": attributes})
    for gid, name in technologies:
        nodes.append({"id": gid, "kind": "Technology", "name": name})

    mitigates = [
        ("C001", "T0001"), ("C001", "T0007"), ("C001", "T0009"),
        ("C002", "T0004"), ("C002", "T0005"),
        ("C003", "T0003"), ("C003", "T0012"),
        ("C004", "T0002"), ("C004", "T0010"),
        ("C005", "T0008"),
        ("C006", "T0005"),
        ("C007", "T0011"),
        ("C008", "T0007"),
    ]
    targets = [
        ("T0001", "TECH03"), ("T0002", "TECH03"), ("T0004", "TECH02"),
        ("T0004", "TECH04"), ("T0006", "TECH01"), ("T0011", "TECH02"),
        ("T0012", "TECH05"),
    ]
    edges = [{"src": s, "dst": d, "kind": "Mitigates"} for s, d in mitigates]
    edges += [{"src": s, "dst": d, "kind": "Targets"} for s, d in targets]
    return {"version": 1, "nodes": nodes, "edges": edges}


# ---------------------------------------------------------------------------
# organization profiles, populated from the published before/after counts:
#   total devices 275/361/437, unregistered 86/134/369,
#   privileged users 27/19/45 before and 9/11/16 after,
#   logging below 30%/below 30%/below 50% before, over 90%/90%/80% after.
# ---------------------------------------------------------------------------

ORG_SETTINGS = {
    "org_a": {
        "devices": 275,
        "registered_before": 189, "registered_after": 200,
        "logging_before": 77, "logging_after": 253,        # 28% -> 92%
        "users": 100,
        "priv_before": 27, "priv_after": 9,
        "auth_before": 80, "auth_after": 97,
        "shared_before": 10, "shared_after": 2,
        "technologies": ["TECH01", "TECH02", "TECH03"],
        "network_before": {"public_ips": 8, "necessary_public_ips": 5,
                           "visible_ports": 40, "necessary_visible_ports": 25},
        "network_after": {"public_ips": 6, "necessary_public_ips": 5,
                          "visible_ports": 28, "necessary_visible_ports": 25},
        "logging_counts_before": {"expected_authentications": 1000, "observed_authentications": 700,
                                  "expected_transactions": 5000, "observed_transactions": 4000,
                                  "role_authorized_actions": 600, "total_actions_observed": 1000},
        "logging_counts_after": {"expected_authentications": 1000, "observed_authentications": 980,
                                 "expected_transactions": 5000, "observed_transactions": 4950,
                                 "role_authorized_actions": 950, "total_actions_observed": 1000},
        "updates_before": {"patched_systems": 165, "legacy_unupdatable": 15,
                           "update_delay_days": 120.0, "critical_patch_days": 45.0, "policy_version_lag": 3},
        "updates_after": {"patched_systems": 255, "legacy_unupdatable": 15,
                          "update_delay_days": 30.0, "critical_patch_days": 7.0, "policy_version_lag": 1},
        "motivation_before": {"asset_value_class": 0.7, "restorable_fraction": 0.5,
                              "public_harm_fraction": 0.4, "residual_vuln_fraction": 0.5,
                              "control_maturity": 0.4},
        "motivation_after": {"asset_value_class": 0.7, "restorable_fraction": 0.6,
                             "public_harm_fraction": 0.4, "residual_vuln_fraction": 0.2,
                             "control_maturity": 0.7},
        "revenue": 1_000_000,
        "controls_after": ["C001", "C004"],
        "symmetry_tags": ["TimeAsymmetric", "GainAsymmetric", "LikelihoodAsymmetric"],
    },
    "org_b": {
        "devices": 361,
        "registered_before": 227, "registered_after": 250,
        "logging_before": 101, "logging_after": 332,       # 28% -> 92%
        "users": 120,
        "priv_before": 19, "priv_after": 11,
        "auth_before": 90, "auth_after": 117,
        "shared_before": 12, "shared_after": 3,
        "technologies": ["TECH02", "TECH03", "TECH04"],
        "network_before": {"public_ips": 10, "necessary_public_ips": 6,
                           "visible_ports": 50, "necessary_visible_ports": 30},
        "network_after": {"public_ips": 7, "necessary_public_ips": 6,
                          "visible_ports": 33, "necessary_visible_ports": 30},
        "logging_counts_before": {"expected_authentications": 2000, "observed_authentications": 1500,
                                  "expected_transactions": 8000, "observed_transactions": 6500,
                                  "role_authorized_actions": 1100, "total_actions_observed": 2000},
        "logging_counts_after": {"expected_authentications": 2000, "observed_authentications": 1960,
                                 "expected_transactions": 8000, "observed_transactions": 7900,
                                 "role_authorized_actions": 1900, "total_actions_observed": 2000},
        "updates_before": {"patched_systems": 180, "legacy_unupdatable": 20,
                           "update_delay_days": 180.0, "critical_patch_days": 60.0, "policy_version_lag": 4},
        "updates_after": {"patched_systems": 335, "legacy_unupdatable": 20,
                          "update_delay_days": 21.0, "critical_patch_days": 5.0, "policy_version_lag": 1},
        "motivation_before": {"asset_value_class": 0.8, "restorable_fraction": 0.4,
                              "public_harm_fraction": 0.6, "residual_vuln_fraction": 0.55,
                              "control_maturity": 0.35},
        "motivation_after": {"asset_value_class": 0.8, "restorable_fraction": 0.7,
                             "public_harm_fraction": 0.6, "residual_vuln_fraction": 0.25,
                             "control_maturity": 0.65},
        "revenue": 5_000_000,
        "controls_after": ["C002", "C003"],
        "symmetry_tags": ["TimeAsymmetric", "LikelihoodAsymmetric"],
    },
    "org_c": {
        "devices": 437,
        "registered_before": 68, "registered_after": 400,
        "logging_before": 196, "logging_after": 358,       # 45% -> 82%
        "users": 150,
        "priv_before": 45, "priv_after": 16,
        "auth_before": 90, "auth_after": 140,
        "shared_before": 20, "shared_after": 5,
        "technologies": ["TECH01", "TECH02", "TECH03", "TECH04", "TECH05"],
        "network_before": {"public_ips": 15, "necessary_public_ips": 6,
                           "visible_ports": 80, "necessary_visible_ports": 40},
        "network_after": {"public_ips": 8, "necessary_public_ips": 6,
                          "visible_ports": 45, "necessary_visible_ports": 40},
        "logging_counts_before": {"expected_authentications": 3000, "observed_authentications": 1800,
                                  "expected_transactions": 10000, "observed_transactions": 7000,
                                  "role_authorized_actions": 1500, "total_actions_observed": 3000},
        "logging_counts_after": {"expected_authentications": 3000, "observed_authentications": 2850,
                                 "expected_transactions": 10000, "observed_transactions": 9700,
                                 "role_authorized_actions": 2700, "total_actions_observed": 3000},
        "updates_before": {"patched_systems": 170, "legacy_unupdatable": 37,
                           "update_delay_days": 240.0, "critical_patch_days": 90.0, "policy_version_lag": 6},
        "updates_after": {"patched_systems": 390, "legacy_unupdatable": 37,
                          "update_delay_days": 45.0, "critical_patch_days": 10.0, "policy_version_lag": 2},
        "motivation_before": {"asset_value_class": 0.6, "restorable_fraction": 0.3,
                              "public_harm_fraction": 0.5, "residual_vuln_fraction": 0.6,
                              "control_maturity": 0.3},
        "motivation_after": {"asset_value_class": 0.6, "restorable_fraction": 0.6,
                             "public_harm_fraction": 0.5, "residual_vuln_fraction": 0.3,
                             "control_maturity": 0.55},
        "revenue": 2_500_000,
        "controls_after": ["C001", "C002", "C005"],
        "symmetry_tags": ["GainAsymmetric"],
    },
}


def build_profile(org: str, phase: str) -> dict:
    cfg = ORG_SETTINGS[org]
    suffix = "_before" if phase == "before" else "_after"
    n_devices = cfg["devices"]
    registered = cfg["registered" + suffix]
    logging_devices = cfg["logging" + suffix]
    patched = cfg["updates" + suffix]["patched_systems"]
    legacy = cfg["updates" + suffix]["legacy_unupdatable"]
    technologies = cfg["technologies"]

    devices = []
    for i in range(n_devices):
        device_id = f"{org}-d{i + 1:04d}"
        locations = ["OnPremises"]
        if i % 7 == 0:
            locations.append("Internet")
        if i % 11 == 0:
            locations.append("Vpn")
        devices.append({
            "device_id": device_id,
            "registered": i < registered,
            "technology_ids": [technologies[i % len(technologies)]],
            "logging_enabled": i < logging_devices,
            "updatable": i >= legacy,
            "patched": i < patched,
            "location_access": locations,
        })

    users = []
    for i in range(cfg["users"]):
        users.append({
            "user_id": f"{org}-u{i + 1:03d}",
            "privileged": i < cfg["priv" + suffix],
            "authenticated": i < cfg["auth" + suffix],
            "shared_account": i >= cfg["users"] - cfg["shared" + suffix],
        })

    logging_counts = dict(cfg["logging_counts" + suffix])
    logging_counts["devices_with_logging"] = logging_devices
    updates = dict(cfg["updates" + suffix])
    updates["total_systems"] = n_devices

    return {
        "org_id": f"{org}_{phase}",
        "assets": {"devices": devices, "technologies_in_use": technologies},
        "users": users,
        "network": cfg["network" + suffix],
        "logging": logging_counts,
        "updates": updates,
        "motivation": cfg["motivation" + suffix],
        "implemented_controls": [] if phase == "before" else cfg["controls_after"],
        "symmetry_tags": cfg["symmetry_tags"],
        "revenue": cfg["revenue"],
    }


# ---------------------------------------------------------------------------
# clustering fixtures
# ---------------------------------------------------------------------------

THEME_VOCAB = {
    "Exposure": ["exposure", "public", "port", "perimeter", "internet", "scan",
                 "visible", "surface", "privileged", "unregistered"],
    "Traceability": ["logging", "audit", "trace", "monitoring", "siem",
                     "unlogged", "trail", "visibility", "untracked", "logs"],
    "Motivation": ["ransom", "extortion", "market", "monetize", "profit",
                   "darkweb", "sale", "valuable", "lucrative", "payout"],
    "SystemsUpdate": ["patch", "unpatched", "update", "outdated", "legacy",
                      "firmware", "version", "eol", "upgrade", "patching"],
}

THEME_TECHNIQUES = {
    "Exposure": ["T0006", "T0001"],
    "Traceability": ["T0002", "T0010"],
    "Motivation": ["T0005", "T0008"],
    "SystemsUpdate": ["T0004", "T0009"],
}


def build_corpus(seed: int = 20240501) -> list[dict]:
    rng = random.Random(seed)
    corpus = []
    idx = 1
    for theme, vocab in THEME_VOCAB.items():
        for _ in range(10):
            words = [rng.choice(vocab) for _ in range(rng.randint(7, 10))]
            corpus.append({
                "incident_id": f"INC-{idx:03d}",
                "description": " ".join(words),
                "technique_refs": sorted(rng.sample(THEME_TECHNIQUES[theme], rng.randint(1, 2))),
                "severity": rng.choice(["Low", "Medium", "High"]),
                "attack_vector": theme.lower(),
                "affected_assets": [rng.choice(["server", "database", "endpoint", "storage"])],
                "timestamp": f"2024-03-{(idx % 28) + 1:02d}T12:00:00Z",
            })
            idx += 1
    return corpus


def build_planted_points(seed: int = 7) -> dict:
    """40 points around 4 well-separated centers; verified to recover k=4."""
    rng = random.Random(seed)
    centers = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)]
    points, labels = [], []
    for label, (cx, cy) in enumerate(centers):
        for _ in range(10):
            points.append([cx + rng.gauss(0, 0.5), cy + rng.gauss(0, 0.5)])
            labels.append(label)
    return {"seed": seed, "centers": centers, "points": points, "labels": labels}


def build_small_kmeans_instances(seed: int = 101) -> list[dict]:
    rng = random.Random(seed)
    instances = [{
        "name": "two_bars",
        "points": [[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]],
        "k": 2,
    }]
    for i in range(5):
        n = rng.randint(6, 10)
        k = rng.randint(1, 3)
        points = [[round(rng.uniform(0, 10), 3), round(rng.uniform(0, 10), 3)] for _ in range(n)]
        instances.append({"name": f"random_{i}", "points": points, "k": k})
    return instances


# ---------------------------------------------------------------------------
# parser fixtures
# ---------------------------------------------------------------------------

PORT_SCAN_XML = """<?xml version="1.0" encoding="UTF-8"?>
<nmaprun scanner="nmap" start="1715000000">
  <scaninfo type="syn" protocol="tcp"/>
  <host starttime="1715000001">
    <status state="up" reason="arp-response"/>
    <address addr="192.0.2.10" addrtype="ipv4"/>
    <hostnames><hostname name="web01.example.test" type="PTR"/></hostnames>
    <ports>
      <port protocol="tcp" portid="22"><state state="open" reason="syn-ack"/><service name="ssh"/></port>
      <port protocol="tcp" portid="80"><state state="open" reason="syn-ack"/><service name="http"/></port>
      <port protocol="tcp" portid="443"><state state="closed" reason="reset"/></port>
    </ports>
  </host>
  <host starttime="1715000002">
    <status state="up" reason="arp-response"/>
    <address addr="192.0.2.11" addrtype="ipv4"/>
    <ports>
      <port protocol="tcp" portid="3306"><state state="open" reason="syn-ack"/><service name="mysql"/></port>
    </ports>
  </host>
</nmaprun>
"""

ACCOUNTS_FILE = """# system accounts
root:0:wheel
alice:1001:staff
bob:1002:staff
carol:1003:wheel
daemon:2:system
"""


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)

    write_json(FIXTURES / "kb_sample.json", sample_kb())

    for org in ORG_SETTINGS:
        for phase in ("before", "after"):
            write_json(FIXTURES / f"{org}_{phase}.json", build_profile(org, phase))

    write_json(FIXTURES / "corpus_40.json", build_corpus())
    planted = build_planted_points()
    write_json(FIXTURES / "planted_points.json", planted)
    write_json(FIXTURES / "kmeans_small.json", build_small_kmeans_instances())

    (FIXTURES / "port_scan.xml").write_text(PORT_SCAN_XML, encoding="utf-8")
    (FIXTURES / "accounts.txt").write_text(ACCOUNTS_FILE, encoding="utf-8")

    write_json(FIXTURES / "params_example.json", {
        "cpt": {"alpha": 0.88, "beta": 0.88, "lambda": 2.25, "gamma": 0.61},
        "likelihood": {"exp_e": 1.0, "exp_m": 1.0, "exp_t": 1.0, "exp_u": 1.0, "floor_epsilon": 0.01},
    })

    # sanity: the planted points must actually produce the documented structure
    pts = np.array(planted["points"])
    chosen = select_k(pts, 2, 8, seed=0)
    model = kmeans_best(pts, 4, seed=0)
    print(f"planted fixture: select_k(2..8) -> {chosen}, k=4 inertia {model.inertia:.3f}")
    if chosen != 4:
        raise SystemExit("planted point fixture failed select_k sanity check")

    invalid = FIXTURES / "invalid"
    invalid.mkdir(exist_ok=True)
    manifest = {}

    def invalid_file(name: str, content: str, parser: str, error: str) -> None:
        (invalid / name).write_text(content, encoding="utf-8")
        manifest[name] = {"parser": parser, "error": error}

    invalid_file("profile_bad_json.json", '{"org_id": "x",', "profile", "DocumentSyntaxError")
    invalid_file("profile_negative_count.json",
                 json.dumps({"org_id": "x", "network": {"public_ips": -1}}), "profile", "RangeError")
    invalid_file("profile_fraction_range.json",
                 json.dumps({"org_id": "x", "motivation": {"restorable_fraction": 1.5}}), "profile", "RangeError")
    invalid_file("profile_unknown_field.json",
                 json.dumps({"org_id": "x", "surprise": 1}), "profile", "SchemaError")
    invalid_file("profile_dup_device.json",
                 json.dumps({"org_id": "x", "assets": {"devices": [
                     {"device_id": "d1"}, {"device_id": "d1"}]}}), "profile", "SchemaError")
    invalid_file("profile_missing_org.json", json.dumps({"users": []}), "profile", "SchemaError")
    invalid_file("kb_bad_json.json", '{"version": 1', "kb", "DocumentSyntaxError")
    invalid_file("kb_unknown_kind.json",
                 json.dumps({"version": 1, "nodes": [{"id": "X1", "kind": "Widget", "name": "x"}], "edges": []}),
                 "kb", "SchemaError")
    invalid_file("kb_dangling_edge.json",
                 json.dumps({"version": 1,
                             "nodes": [{"id": "C1", "kind": "Countermeasure", "name": "c"}],
                             "edges": [{"src": "C1", "dst": "T9999", "kind": "Mitigates"}]}),
                 "kb", "IntegrityError")
    invalid_file("kb_duplicate_id.json",
                 json.dumps({"version": 1,
                             "nodes": [{"id": "C1", "kind": "Countermeasure", "name": "a"},
                                       {"id": "C1", "kind": "Countermeasure", "name": "b"}],
                             "edges": []}),
                 "kb", "IntegrityError")
    invalid_file("kb_duplicate_edge.json",
                 json.dumps({"version": 1,
                             "nodes": [{"id": "C1", "kind": "Countermeasure", "name": "c"},
                                       {"id": "T1", "kind": "Technique", "name": "t"}],
                             "edges": [{"src": "C1", "dst": "T1", "kind": "Mitigates"},
                                       {"src": "C1", "dst": "T1", "kind": "Mitigates"}]}),
                 "kb", "IntegrityError")
    invalid_file("kb_bad_signature.json",
                 json.dumps({"version": 1,
                             "nodes": [{"id": "T1", "kind": "Technique", "name": "a"},
                                       {"id": "T2", "kind": "Technique", "name": "b"}],
                             "edges": [{"src": "T1", "dst": "T2", "kind": "Mitigates"}]}),
                 "kb", "SchemaError")
    invalid_file("kb_severity_on_cm.json",
                 json.dumps({"version": 1,
                             "nodes": [{"id": "C1", "kind": "Countermeasure", "name": "c", "severity": "High"}],
                             "edges": []}),
                 "kb", "SchemaError")
    invalid_file("scan_malformed.xml", "<nmaprun><host></nmaprun>", "port_scan", "DocumentSyntaxError")
    invalid_file("scan_missing_state.xml",
                 '<nmaprun><host><address addr="192.0.2.9"/><ports><port protocol="tcp" portid="80"/></ports></host></nmaprun>',
                 "port_scan", "SchemaError")
    invalid_file("scan_missing_address.xml",
                 '<nmaprun><host><ports><port protocol="tcp" portid="80"><state state="open"/></port></ports></host></nmaprun>',
                 "port_scan", "SchemaError")
    invalid_file("accounts_short_line.txt", "bad-line\n", "accounts", "DocumentSyntaxError")
    invalid_file("corpus_dup_id.json",
                 json.dumps([{"incident_id": "I1", "description": "a"},
                             {"incident_id": "I1", "description": "b"}]),
                 "corpus", "SchemaError")
    write_json(invalid / "manifest.json", manifest)

    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
