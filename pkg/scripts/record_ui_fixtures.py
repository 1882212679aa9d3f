#!/usr/bin/env python3
"""Record live API responses as fixtures for the frontend test suite.

Runs the real service in-process and captures the bodies the UI tests
replay, so every number the UI asserts against originated from the engine.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from fastapi.testclient import TestClient

from exposure_engine.kb_graph import load_kb
from exposure_engine.service import SessionState, create_app
from exposure_engine.telemetry import parse_profile

FIXTURES = ROOT / "tests" / "fixtures"
OUT = ROOT / "frontend" / "tests" / "fixtures"


def main() -> None:
    graph = load_kb((FIXTURES / "kb_sample.json").read_bytes())
    profile = parse_profile((FIXTURES / "org_a_before.json").read_bytes())
    client = TestClient(create_app(SessionState.from_objects(graph, [profile])))

    OUT.mkdir(parents=True, exist_ok=True)

    def record(name: str, response) -> None:
        assert response.status_code == 200, f"{name}: {response.status_code}"
        (OUT / name).write_text(json.dumps(response.json(), indent=2, sort_keys=True) + "\n")
        print(f"recorded {name}")

    record("scores.json", client.get("/api/v1/profiles/org_a_before/scores"))
    record("likelihood.json", client.get("/api/v1/profiles/org_a_before/likelihood"))
    record("recommendations.json", client.get("/api/v1/profiles/org_a_before/recommendations"))
    record("registry.json", client.get("/api/v1/metrics/registry"))
    record("whatif_empty.json", client.post("/api/v1/whatif", json={"profile_id": "org_a_before"}))

    top_control = client.get("/api/v1/profiles/org_a_before/recommendations").json()["recommendations"][0]["control"]
    record("whatif_toggle_top.json", client.post("/api/v1/whatif", json={
        "profile_id": "org_a_before",
        "toggle_controls": {top_control: True},
    }))
    record("whatif_override.json", client.post("/api/v1/whatif", json={
        "profile_id": "org_a_before",
        "metric_overrides": {"patched_ratio": 1.0},
    }))
    (OUT / "meta.json").write_text(json.dumps({"top_control": top_control}, indent=2) + "\n")


if __name__ == "__main__":
    main()
