import json
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def kb_sample_bytes() -> bytes:
    return (FIXTURES / "kb_sample.json").read_bytes()


@pytest.fixture(scope="session")
def sample_graph(kb_sample_bytes):
    from exposure_engine.kb_graph import load_kb

    return load_kb(kb_sample_bytes)


@pytest.fixture(scope="session")
def org_profiles():
    from exposure_engine.telemetry import parse_profile

    profiles = {}
    for org in ("org_a", "org_b", "org_c"):
        for phase in ("before", "after"):
            name = f"{org}_{phase}"
            profiles[name] = parse_profile((FIXTURES / f"{name}.json").read_bytes())
    return profiles


@pytest.fixture(scope="session")
def registry():
    from exposure_engine.metrics import default_registry

    return default_registry()


@pytest.fixture(scope="session")
def planted_points():
    return json.loads((FIXTURES / "planted_points.json").read_text())


@pytest.fixture(scope="session")
def small_kmeans_instances():
    return json.loads((FIXTURES / "kmeans_small.json").read_text())


@pytest.fixture(scope="session")
def corpus_40():
    from exposure_engine.clustering import parse_corpus

    return parse_corpus((FIXTURES / "corpus_40.json").read_bytes())
