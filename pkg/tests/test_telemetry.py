import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exposure_engine.errors import ConflictError, DocumentSyntaxError, RangeError, SchemaError
from exposure_engine.telemetry import (
    AssetInventory,
    Device,
    FileReplayConnector,
    LoggingPosture,
    MotivationInputs,
    NetworkSurface,
    OrgProfile,
    ProfileFragment,
    UpdatePosture,
    UserInventory,
    UserRecord,
    merge_profile,
    parse_account_file,
    parse_fragment,
    parse_port_scan_xml,
    parse_profile,
    serialize_profile,
)


class TestParseProfile:
    def test_minimal_document_defaults(self):
        profile = parse_profile(b'{"org_id": "acme"}')
        assert profile.org_id == "acme"
        assert profile.assets.devices == ()
        assert profile.users.users == ()
        assert profile.network == NetworkSurface()
        assert profile.motivation == MotivationInputs()  # all 0.5
        assert profile.implemented_controls == frozenset()
        assert profile.provided_sections == frozenset()

    def test_org_a_before_device_counts(self, org_profiles):
        profile = org_profiles["org_a_before"]
        devices = profile.assets.devices
        assert len(devices) == 275
        assert sum(1 for d in devices if not d.registered) == 86

    def test_fraction_out_of_range(self):
        doc = json.dumps({"org_id": "x", "motivation": {"restorable_fraction": 1.5}})
        with pytest.raises(RangeError):
            parse_profile(doc.encode())

    def test_negative_count(self):
        doc = json.dumps({"org_id": "x", "network": {"public_ips": -3}})
        with pytest.raises(RangeError):
            parse_profile(doc.encode())

    def test_unknown_field_rejected(self):
        with pytest.raises(SchemaError):
            parse_profile(b'{"org_id": "x", "bogus": 1}')

    def test_patched_plus_legacy_bounded_by_total(self):
        doc = json.dumps({"org_id": "x", "updates": {
            "total_systems": 10, "patched_systems": 8, "legacy_unupdatable": 5}})
        with pytest.raises(RangeError):
            parse_profile(doc.encode())

    def test_technologies_must_cover_device_techs(self):
        doc = json.dumps({"org_id": "x", "assets": {
            "devices": [{"device_id": "d1", "technology_ids": ["TECH01"]}],
            "technologies_in_use": []}})
        with pytest.raises(SchemaError):
            parse_profile(doc.encode())

    def test_technologies_default_to_union(self):
        doc = json.dumps({"org_id": "x", "assets": {
            "devices": [{"device_id": "d1", "technology_ids": ["TECH01", "TECH02"]}]}})
        profile = parse_profile(doc.encode())
        assert profile.assets.technologies_in_use == frozenset({"TECH01", "TECH02"})

    def test_round_trip_on_fixture(self, org_profiles):
        for profile in org_profiles.values():
            assert parse_profile(serialize_profile(profile)) == profile


class TestPortScan:
    def test_zero_hosts(self):
        result = parse_port_scan_xml(b"<nmaprun></nmaprun>")
        assert result.visible_ports == 0
        assert result.hosts == ()

    def test_fixture_counts_open_ports(self, fixtures_dir):
        result = parse_port_scan_xml((fixtures_dir / "port_scan.xml").read_bytes())
        # hand count: 22 + 80 open on .10, 3306 open on .11, 443 closed
        assert result.visible_ports == 3
        assert result.total_ports == 4
        assert dict(result.hosts) == {"192.0.2.10": (22, 80), "192.0.2.11": (3306,)}

    def test_port_without_state_rejected(self):
        doc = b'<nmaprun><host><address addr="a"/><ports><port protocol="tcp" portid="80"/></ports></host></nmaprun>'
        with pytest.raises(SchemaError, match="state"):
            parse_port_scan_xml(doc)

    def test_host_without_address_rejected(self):
        doc = b"<nmaprun><host><ports></ports></host></nmaprun>"
        with pytest.raises(SchemaError, match="address"):
            parse_port_scan_xml(doc)

    def test_malformed_xml(self):
        with pytest.raises(DocumentSyntaxError):
            parse_port_scan_xml(b"<nmaprun><host></nmaprun>")

    def test_unrecognized_elements_ignored(self):
        doc = (b'<nmaprun><weird/><host><address addr="a"/><os><osmatch name="x"/></os>'
               b'<ports><extraports state="closed" count="99"/>'
               b'<port protocol="tcp" portid="21"><state state="open"/></port></ports></host></nmaprun>')
        result = parse_port_scan_xml(doc)
        assert result.visible_ports == 1

    def test_as_network_fragment(self, fixtures_dir):
        result = parse_port_scan_xml((fixtures_dir / "port_scan.xml").read_bytes())
        surface = result.as_network(necessary_public_ips=2, necessary_visible_ports=2)
        assert surface.public_ips == 2
        assert surface.visible_ports == 3

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.lists(st.sampled_from(["open", "closed", "filtered"]), max_size=6), max_size=4))
    def test_open_count_never_exceeds_port_elements(self, states_per_host):
        hosts = []
        for i, states in enumerate(states_per_host):
            ports = "".join(
                f'<port protocol="tcp" portid="{j + 1}"><state state="{s}"/></port>'
                for j, s in enumerate(states)
            )
            hosts.append(f'<host><address addr="h{i}"/><ports>{ports}</ports></host>')
        doc = f"<nmaprun>{''.join(hosts)}</nmaprun>".encode()
        result = parse_port_scan_xml(doc)
        total = sum(len(states) for states in states_per_host)
        assert result.visible_ports <= total
        assert result.total_ports == total


class TestAccountFile:
    def test_basic_parse(self):
        inventory = parse_account_file(b"root:0:wheel\nalice:1001:staff", {"wheel"})
        assert len(inventory.users) == 2
        by_id = {u.user_id: u for u in inventory.users}
        assert by_id["root"].privileged
        assert not by_id["alice"].privileged

    def test_empty_file(self):
        assert parse_account_file(b"", set()).users == ()

    def test_bad_line_reports_line_number(self):
        with pytest.raises(DocumentSyntaxError) as exc_info:
            parse_account_file(b"bad-line", set())
        assert exc_info.value.line == 1

    def test_comments_and_blanks_skipped(self, fixtures_dir):
        inventory = parse_account_file((fixtures_dir / "accounts.txt").read_bytes(), {"wheel"})
        assert len(inventory.users) == 5
        privileged = {u.user_id for u in inventory.users if u.privileged}
        assert privileged == {"root", "carol"}

    def test_uid_zero_is_privileged_without_marker(self):
        inventory = parse_account_file(b"root:0:system", set())
        assert inventory.users[0].privileged


class TestMerge:
    def base(self) -> OrgProfile:
        return OrgProfile(
            org_id="acme",
            assets=AssetInventory(devices=(Device("d1"),)),
            users=UserInventory(users=(UserRecord("u1"),)),
        )

    def test_zero_fragments_identity(self):
        base = self.base()
        assert merge_profile(base, []) == base

    def test_network_fragment_replaces_section(self):
        base = self.base()
        surface = NetworkSurface(public_ips=4, necessary_public_ips=2)
        merged = merge_profile(base, [ProfileFragment(network=surface)])
        assert merged.network == surface
        assert merged.assets == base.assets

    def test_duplicate_device_conflicts(self):
        base = self.base()
        with pytest.raises(ConflictError, match="d1"):
            merge_profile(base, [ProfileFragment(devices=(Device("d1"),))])

    def test_two_fragments_same_section_conflict(self):
        base = self.base()
        fragments = [ProfileFragment(network=NetworkSurface()), ProfileFragment(network=NetworkSurface())]
        with pytest.raises(ConflictError, match="network"):
            merge_profile(base, fragments)

    def test_disjoint_merge_commutes(self):
        base = self.base()
        f1 = ProfileFragment(devices=(Device("d2", technology_ids=frozenset({"TECH09"})),))
        f2 = ProfileFragment(network=NetworkSurface(public_ips=1))
        f3 = ProfileFragment(updates=UpdatePosture(total_systems=5, patched_systems=3))
        import itertools

        results = {merge_profile(base, list(order)) for order in itertools.permutations([f1, f2, f3])}
        assert len(results) == 1
        merged = results.pop()
        assert "TECH09" in merged.assets.technologies_in_use

    def test_control_fragments_union(self):
        base = self.base()
        merged = merge_profile(base, [
            ProfileFragment(implemented_controls=frozenset({"C001"})),
            ProfileFragment(implemented_controls=frozenset({"C002"})),
        ])
        assert merged.implemented_controls == frozenset({"C001", "C002"})


class TestConnector:
    def test_file_replay_round_trip(self, tmp_path):
        payload = {"network": {"public_ips": 9, "necessary_public_ips": 3}}
        path = tmp_path / "connector.json"
        path.write_text(json.dumps(payload))
        fragment = FileReplayConnector(path).fetch()
        assert fragment.network == NetworkSurface(public_ips=9, necessary_public_ips=3)

    def test_fragment_unknown_section_rejected(self):
        with pytest.raises(SchemaError):
            parse_fragment(b'{"wat": 1}')


class TestInvalidCorpus:
    def test_every_invalid_fixture_rejected_with_documented_error(self, fixtures_dir):
        import exposure_engine.errors as errors
        from exposure_engine.clustering import parse_corpus
        from exposure_engine.kb_graph import load_kb

        parsers = {
            "profile": parse_profile,
            "kb": load_kb,
            "port_scan": parse_port_scan_xml,
            "accounts": lambda data: parse_account_file(data, {"wheel"}),
            "corpus": parse_corpus,
        }
        manifest = json.loads((fixtures_dir / "invalid" / "manifest.json").read_text())
        assert len(manifest) >= 15
        for name, spec in manifest.items():
            data = (fixtures_dir / "invalid" / name).read_bytes()
            expected = getattr(errors, spec["error"])
            with pytest.raises(expected):
                parsers[spec["parser"]](data)


# profile generation for the round-trip property
locations = st.sets(st.sampled_from(["Physical", "OnPremises", "Vpn", "Internet", "Cloud"]), max_size=3)


@st.composite
def profile_documents(draw):
    doc = {"org_id": draw(st.text(min_size=1, max_size=8, alphabet="abcxyz123"))}
    if draw(st.booleans()):
        n = draw(st.integers(0, 5))
        doc["assets"] = {"devices": [
            {
                "device_id": f"d{i}",
                "registered": draw(st.booleans()),
                "technology_ids": sorted(draw(st.sets(st.sampled_from(["TECH01", "TECH02"]), max_size=2))),
                "logging_enabled": draw(st.booleans()),
                "patched": draw(st.booleans()),
                "location_access": sorted(draw(locations)),
            }
            for i in range(n)
        ]}
    if draw(st.booleans()):
        doc["users"] = [
            {"user_id": f"u{i}", "privileged": draw(st.booleans()), "authenticated": draw(st.booleans())}
            for i in range(draw(st.integers(0, 4)))
        ]
    if draw(st.booleans()):
        doc["network"] = {"public_ips": draw(st.integers(0, 50)), "necessary_public_ips": draw(st.integers(0, 50))}
    if draw(st.booleans()):
        total = draw(st.integers(0, 50))
        patched = draw(st.integers(0, total)) if total else 0
        doc["updates"] = {"total_systems": total, "patched_systems": patched,
                          "update_delay_days": draw(st.floats(0, 500, allow_nan=False))}
    if draw(st.booleans()):
        doc["motivation"] = {"asset_value_class": draw(st.floats(0, 1, allow_nan=False))}
    if draw(st.booleans()):
        doc["revenue"] = draw(st.floats(0, 1e9, allow_nan=False))
    return json.dumps(doc).encode()


@settings(max_examples=80, deadline=None)
@given(profile_documents())
def test_parse_serialize_round_trip(document):
    profile = parse_profile(document)
    assert parse_profile(serialize_profile(profile)) == profile
