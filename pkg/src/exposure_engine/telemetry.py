"""Parse organizational telemetry into a unified profile.

Three input formats are handled here:

* Profile document — UTF-8 JSON mirroring the profile sections 1:1
  (``org_id``, ``assets.devices[]``, ``users[]``, ``network``, ``logging``,
  ``updates``, ``motivation``, ``implemented_controls``, ``symmetry_tags``,
  ``revenue``). Absent sections default to empty inventories / zero counts /
  0.5 motivation midpoints, and the profile records which sections were
  actually provided so the scoring layer can treat missing evidence as
  neutral rather than safe.
* Port-scan XML subset — ``nmaprun > host > address + ports > port > state``.
  Unrecognized elements are ignored so real scanner output parses.
* Account file — ``name:uid:group[:...]`` lines, ``#`` comments allowed.

Parsers are pure functions over bytes; profiles are immutable once built.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ElementTree
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable

from .errors import ConflictError, DocumentSyntaxError, RangeError, SchemaError


class LocationAccess(str, Enum):
    Physical = "Physical"
    OnPremises = "OnPremises"
    Vpn = "Vpn"
    Internet = "Internet"
    Cloud = "Cloud"


class SymmetryTag(str, Enum):
    TimeAsymmetric = "TimeAsymmetric"
    GainAsymmetric = "GainAsymmetric"
    LikelihoodAsymmetric = "LikelihoodAsymmetric"


PROFILE_SECTIONS = frozenset({"assets", "users", "network", "logging", "updates", "motivation"})


@dataclass(frozen=True)
class Device:
    device_id: str
    registered: bool = False
    technology_ids: frozenset[str] = frozenset()
    logging_enabled: bool = False
    updatable: bool = True
    patched: bool = False
    location_access: frozenset[LocationAccess] = frozenset()


@dataclass(frozen=True)
class AssetInventory:
    devices: tuple[Device, ...] = ()
    technologies_in_use: frozenset[str] = frozenset()

    def __post_init__(self):
        ordered = tuple(sorted(self.devices, key=lambda d: d.device_id))
        object.__setattr__(self, "devices", ordered)
        ids = [d.device_id for d in ordered]
        if len(ids) != len(set(ids)):
            raise SchemaError("duplicate device_id in asset inventory")
        used = frozenset().union(*(d.technology_ids for d in ordered)) if ordered else frozenset()
        if not self.technologies_in_use >= used:
            raise SchemaError("technologies_in_use must cover every device technology")


@dataclass(frozen=True)
class UserRecord:
    user_id: str
    privileged: bool = False
    authenticated: bool = False
    shared_account: bool = False


@dataclass(frozen=True)
class UserInventory:
    users: tuple[UserRecord, ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted(self.users, key=lambda u: u.user_id))
        object.__setattr__(self, "users", ordered)
        ids = [u.user_id for u in ordered]
        if len(ids) != len(set(ids)):
            raise SchemaError("duplicate user_id in user inventory")


@dataclass(frozen=True)
class NetworkSurface:
    public_ips: int = 0
    necessary_public_ips: int = 0
    visible_ports: int = 0
    necessary_visible_ports: int = 0

    def __post_init__(self):
        for name in ("public_ips", "necessary_public_ips", "visible_ports", "necessary_visible_ports"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise RangeError(f"network.{name} must be a non-negative integer")


@dataclass(frozen=True)
class LoggingPosture:
    expected_authentications: int = 0
    observed_authentications: int = 0
    expected_transactions: int = 0
    observed_transactions: int = 0
    devices_with_logging: int = 0
    role_authorized_actions: int = 0
    total_actions_observed: int = 0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not isinstance(value, int) or value < 0:
                raise RangeError(f"logging.{name} must be a non-negative integer")


@dataclass(frozen=True)
class UpdatePosture:
    total_systems: int = 0
    patched_systems: int = 0
    legacy_unupdatable: int = 0
    update_delay_days: float = 0.0
    critical_patch_days: float = 0.0
    policy_version_lag: int = 0

    def __post_init__(self):
        for name in ("total_systems", "patched_systems", "legacy_unupdatable", "policy_version_lag"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise RangeError(f"updates.{name} must be a non-negative integer")
        for name in ("update_delay_days", "critical_patch_days"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or value < 0:
                raise RangeError(f"updates.{name} must be a non-negative number")
        if self.patched_systems + self.legacy_unupdatable > self.total_systems:
            raise RangeError("updates: patched_systems + legacy_unupdatable exceeds total_systems")


@dataclass(frozen=True)
class MotivationInputs:
    asset_value_class: float = 0.5
    restorable_fraction: float = 0.5
    public_harm_fraction: float = 0.5
    residual_vuln_fraction: float = 0.5
    control_maturity: float = 0.5

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                raise RangeError(f"motivation.{name} must lie in [0, 1]")


@dataclass(frozen=True)
class OrgProfile:
    org_id: str
    assets: AssetInventory = AssetInventory()
    users: UserInventory = UserInventory()
    network: NetworkSurface = NetworkSurface()
    logging: LoggingPosture = LoggingPosture()
    updates: UpdatePosture = UpdatePosture()
    motivation: MotivationInputs = MotivationInputs()
    implemented_controls: frozenset[str] = frozenset()
    symmetry_tags: frozenset[SymmetryTag] = frozenset()
    revenue: float | None = None
    provided_sections: frozenset[str] = PROFILE_SECTIONS

    def __post_init__(self):
        if not self.org_id:
            raise SchemaError("org_id must be non-empty")
        if self.revenue is not None and self.revenue < 0:
            raise RangeError("revenue must be non-negative")
        if not self.provided_sections <= PROFILE_SECTIONS:
            raise SchemaError(f"unknown profile sections {sorted(self.provided_sections - PROFILE_SECTIONS)}")

    def has_section(self, name: str) -> bool:
        return name in self.provided_sections


@dataclass(frozen=True)
class ProfileFragment:
    """Partial profile produced by a connector or side-channel parser.

    ``devices``/``users`` extend the base inventories (count-additive);
    section fields replace the corresponding base section wholesale;
    ``implemented_controls`` unions into the base set.
    """

    devices: tuple[Device, ...] | None = None
    users: tuple[UserRecord, ...] | None = None
    network: NetworkSurface | None = None
    logging: LoggingPosture | None = None
    updates: UpdatePosture | None = None
    motivation: MotivationInputs | None = None
    implemented_controls: frozenset[str] | None = None


@dataclass(frozen=True)
class PortScanResult:
    """Observations from one scan: open ports per scanned address."""

    hosts: tuple[tuple[str, tuple[int, ...]], ...]
    visible_ports: int
    total_ports: int

    def as_network(self, necessary_public_ips: int = 0, necessary_visible_ports: int = 0) -> NetworkSurface:
        """Network surface with scan counts plus operator-declared necessities."""
        return NetworkSurface(
            public_ips=len(self.hosts),
            necessary_public_ips=necessary_public_ips,
            visible_ports=self.visible_ports,
            necessary_visible_ports=necessary_visible_ports,
        )


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise SchemaError(message)


def _as_bool(obj: dict, key: str, locus: str, default: bool = False) -> bool:
    value = obj.get(key, default)
    _require(isinstance(value, bool), f"{locus}.{key} must be a boolean")
    return value


def _parse_device(obj: object, index: int) -> Device:
    _require(isinstance(obj, dict), f"assets.devices[{index}] must be an object")
    assert isinstance(obj, dict)
    unknown = set(obj) - {"device_id", "registered", "technology_ids", "logging_enabled",
                          "updatable", "patched", "location_access"}
    _require(not unknown, f"assets.devices[{index}]: unknown fields {sorted(unknown)}")
    device_id = obj.get("device_id")
    _require(isinstance(device_id, str) and bool(device_id), f"assets.devices[{index}]: missing device_id")
    locus = f"device {device_id!r}"
    tech = obj.get("technology_ids", [])
    _require(isinstance(tech, list) and all(isinstance(t, str) for t in tech),
             f"{locus}: technology_ids must be a list of strings")
    locations_raw = obj.get("location_access", [])
    _require(isinstance(locations_raw, list), f"{locus}: location_access must be a list")
    locations = set()
    for loc in locations_raw:
        try:
            locations.add(LocationAccess(loc))
        except ValueError:
            raise SchemaError(f"{locus}: unknown location {loc!r}") from None
    return Device(
        device_id=device_id,
        registered=_as_bool(obj, "registered", locus),
        technology_ids=frozenset(tech),
        logging_enabled=_as_bool(obj, "logging_enabled", locus),
        updatable=_as_bool(obj, "updatable", locus, default=True),
        patched=_as_bool(obj, "patched", locus),
        location_access=frozenset(locations),
    )


def _parse_assets(obj: object) -> AssetInventory:
    _require(isinstance(obj, dict), "assets must be an object")
    assert isinstance(obj, dict)
    unknown = set(obj) - {"devices", "technologies_in_use"}
    _require(not unknown, f"assets: unknown fields {sorted(unknown)}")
    devices_raw = obj.get("devices", [])
    _require(isinstance(devices_raw, list), "assets.devices must be an array")
    devices = tuple(_parse_device(d, i) for i, d in enumerate(devices_raw))
    used = frozenset().union(*(d.technology_ids for d in devices)) if devices else frozenset()
    tech_raw = obj.get("technologies_in_use")
    if tech_raw is None:
        technologies = used
    else:
        _require(isinstance(tech_raw, list) and all(isinstance(t, str) for t in tech_raw),
                 "assets.technologies_in_use must be a list of strings")
        technologies = frozenset(tech_raw)
    return AssetInventory(devices=devices, technologies_in_use=technologies)


def _parse_users(obj: object) -> UserInventory:
    _require(isinstance(obj, list), "users must be an array")
    assert isinstance(obj, list)
    records = []
    for i, u in enumerate(obj):
        _require(isinstance(u, dict), f"users[{i}] must be an object")
        unknown = set(u) - {"user_id", "privileged", "authenticated", "shared_account"}
        _require(not unknown, f"users[{i}]: unknown fields {sorted(unknown)}")
        user_id = u.get("user_id")
        _require(isinstance(user_id, str) and bool(user_id), f"users[{i}]: missing user_id")
        locus = f"user {user_id!r}"
        records.append(UserRecord(
            user_id=user_id,
            privileged=_as_bool(u, "privileged", locus),
            authenticated=_as_bool(u, "authenticated", locus),
            shared_account=_as_bool(u, "shared_account", locus),
        ))
    return UserInventory(users=tuple(records))


def _parse_counts(obj: object, section: str, fields: dict[str, type]) -> dict:
    _require(isinstance(obj, dict), f"{section} must be an object")
    assert isinstance(obj, dict)
    unknown = set(obj) - set(fields)
    _require(not unknown, f"{section}: unknown fields {sorted(unknown)}")
    out = {}
    for name, typ in fields.items():
        if name not in obj:
            continue
        value = obj[name]
        if typ is int:
            _require(isinstance(value, int) and not isinstance(value, bool), f"{section}.{name} must be an integer")
        else:
            _require(isinstance(value, (int, float)) and not isinstance(value, bool),
                     f"{section}.{name} must be a number")
            value = float(value)
        out[name] = value
    return out


def _parse_motivation(obj: object) -> MotivationInputs:
    fields_ = {name: float for name in (
        "asset_value_class", "restorable_fraction", "public_harm_fraction",
        "residual_vuln_fraction", "control_maturity",
    )}
    return MotivationInputs(**_parse_counts(obj, "motivation", fields_))


def parse_profile(data: bytes) -> OrgProfile:
    """Parse a profile document; absent sections default to neutral values."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise DocumentSyntaxError(f"profile document is not UTF-8: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError(f"malformed JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    _require(isinstance(doc, dict), "profile document must be a JSON object")
    known = {"org_id", "assets", "users", "network", "logging", "updates", "motivation",
             "implemented_controls", "symmetry_tags", "revenue"}
    unknown = set(doc) - known
    _require(not unknown, f"profile: unknown fields {sorted(unknown)}")
    org_id = doc.get("org_id")
    _require(isinstance(org_id, str) and bool(org_id), "profile: org_id must be a non-empty string")

    provided = frozenset(name for name in PROFILE_SECTIONS if name in doc)
    assets = _parse_assets(doc["assets"]) if "assets" in doc else AssetInventory()
    users = _parse_users(doc["users"]) if "users" in doc else UserInventory()
    network = NetworkSurface(**_parse_counts(doc.get("network", {}), "network", {
        "public_ips": int, "necessary_public_ips": int,
        "visible_ports": int, "necessary_visible_ports": int,
    }))
    logging = LoggingPosture(**_parse_counts(doc.get("logging", {}), "logging", {
        "expected_authentications": int, "observed_authentications": int,
        "expected_transactions": int, "observed_transactions": int,
        "devices_with_logging": int, "role_authorized_actions": int,
        "total_actions_observed": int,
    }))
    updates = UpdatePosture(**_parse_counts(doc.get("updates", {}), "updates", {
        "total_systems": int, "patched_systems": int, "legacy_unupdatable": int,
        "update_delay_days": float, "critical_patch_days": float, "policy_version_lag": int,
    }))
    motivation = _parse_motivation(doc.get("motivation", {}))

    controls_raw = doc.get("implemented_controls", [])
    _require(isinstance(controls_raw, list) and all(isinstance(c, str) for c in controls_raw),
             "implemented_controls must be a list of strings")
    tags_raw = doc.get("symmetry_tags", [])
    _require(isinstance(tags_raw, list), "symmetry_tags must be a list")
    tags = set()
    for tag in tags_raw:
        try:
            tags.add(SymmetryTag(tag))
        except ValueError:
            raise SchemaError(f"unknown symmetry tag {tag!r}") from None
    revenue = doc.get("revenue")
    if revenue is not None:
        _require(isinstance(revenue, (int, float)) and not isinstance(revenue, bool), "revenue must be a number")
        revenue = float(revenue)

    return OrgProfile(
        org_id=org_id,
        assets=assets,
        users=users,
        network=network,
        logging=logging,
        updates=updates,
        motivation=motivation,
        implemented_controls=frozenset(controls_raw),
        symmetry_tags=frozenset(tags),
        revenue=revenue,
        provided_sections=provided,
    )


def serialize_profile(profile: OrgProfile) -> bytes:
    """Canonical document; parse_profile(serialize_profile(p)) == p."""
    doc: dict[str, object] = {"org_id": profile.org_id}
    if profile.has_section("assets"):
        doc["assets"] = {
            "devices": [
                {
                    "device_id": d.device_id,
                    "registered": d.registered,
                    "technology_ids": sorted(d.technology_ids),
                    "logging_enabled": d.logging_enabled,
                    "updatable": d.updatable,
                    "patched": d.patched,
                    "location_access": sorted(loc.value for loc in d.location_access),
                }
                for d in profile.assets.devices
            ],
            "technologies_in_use": sorted(profile.assets.technologies_in_use),
        }
    if profile.has_section("users"):
        doc["users"] = [
            {
                "user_id": u.user_id,
                "privileged": u.privileged,
                "authenticated": u.authenticated,
                "shared_account": u.shared_account,
            }
            for u in profile.users.users
        ]
    if profile.has_section("network"):
        doc["network"] = dict(profile.network.__dict__)
    if profile.has_section("logging"):
        doc["logging"] = dict(profile.logging.__dict__)
    if profile.has_section("updates"):
        doc["updates"] = dict(profile.updates.__dict__)
    if profile.has_section("motivation"):
        doc["motivation"] = dict(profile.motivation.__dict__)
    if profile.implemented_controls:
        doc["implemented_controls"] = sorted(profile.implemented_controls)
    if profile.symmetry_tags:
        doc["symmetry_tags"] = sorted(t.value for t in profile.symmetry_tags)
    if profile.revenue is not None:
        doc["revenue"] = profile.revenue
    return json.dumps(doc, indent=2, sort_keys=True).encode("utf-8")


def parse_port_scan_xml(data: bytes) -> PortScanResult:
    """Parse the port-scan XML subset; counts ports whose state is ``open``.

    Only ``host``/``address``/``ports``/``port``/``state`` elements are
    interpreted; anything else in the file is ignored.
    """
    try:
        root = ElementTree.fromstring(data)
    except ElementTree.ParseError as exc:
        line, column = exc.position if exc.position else (None, None)
        raise DocumentSyntaxError(f"malformed XML: {exc.msg.split(':')[0]}", line=line, column=column) from exc

    hosts: dict[str, list[int]] = {}
    open_total = 0
    port_total = 0
    for host in root.iter("host"):
        address = host.find("address")
        if address is None or not address.get("addr"):
            raise SchemaError("host element without address")
        addr = address.get("addr", "")
        open_ports = hosts.setdefault(addr, [])
        for port in host.iter("port"):
            port_total += 1
            portid = port.get("portid")
            if portid is None or not portid.isdigit():
                raise SchemaError(f"host {addr}: port element without numeric portid")
            state = port.find("state")
            if state is None or state.get("state") is None:
                raise SchemaError(f"host {addr}: port {portid} has no state")
            if state.get("state") == "open":
                open_ports.append(int(portid))
                open_total += 1
    host_items = tuple(sorted((addr, tuple(sorted(ports))) for addr, ports in hosts.items()))
    return PortScanResult(hosts=host_items, visible_ports=open_total, total_ports=port_total)


def parse_account_file(data: bytes, privileged_markers: set[str] | frozenset[str]) -> UserInventory:
    """Parse ``name:uid:group[:...]`` account lines.

    A user is privileged when its group is one of ``privileged_markers`` or
    its uid is "0". Accounts present in the file count as authenticated;
    shared accounts cannot be derived from this format and default to False.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DocumentSyntaxError(f"account file is not UTF-8: {exc}") from exc
    records = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields_ = stripped.split(":")
        if len(fields_) < 3:
            raise DocumentSyntaxError("account line needs name:uid:group", line=lineno)
        name, uid, group = fields_[0], fields_[1], fields_[2]
        if not name:
            raise DocumentSyntaxError("account line with empty name", line=lineno)
        if name in seen:
            raise SchemaError(f"duplicate account {name!r} at line {lineno}")
        seen.add(name)
        records.append(UserRecord(
            user_id=name,
            privileged=group in privileged_markers or uid == "0",
            authenticated=True,
            shared_account=False,
        ))
    return UserInventory(users=tuple(records))


def merge_profile(base: OrgProfile, fragments: Iterable[ProfileFragment]) -> OrgProfile:
    """Merge fragments into a copy of ``base``.

    Device/user additions are count-additive; section fragments replace the
    base section. Duplicate device/user ids or two fragments replacing the
    same section raise ConflictError. Merging disjoint fragments is
    order-independent because inventories are stored in canonical id order.
    """
    fragments = list(fragments)
    devices = list(base.assets.devices)
    device_ids = {d.device_id for d in devices}
    users = list(base.users.users)
    user_ids = {u.user_id for u in users}
    replaced: set[str] = set()
    network, logging, updates, motivation = base.network, base.logging, base.updates, base.motivation
    controls = set(base.implemented_controls)
    provided = set(base.provided_sections)

    for fragment in fragments:
        if fragment.devices is not None:
            for device in fragment.devices:
                if device.device_id in device_ids:
                    raise ConflictError(f"duplicate device {device.device_id!r} across fragments")
                device_ids.add(device.device_id)
                devices.append(device)
            provided.add("assets")
        if fragment.users is not None:
            for user in fragment.users:
                if user.user_id in user_ids:
                    raise ConflictError(f"duplicate user {user.user_id!r} across fragments")
                user_ids.add(user.user_id)
                users.append(user)
            provided.add("users")
        for section in ("network", "logging", "updates", "motivation"):
            value = getattr(fragment, section)
            if value is None:
                continue
            if section in replaced:
                raise ConflictError(f"two fragments replace section {section!r}")
            replaced.add(section)
            provided.add(section)
            if section == "network":
                network = value
            elif section == "logging":
                logging = value
            elif section == "updates":
                updates = value
            else:
                motivation = value
        if fragment.implemented_controls is not None:
            controls.update(fragment.implemented_controls)

    technologies = base.assets.technologies_in_use
    for d in devices:
        technologies = technologies | d.technology_ids
    return replace(
        base,
        assets=AssetInventory(devices=tuple(devices), technologies_in_use=technologies),
        users=UserInventory(users=tuple(users)),
        network=network,
        logging=logging,
        updates=updates,
        motivation=motivation,
        implemented_controls=frozenset(controls),
        provided_sections=frozenset(provided),
    )


class FileReplayConnector:
    """Replays a recorded data-source response from disk.

    Stands in for the live intelligence APIs: each recorded file is a JSON
    fragment document with any subset of the profile sections, plus optional
    ``devices``/``users`` arrays.
    """

    def __init__(self, path):
        self._path = path

    def fetch(self) -> ProfileFragment:
        with open(self._path, "rb") as fh:
            return parse_fragment(fh.read())


def parse_fragment(data: bytes) -> ProfileFragment:
    """Parse a fragment document (subset of profile sections)."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        if isinstance(exc, json.JSONDecodeError):
            raise DocumentSyntaxError(f"malformed JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
        raise DocumentSyntaxError(f"fragment is not UTF-8: {exc}") from exc
    _require(isinstance(doc, dict), "fragment must be a JSON object")
    known = {"devices", "users", "network", "logging", "updates", "motivation", "implemented_controls"}
    unknown = set(doc) - known
    _require(not unknown, f"fragment: unknown fields {sorted(unknown)}")

    devices = None
    if "devices" in doc:
        _require(isinstance(doc["devices"], list), "fragment.devices must be an array")
        devices = tuple(_parse_device(d, i) for i, d in enumerate(doc["devices"]))
    users = None
    if "users" in doc:
        users = _parse_users(doc["users"]).users
    network = NetworkSurface(**_parse_counts(doc["network"], "network", {
        "public_ips": int, "necessary_public_ips": int,
        "visible_ports": int, "necessary_visible_ports": int,
    })) if "network" in doc else None
    logging = LoggingPosture(**_parse_counts(doc["logging"], "logging", {
        "expected_authentications": int, "observed_authentications": int,
        "expected_transactions": int, "observed_transactions": int,
        "devices_with_logging": int, "role_authorized_actions": int,
        "total_actions_observed": int,
    })) if "logging" in doc else None
    updates = UpdatePosture(**_parse_counts(doc["updates"], "updates", {
        "total_systems": int, "patched_systems": int, "legacy_unupdatable": int,
        "update_delay_days": float, "critical_patch_days": float, "policy_version_lag": int,
    })) if "updates" in doc else None
    motivation = _parse_motivation(doc["motivation"]) if "motivation" in doc else None
    controls = None
    if "implemented_controls" in doc:
        raw = doc["implemented_controls"]
        _require(isinstance(raw, list) and all(isinstance(c, str) for c in raw),
                 "fragment.implemented_controls must be a list of strings")
        controls = frozenset(raw)
    return ProfileFragment(
        devices=devices, users=users, network=network, logging=logging,
        updates=updates, motivation=motivation, implemented_controls=controls,
    )
