"""Network model: devices, links, hosts, regions and the prefix-to-region map.

A :class:`Topology` is immutable once built. It is created either from the
JSON topology file format (:func:`parse_topology`) or by one of the fixture
generators (:func:`gen_linear`, :func:`gen_three_region`).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from ipaddress import IPv4Address, IPv4Network
from typing import Iterable, Optional

DeviceId = str
Port = tuple[DeviceId, int]

#: Router MAC a host uses as destination when talking to another region.
DEFAULT_GATEWAY_MAC = "02:00:00:00:00:fe"

_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")
_MAC_RE = re.compile(r"^[0-9a-f]{2}(:[0-9a-f]{2}){5}$")


class TopologyError(ValueError):
    pass


class TopologySyntaxError(TopologyError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {msg}")
        self.line = line
        self.column = column


class TopologySemanticError(TopologyError):
    """Raised for a well-formed file describing an invalid network.

    ``entity`` names the offending device, link, host or region.
    """

    def __init__(self, msg: str, entity: str):
        super().__init__(f"{entity}: {msg}")
        self.entity = entity


def normalize_mac(mac: str) -> str:
    m = mac.strip().lower().replace("-", ":")
    if not _MAC_RE.match(m):
        raise ValueError(f"bad MAC address {mac!r}")
    return m


@dataclass(frozen=True)
class Device:
    id: DeviceId
    port_count: int
    region: Optional[str] = None


@dataclass(frozen=True)
class Link:
    a: Port
    b: Port


@dataclass(frozen=True)
class Host:
    name: str
    mac: str
    ip: IPv4Address
    attach: Port


@dataclass(frozen=True)
class Region:
    name: str
    prefixes: tuple[IPv4Network, ...]
    devices: frozenset[DeviceId]


@dataclass(frozen=True, eq=False)
class Topology:
    devices: dict[DeviceId, Device]
    links: tuple[Link, ...]
    hosts: dict[str, Host]
    regions: dict[str, Region]
    gateway_mac: str = DEFAULT_GATEWAY_MAC
    # port -> what sits on the other side: another device port, or a host name
    _wiring: dict[Port, object] = field(init=False, repr=False)
    _adjacency: dict[DeviceId, tuple] = field(init=False, repr=False)

    def __post_init__(self):
        _validate(self)
        wiring: dict[Port, object] = {}
        for link in self.links:
            wiring[link.a] = link.b
            wiring[link.b] = link.a
        for host in self.hosts.values():
            wiring[host.attach] = host.name
        object.__setattr__(self, "_wiring", wiring)
        adjacency = {
            d: tuple((port, *wiring[(d, port)]) for port in range(1, dev.port_count + 1)
                     if isinstance(wiring.get((d, port)), tuple))
            for d, dev in self.devices.items()
        }
        object.__setattr__(self, "_adjacency", adjacency)

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return format_topology(self) == format_topology(other)

    def __hash__(self):
        return hash(format_topology(self))

    def peer(self, device: DeviceId, port: int) -> Optional[Port]:
        """Device port on the far side of a link, or None."""
        p = self._wiring.get((device, port))
        return p if isinstance(p, tuple) else None

    def host_at(self, device: DeviceId, port: int) -> Optional[Host]:
        p = self._wiring.get((device, port))
        return self.hosts[p] if isinstance(p, str) else None

    def neighbors(self, device: DeviceId) -> tuple[tuple[int, DeviceId, int], ...]:
        """``(local_port, peer_device, peer_port)`` triples in local port order."""
        return self._adjacency[device]

    def host_by_ip(self, ip) -> Optional[Host]:
        ip = IPv4Address(ip)
        for host in self.hosts.values():
            if host.ip == ip:
                return host
        return None

    def region_of_ip(self, ip) -> Optional[str]:
        return region_of_ip(self, ip)


def region_of_ip(t: Topology, ip) -> Optional[str]:
    """Name of the region whose prefix contains ``ip``, or None."""
    ip = IPv4Address(ip)
    found = [r.name for r in t.regions.values() if any(ip in p for p in r.prefixes)]
    assert len(found) <= 1, f"{ip} in several regions: {found}"
    return found[0] if found else None


def _validate(t: Topology) -> None:
    for dev_id, dev in t.devices.items():
        if dev_id != dev.id:
            raise TopologySemanticError("key does not match device id", dev_id)
        if not _ID_RE.match(dev.id):
            raise TopologySemanticError("device id must be alphanumeric", repr(dev.id))
        if dev.port_count < 1:
            raise TopologySemanticError("port count must be positive", dev.id)

    used: dict[Port, str] = {}

    def claim(port: Port, owner: str):
        dev, num = port
        if dev not in t.devices:
            raise TopologySemanticError(f"{owner} references unknown device", dev)
        if not 1 <= num <= t.devices[dev].port_count:
            raise TopologySemanticError(f"port {num} out of range for {owner}", dev)
        if port in used:
            raise TopologySemanticError(
                f"port already used by {used[port]}", f"{dev}:{num}")
        used[port] = owner

    for link in t.links:
        name = f"link {_port_str(link.a)}-{_port_str(link.b)}"
        if link.a == link.b:
            raise TopologySemanticError("link endpoints are identical", name)
        claim(link.a, name)
        claim(link.b, name)

    seen_mac: dict[str, str] = {}
    seen_ip: dict[IPv4Address, str] = {}
    for name, host in t.hosts.items():
        if name != host.name:
            raise TopologySemanticError("key does not match host name", name)
        if host.mac in seen_mac:
            raise TopologySemanticError(f"MAC {host.mac} already used by {seen_mac[host.mac]}", name)
        if host.ip in seen_ip:
            raise TopologySemanticError(f"IP {host.ip} already used by {seen_ip[host.ip]}", name)
        seen_mac[host.mac] = name
        seen_ip[host.ip] = name
        claim(host.attach, f"host {name}")

    owner: dict[DeviceId, str] = {}
    nets: list[tuple[IPv4Network, str]] = []
    for name, region in t.regions.items():
        if name != region.name:
            raise TopologySemanticError("key does not match region name", name)
        for dev in region.devices:
            if dev not in t.devices:
                raise TopologySemanticError(f"region {name} lists unknown device", dev)
            if dev in owner:
                raise TopologySemanticError(
                    f"device in both regions {owner[dev]} and {name}", dev)
            owner[dev] = name
        for net in region.prefixes:
            for other, other_region in nets:
                if other_region != name and net.overlaps(other):
                    raise TopologySemanticError(
                        f"prefix {net} overlaps {other} of region {other_region}",
                        f"region {name}")
            nets.append((net, name))
    for dev in t.devices.values():
        if owner.get(dev.id) != dev.region:
            raise TopologySemanticError(
                f"device region {dev.region!r} disagrees with region lists "
                f"({owner.get(dev.id)!r})", dev.id)

    for name, host in t.hosts.items():
        if region_of_ip(t, host.ip) is None:
            raise TopologySemanticError(f"IP {host.ip} is outside every region prefix", name)


def connected(t: Topology, a: DeviceId, b: DeviceId) -> bool:
    seen = {a}
    stack = [a]
    while stack:
        d = stack.pop()
        if d == b:
            return True
        for _, peer, _ in t.neighbors(d):
            if peer not in seen:
                seen.add(peer)
                stack.append(peer)
    return False


# -- file format ------------------------------------------------------------

def _port_str(p: Port) -> str:
    return f"{p[0]}:{p[1]}"


def _parse_port(s, entity: str) -> Port:
    if not isinstance(s, str) or s.count(":") != 1:
        raise TopologySemanticError(f"expected 'dev:port', got {s!r}", entity)
    dev, num = s.split(":")
    try:
        return dev, int(num)
    except ValueError:
        raise TopologySemanticError(f"bad port number in {s!r}", entity) from None


def _require(obj, key, entity, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise TopologySemanticError(f"missing key {key!r}", entity)
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise TopologySemanticError(f"key {key!r} has wrong type", entity)
    return value


def _unique(items: Iterable, key, kind: str) -> dict:
    out = {}
    for item in items:
        k = key(item)
        if k in out:
            raise TopologySemanticError(f"duplicate {kind}", k)
        out[k] = item
    return out


def parse_topology(text: str) -> Topology:
    """Build a validated :class:`Topology` from topology-file JSON."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise TopologySyntaxError(e.msg, e.lineno, e.colno) from None
    if not isinstance(doc, dict):
        raise TopologySyntaxError("top level must be an object", 1, 1)
    unknown = set(doc) - {"devices", "links", "hosts", "regions", "gateway_mac"}
    if unknown:
        raise TopologySemanticError("unknown top-level keys", ", ".join(sorted(unknown)))

    devices = []
    for i, d in enumerate(doc.get("devices", [])):
        dev_id = _require(d, "id", f"devices[{i}]", str)
        ports = _require(d, "ports", dev_id, int)
        region = d.get("region")
        if region is not None and not isinstance(region, str):
            raise TopologySemanticError("region must be a string", dev_id)
        devices.append(Device(dev_id, ports, region))

    links = []
    for i, l in enumerate(doc.get("links", [])):
        entity = f"links[{i}]"
        links.append(Link(_parse_port(_require(l, "a", entity), entity),
                          _parse_port(_require(l, "b", entity), entity)))

    hosts = []
    for i, h in enumerate(doc.get("hosts", [])):
        name = _require(h, "name", f"hosts[{i}]", str)
        try:
            mac = normalize_mac(_require(h, "mac", name, str))
            ip = IPv4Address(_require(h, "ip", name, str))
        except ValueError as e:
            raise TopologySemanticError(str(e), name) from None
        hosts.append(Host(name, mac, ip, _parse_port(_require(h, "attach", name), name)))

    regions = []
    for i, r in enumerate(doc.get("regions", [])):
        name = _require(r, "name", f"regions[{i}]", str)
        try:
            prefixes = tuple(IPv4Network(p) for p in _require(r, "prefixes", name, list))
        except ValueError as e:
            raise TopologySemanticError(str(e), f"region {name}") from None
        devs = _require(r, "devices", name, list)
        if len(set(devs)) != len(devs):
            raise TopologySemanticError("duplicate device in region", f"region {name}")
        regions.append(Region(name, prefixes, frozenset(devs)))

    gateway = doc.get("gateway_mac", DEFAULT_GATEWAY_MAC)
    try:
        gateway = normalize_mac(gateway)
    except (ValueError, AttributeError):
        raise TopologySemanticError(f"bad MAC {gateway!r}", "gateway_mac") from None

    return Topology(
        devices=_unique(devices, lambda d: d.id, "device id"),
        links=tuple(links),
        hosts=_unique(hosts, lambda h: h.name, "host name"),
        regions=_unique(regions, lambda r: r.name, "region name"),
        gateway_mac=gateway,
    )


def _canonical_link(link: Link) -> tuple[str, str]:
    a, b = _port_str(link.a), _port_str(link.b)
    return (a, b) if a <= b else (b, a)


def topology_to_dict(t: Topology) -> dict:
    devices = []
    for dev in sorted(t.devices.values(), key=lambda d: d.id):
        entry = {"id": dev.id, "ports": dev.port_count}
        if dev.region is not None:
            entry["region"] = dev.region
        devices.append(entry)
    return {
        "devices": devices,
        "links": [{"a": a, "b": b} for a, b in sorted(_canonical_link(l) for l in t.links)],
        "hosts": [
            {"name": h.name, "mac": h.mac, "ip": str(h.ip), "attach": _port_str(h.attach)}
            for h in sorted(t.hosts.values(), key=lambda h: h.name)
        ],
        "regions": [
            {"name": r.name,
             "prefixes": sorted(str(p) for p in r.prefixes),
             "devices": sorted(r.devices)}
            for r in sorted(t.regions.values(), key=lambda r: r.name)
        ],
        "gateway_mac": t.gateway_mac,
    }


def format_topology(t: Topology) -> str:
    """Canonical JSON text: every list sorted, keys sorted."""
    return json.dumps(topology_to_dict(t), indent=2, sort_keys=True) + "\n"


# -- fixtures ---------------------------------------------------------------

def _mac(i: int) -> str:
    return "00:00:00:00:00:" + format(i, "02x")


def gen_linear(n: int) -> Topology:
    """Switches s1..sn in a line, h1 on s1 port 1 and h2 on sn port 2.

    Switch si reaches s(i+1) through its port 2 (arriving on port 1), so every
    switch has exactly two ports.
    """
    if n < 1:
        raise ValueError("a linear topology needs at least one switch")
    ids = [f"s{i}" for i in range(1, n + 1)]
    devices = {d: Device(d, 2, "R") for d in ids}
    links = tuple(Link((ids[i], 2), (ids[i + 1], 1)) for i in range(n - 1))
    hosts = {
        "h1": Host("h1", _mac(1), IPv4Address("10.0.0.1"), (ids[0], 1)),
        "h2": Host("h2", _mac(2), IPv4Address("10.0.0.2"), (ids[-1], 2)),
    }
    regions = {"R": Region("R", (IPv4Network("10.0.0.0/24"),), frozenset(ids))}
    return Topology(devices, links, hosts, regions)


# device -> (port count, region)
_THREE_REGION_DEVICES = {
    "a1": (2, "A"), "a2": (4, "A"),
    "b1": (3, "B"), "b2": (3, "B"),
    "c1": (4, "C"), "c2": (2, "C"),
}
_THREE_REGION_LINKS = [
    (("a1", 2), ("a2", 2)),
    (("b1", 2), ("b2", 2)),
    (("c1", 2), ("c2", 2)),
    (("a2", 3), ("b1", 3)),
    (("b2", 3), ("c1", 3)),
    (("a2", 4), ("c1", 4)),
]
_THREE_REGION_HOSTS = [
    ("hA1", "10.0.1.1", "a1"), ("hA2", "10.0.1.2", "a2"),
    ("hB1", "10.0.2.1", "b1"), ("hB2", "10.0.2.2", "b2"),
    ("hC1", "10.0.3.1", "c1"), ("hC2", "10.0.3.2", "c2"),
]


def gen_three_region() -> Topology:
    """Three regions A, B, C with two switches and two hosts each.

    Hosts sit on port 1 of their switch; A, B and C are meshed through a2-b1,
    b2-c1 and a2-c1.
    """
    devices = {d: Device(d, ports, region)
               for d, (ports, region) in _THREE_REGION_DEVICES.items()}
    links = tuple(Link(a, b) for a, b in _THREE_REGION_LINKS)
    hosts = {
        name: Host(name, _mac(i), IPv4Address(ip), (dev, 1))
        for i, (name, ip, dev) in enumerate(_THREE_REGION_HOSTS, start=1)
    }
    regions = {
        name: Region(name, (IPv4Network(f"10.0.{i}.0/24"),),
                     frozenset(d for d, (_, r) in _THREE_REGION_DEVICES.items() if r == name))
        for i, name in enumerate("ABC", start=1)
    }
    return Topology(devices, links, hosts, regions)
