"""Traffic selector builder: packet classification and match-field construction."""
from __future__ import annotations

import re
from dataclasses import dataclass, fields, replace
from ipaddress import IPv4Address
from typing import Iterator, Optional

from .topo import normalize_mac

ETH_IPV4 = 0x0800

TCP, UDP, ICMP = 6, 17, 1
PROTO_NAMES = {"tcp": TCP, "udp": UDP, "icmp": ICMP, "ip": None}
PROTO_LABELS = {TCP: "tcp", UDP: "udp", ICMP: "icmp", None: "ip"}

REALTIME, BESTEFFORT = "realtime", "besteffort"


class SelectorError(ValueError):
    pass


@dataclass(frozen=True)
class Packet:
    src_mac: str
    dst_mac: str
    src_ip: IPv4Address
    dst_ip: IPv4Address
    ip_proto: int
    l4_src: Optional[int] = None
    l4_dst: Optional[int] = None
    eth_type: int = ETH_IPV4

    def __post_init__(self):
        object.__setattr__(self, "src_mac", normalize_mac(self.src_mac))
        object.__setattr__(self, "dst_mac", normalize_mac(self.dst_mac))
        object.__setattr__(self, "src_ip", IPv4Address(self.src_ip))
        object.__setattr__(self, "dst_ip", IPv4Address(self.dst_ip))
        if self.eth_type != ETH_IPV4:
            raise SelectorError("only IPv4 packets are modelled")
        if self.ip_proto not in (TCP, UDP, ICMP):
            raise SelectorError(f"unsupported IP protocol {self.ip_proto}")
        has_ports = self.ip_proto in (TCP, UDP)
        for port in (self.l4_src, self.l4_dst):
            if (port is not None) != has_ports:
                raise SelectorError("L4 ports are required for TCP/UDP and forbidden otherwise")
            if port is not None and not 0 <= port <= 0xFFFF:
                raise SelectorError(f"L4 port {port} out of range")

    def reversed(self) -> Packet:
        """The reply packet: endpoints and ports swapped."""
        return replace(self, src_mac=self.dst_mac, dst_mac=self.src_mac,
                       src_ip=self.dst_ip, dst_ip=self.src_ip,
                       l4_src=self.l4_dst, l4_dst=self.l4_src)


@dataclass(frozen=True)
class MatchFields:
    """Exact-match header constraints; a field left as None is a wildcard."""

    eth_type: Optional[int] = ETH_IPV4
    ip_proto: Optional[int] = None
    src_ip: Optional[IPv4Address] = None
    dst_ip: Optional[IPv4Address] = None
    l4_src: Optional[int] = None
    l4_dst: Optional[int] = None

    def __post_init__(self):
        if self.eth_type is None:
            raise SelectorError("eth_type must be matched")
        for name in ("src_ip", "dst_ip"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, IPv4Address(v))
        if (self.l4_src is not None or self.l4_dst is not None) and self.ip_proto is None:
            raise SelectorError("L4 match requires ip_proto")

    def items(self) -> Iterator[tuple[str, object]]:
        """Present fields in alphabetical order."""
        for name in sorted(f.name for f in fields(self)):
            v = getattr(self, name)
            if v is not None:
                yield name, v

    def matches(self, pkt: Packet) -> bool:
        return all(getattr(pkt, name) == v for name, v in self.items())

    def __str__(self):
        def fmt(name, v):
            return f"0x{v:04x}" if name == "eth_type" else str(v)
        return "{" + ",".join(f"{n}={fmt(n, v)}" for n, v in self.items()) + "}"


@dataclass(frozen=True)
class TrafficProfile:
    name: str
    ip_proto: Optional[int] = None
    # inclusive (lo, hi) destination port ranges; None means ports unconstrained
    ports: Optional[tuple[tuple[int, int], ...]] = None
    traffic_type: str = BESTEFFORT

    def __post_init__(self):
        if self.ports is not None:
            if self.ip_proto not in (TCP, UDP):
                raise SelectorError(f"profile {self.name}: ports need tcp or udp")
            if not self.ports:
                raise SelectorError(f"profile {self.name}: empty port set")
            for lo, hi in self.ports:
                if not 0 <= lo <= hi <= 0xFFFF:
                    raise SelectorError(f"profile {self.name}: bad port range {lo}-{hi}")
        if self.traffic_type not in (REALTIME, BESTEFFORT):
            raise SelectorError(f"unknown traffic type {self.traffic_type!r}")

    @property
    def specificity(self) -> int:
        return (self.ip_proto is not None) + (self.ports is not None)

    def matches(self, pkt: Packet) -> bool:
        if self.ip_proto is not None and pkt.ip_proto != self.ip_proto:
            return False
        if self.ports is not None:
            return any(lo <= pkt.l4_dst <= hi for lo, hi in self.ports)
        return True


BUILTIN_PROFILES = (
    TrafficProfile("web", TCP, ((80, 80), (443, 443))),
    TrafficProfile("ping", ICMP),
    TrafficProfile("voip", UDP, ((5060, 5060), (16384, 32767)), REALTIME),
    TrafficProfile("video", UDP, ((5004, 5004),), REALTIME),
    TrafficProfile("any"),
)


class ProfileRegistry:
    """Named traffic profiles, seeded with the built-in set."""

    def __init__(self, builtins: bool = True):
        self._profiles: dict[str, TrafficProfile] = {}
        if builtins:
            for p in BUILTIN_PROFILES:
                self.register(p)

    def register(self, profile: TrafficProfile) -> None:
        if profile.name in self._profiles:
            raise SelectorError(f"profile {profile.name!r} already registered")
        self._profiles[profile.name] = profile

    def get(self, name: str) -> TrafficProfile:
        try:
            return self._profiles[name]
        except KeyError:
            raise SelectorError(f"unknown traffic profile {name!r}") from None

    def __contains__(self, name) -> bool:
        return name in self._profiles

    def __iter__(self):
        return iter(sorted(self._profiles.values(), key=lambda p: p.name))

    def classify(self, pkt: Packet) -> Optional[str]:
        """Most specific matching profile name; ties go to the alphabetically first."""
        best = None
        for p in self._profiles.values():
            if p.matches(pkt):
                key = (-p.specificity, p.name)
                if best is None or key < best[0]:
                    best = (key, p.name)
        return best[1] if best else None


def build_selectors(profile: TrafficProfile, pkt: Packet) -> tuple[MatchFields, MatchFields]:
    """Forward and reverse match fields for the host-pair flow of ``pkt``."""
    if not profile.matches(pkt):
        raise SelectorError(f"packet does not belong to profile {profile.name!r}")
    port = pkt.l4_dst if profile.ports is not None else None
    forward = MatchFields(ETH_IPV4, profile.ip_proto, pkt.src_ip, pkt.dst_ip, l4_dst=port)
    reverse = MatchFields(ETH_IPV4, profile.ip_proto, pkt.dst_ip, pkt.src_ip, l4_src=port)
    return forward, reverse


# -- profile definition lines -----------------------------------------------

_PORTS_RE = re.compile(r"^\d+(-\d+)?(,\d+(-\d+)?)*$")


def _parse_ports(text: str) -> tuple[tuple[int, int], ...]:
    if not _PORTS_RE.match(text):
        raise SelectorError(f"bad port list {text!r}")
    ranges = []
    for part in text.split(","):
        lo, _, hi = part.partition("-")
        ranges.append((int(lo), int(hi or lo)))
    return tuple(ranges)


def parse_profile(line: str) -> TrafficProfile:
    """Parse ``profile <name> proto <tcp|udp|icmp|ip> [ports <list|lo-hi>] [realtime]``."""
    toks = line.split()
    if len(toks) < 4 or toks[0].lower() != "profile" or toks[2].lower() != "proto":
        raise SelectorError("usage: profile <name> proto <tcp|udp|icmp|ip> "
                            "[ports <list|lo-hi>] [realtime]")
    name, proto = toks[1], toks[3].lower()
    if proto not in PROTO_NAMES:
        raise SelectorError(f"unknown protocol {toks[3]!r}")
    rest = [t.lower() for t in toks[4:]]
    ports = None
    if rest[:1] == ["ports"]:
        if len(rest) < 2:
            raise SelectorError("'ports' needs a value")
        ports = _parse_ports(rest[1])
        rest = rest[2:]
    traffic_type = BESTEFFORT
    if rest == ["realtime"]:
        traffic_type = REALTIME
    elif rest:
        raise SelectorError(f"unexpected tokens: {' '.join(rest)}")
    return TrafficProfile(name, PROTO_NAMES[proto], ports, traffic_type)


def format_profile(p: TrafficProfile) -> str:
    out = f"profile {p.name} proto {PROTO_LABELS[p.ip_proto]}"
    if p.ports is not None:
        out += " ports " + ",".join(str(lo) if lo == hi else f"{lo}-{hi}" for lo, hi in p.ports)
    if p.traffic_type == REALTIME:
        out += " realtime"
    return out
