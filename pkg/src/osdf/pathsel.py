"""Path selection over a topology, with pluggable algorithms and waypoints.

Algorithms map ``(topology, src_dev, dst_dev)`` to a device sequence; the
registry wraps the sequence into a port-level :class:`Path`.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from .topo import DeviceId, Port, Topology

Algorithm = Callable[[Topology, DeviceId, DeviceId], list]


class PathError(Exception):
    pass


class NoPathError(PathError):
    pass


class UnknownAlgorithmError(PathError, KeyError):
    def __str__(self):
        return self.args[0]


@dataclass(frozen=True)
class Hop:
    device: DeviceId
    in_port: Optional[int]
    out_port: Optional[int]


@dataclass(frozen=True)
class Path:
    hops: tuple[Hop, ...]
    src_attach: Optional[Port] = None
    dst_attach: Optional[Port] = None
    algorithm: str = "shortest"
    concatenated: bool = False

    @property
    def devices(self) -> list[DeviceId]:
        return [h.device for h in self.hops]

    def __len__(self):
        return len(self.hops)

    @property
    def loops(self) -> bool:
        return len(set(self.devices)) != len(self.hops)

    def reversed(self) -> Path:
        hops = tuple(Hop(h.device, h.out_port, h.in_port) for h in reversed(self.hops))
        return Path(hops, self.dst_attach, self.src_attach, self.algorithm, self.concatenated)


def _distances(t: Topology, dst: DeviceId) -> dict[DeviceId, int]:
    dist = {dst: 0}
    queue = deque([dst])
    while queue:
        d = queue.popleft()
        for _, peer, _ in t.neighbors(d):
            if peer not in dist:
                dist[peer] = dist[d] + 1
                queue.append(peer)
    return dist


def _shortest_devices(t: Topology, src: DeviceId, dst: DeviceId,
                      avoid: frozenset = frozenset()) -> list[DeviceId]:
    """Minimum-hop device sequence from src to dst.

    Among equal-length sequences, prefer the one touching the fewest devices
    in ``avoid`` (apart from src itself), then the lexicographically smallest.
    """
    for d in (src, dst):
        if d not in t.devices:
            raise PathError(f"unknown device {d!r}")
    dist = _distances(t, dst)
    if src not in dist:
        raise NoPathError(f"no path from {src} to {dst}")

    if not avoid:
        path = [src]
        while path[-1] != dst:
            k = dist[path[-1]] - 1
            path.append(min(p for _, p, _ in t.neighbors(path[-1]) if dist.get(p) == k))
        return path

    succ = {d: sorted({p for _, p, _ in t.neighbors(d) if dist[p] == k - 1})
            for d, k in dist.items()}

    # fewest avoided devices on any shortest path from d to dst
    cost: dict[DeviceId, int] = {}
    for d in sorted(dist, key=dist.get):
        here = d in avoid
        cost[d] = here if d == dst else here + min(cost[s] for s in succ[d])

    path = [src]
    while path[-1] != dst:
        nxt = succ[path[-1]]
        best = min(cost[s] for s in nxt)
        path.append(next(s for s in nxt if cost[s] == best))
    return path


def shortest_devices(t: Topology, src: DeviceId, dst: DeviceId) -> list[DeviceId]:
    return _shortest_devices(t, src, dst)


def _link_ports(t: Topology, a: DeviceId, b: DeviceId) -> tuple[int, int]:
    for port, peer, peer_port in t.neighbors(a):
        if peer == b:
            return port, peer_port
    raise PathError(f"{a} and {b} are not adjacent")


def build_path(t: Topology, devices: Sequence[DeviceId], *,
               src_port: Optional[int] = None, dst_port: Optional[int] = None,
               algorithm: str = "shortest", concatenated: bool = False) -> Path:
    """Turn a device sequence into port-level hops."""
    if not devices:
        raise PathError("empty device sequence")
    ins: list[Optional[int]] = [src_port] + [None] * (len(devices) - 1)
    outs: list[Optional[int]] = [None] * (len(devices) - 1) + [dst_port]
    for i in range(len(devices) - 1):
        outs[i], ins[i + 1] = _link_ports(t, devices[i], devices[i + 1])
    hops = tuple(Hop(d, i, o) for d, i, o in zip(devices, ins, outs))
    src_attach = (devices[0], src_port) if src_port is not None else None
    dst_attach = (devices[-1], dst_port) if dst_port is not None else None
    path = Path(hops, src_attach, dst_attach, algorithm, concatenated)
    validate_path(t, path)
    return path


def validate_path(t: Topology, path: Path) -> None:
    """Raise PathError unless consecutive hops are joined by links and the
    end ports match the attachment points."""
    if not path.hops:
        raise PathError("path has no hops")
    for hop, nxt in zip(path.hops, path.hops[1:]):
        if t.peer(hop.device, hop.out_port) != (nxt.device, nxt.in_port):
            raise PathError(f"{hop.device}:{hop.out_port} does not lead to "
                            f"{nxt.device}:{nxt.in_port}")
    first, last = path.hops[0], path.hops[-1]
    if path.src_attach is not None and path.src_attach != (first.device, first.in_port):
        raise PathError("first hop does not start at the source attachment")
    if path.dst_attach is not None and path.dst_attach != (last.device, last.out_port):
        raise PathError("last hop does not end at the destination attachment")
    if path.loops and not path.concatenated:
        raise PathError("path revisits a device")


def shortest_path(t: Topology, src_dev: DeviceId, dst_dev: DeviceId, *,
                  src_port: Optional[int] = None, dst_port: Optional[int] = None) -> Path:
    """Minimum hop-count path; ties go to the smallest device-id sequence."""
    return build_path(t, _shortest_devices(t, src_dev, dst_dev),
                      src_port=src_port, dst_port=dst_port)


def via_devices(t: Topology, src_dev: DeviceId, dst_dev: DeviceId,
                waypoints: Iterable[DeviceId]) -> list[DeviceId]:
    stops = [src_dev, *waypoints, dst_dev]
    for d in stops:
        if d not in t.devices:
            raise PathError(f"unknown device {d!r}")
    seq = [src_dev]
    for a, b in zip(stops, stops[1:]):
        # equal-length segments that avoid already used devices win ties
        seg = _shortest_devices(t, a, b, avoid=frozenset(seq))
        seq.extend(seg[1:])
    return seq


def path_via(t: Topology, src_dev: DeviceId, dst_dev: DeviceId,
             waypoints: Sequence[DeviceId], *,
             src_port: Optional[int] = None, dst_port: Optional[int] = None) -> Path:
    """Concatenate shortest segments src -> w1 -> ... -> wk -> dst.

    The result is flagged ``concatenated`` when a device repeats; callers
    decide whether a looping path is acceptable.
    """
    devices = via_devices(t, src_dev, dst_dev, waypoints)
    return build_path(t, devices, src_port=src_port, dst_port=dst_port,
                      algorithm="via", concatenated=len(set(devices)) != len(devices))


class AlgorithmRegistry:
    def __init__(self, default: str = "shortest"):
        self._algorithms: dict[str, Algorithm] = {"shortest": shortest_devices}
        self.default = default

    def register(self, name: str, algorithm: Algorithm) -> None:
        self._algorithms[name] = algorithm

    def get(self, name: str) -> Algorithm:
        try:
            return self._algorithms[name]
        except KeyError:
            raise UnknownAlgorithmError(f"unknown path algorithm {name!r}") from None

    def names(self) -> list[str]:
        return sorted(self._algorithms)


def select_path(reg: AlgorithmRegistry, t: Topology, policy, src_dev: DeviceId,
                dst_dev: DeviceId, *, src_port: Optional[int] = None,
                dst_port: Optional[int] = None, algorithm: Optional[str] = None) -> Path:
    """Path for a flow governed by ``policy``: waypoints if it has any,
    otherwise the named (or default) registered algorithm."""
    if policy is not None and policy.via:
        return path_via(t, src_dev, dst_dev, policy.via, src_port=src_port, dst_port=dst_port)
    name = algorithm or reg.default
    devices = list(reg.get(name)(t, src_dev, dst_dev))
    return build_path(t, devices, src_port=src_port, dst_port=dst_port, algorithm=name,
                      concatenated=len(set(devices)) != len(devices))
