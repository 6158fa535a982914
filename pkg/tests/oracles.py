"""Independent reference implementations and generators used by the tests.

Nothing here imports the code paths it checks, beyond the plain data types.
"""
from __future__ import annotations

import itertools
import random
from ipaddress import IPv4Address, IPv4Network

from osdf.dataplane import Cookie, Drop, FlowRule, Output, SetDstMac
from osdf.policy import NetworkFunction, Policy
from osdf.selector import ICMP, TCP, UDP, MatchFields, Packet
from osdf.topo import Device, Host, Link, Region, Topology


def simple_paths(adj: dict, src, dst):
    """Every simple path from src to dst, by exhaustive DFS."""
    out = []

    def walk(path):
        node = path[-1]
        if node == dst:
            out.append(list(path))
            return
        for nxt in adj[node]:
            if nxt not in path:
                path.append(nxt)
                walk(path)
                path.pop()

    walk([src])
    return out


def min_hops_from(adj: dict, src) -> dict:
    """Minimum device count of a simple path from src to every reachable node,
    found by enumerating all simple paths that start at src."""
    names = list(adj)
    index = {n: i for i, n in enumerate(names)}
    nbrs = [[index[m] for m in adj[n]] for n in names]
    best = [1 << 30] * len(names)

    def walk(node, visited, length):
        if length < best[node]:
            best[node] = length
        for nxt in nbrs[node]:
            if not visited >> nxt & 1:
                walk(nxt, visited | 1 << nxt, length + 1)

    s = index[src]
    walk(s, 1 << s, 1)
    return {names[i]: b for i, b in enumerate(best) if b < 1 << 30}


def graph_topology(nodes: list[str], edges: list[tuple[str, str]]) -> Topology:
    """Bare topology (no hosts) with one port per incident edge."""
    ports = {n: 0 for n in nodes}
    links = []
    for a, b in edges:
        ports[a] += 1
        ports[b] += 1
        links.append(Link((a, ports[a]), (b, ports[b])))
    devices = {n: Device(n, max(ports[n], 1), "R") for n in nodes}
    regions = {"R": Region("R", (IPv4Network("10.0.0.0/8"),), frozenset(nodes))}
    return Topology(devices, tuple(links), {}, regions)


def adjacency(nodes, edges) -> dict:
    adj = {n: [] for n in nodes}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    return adj


def is_connected(nodes, edges) -> bool:
    adj = adjacency(nodes, edges)
    seen = {nodes[0]}
    stack = [nodes[0]]
    while stack:
        for m in adj[stack.pop()]:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return len(seen) == len(nodes)


def connected_graphs(n: int):
    """All connected labelled simple graphs on n nodes."""
    nodes = [f"d{i}" for i in range(n)]
    pairs = list(itertools.combinations(nodes, 2))
    for mask in range(1 << len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        if n == 1 or (len(edges) >= n - 1 and is_connected(nodes, edges)):
            yield nodes, edges


def random_connected_graph(rng: random.Random, n: int, p: float = 0.3):
    nodes = [f"d{i}" for i in range(n)]
    order = nodes[:]
    rng.shuffle(order)
    # random spanning tree plus extra edges
    edges = {tuple(sorted((order[i], rng.choice(order[:i])))) for i in range(1, n)}
    for a, b in itertools.combinations(nodes, 2):
        if rng.random() < p:
            edges.add((a, b))
    return nodes, sorted(edges)


# -- flow tables ------------------------------------------------------------

def naive_lookup(entries, pkt):
    """Highest priority match by linear scan; earliest install wins ties.

    ``entries`` is a list of ``(seq, rule)`` in install order.
    """
    best = None
    for seq, rule in entries:
        if all(getattr(pkt, name) == value for name, value in rule.match.items()):
            if best is None or rule.priority > best[1].priority:
                best = (seq, rule)
    return best[1] if best else None


_IPS = [IPv4Address(f"10.0.0.{i}") for i in range(1, 4)]
_PORTS = [80, 443, 5004]


def random_packet(rng: random.Random) -> Packet:
    proto = rng.choice([TCP, UDP, ICMP])
    ports = (None, None) if proto == ICMP else (rng.choice(_PORTS), rng.choice(_PORTS))
    return Packet("00:00:00:00:00:01", "00:00:00:00:00:02",
                  rng.choice(_IPS), rng.choice(_IPS), proto, *ports)


def random_match(rng: random.Random) -> MatchFields:
    proto = rng.choice([None, TCP, UDP, ICMP])
    kw = {"ip_proto": proto}
    if rng.random() < 0.5:
        kw["src_ip"] = rng.choice(_IPS)
    if rng.random() < 0.5:
        kw["dst_ip"] = rng.choice(_IPS)
    if proto is not None and rng.random() < 0.5:
        kw["l4_src"] = rng.choice(_PORTS)
    if proto is not None and rng.random() < 0.5:
        kw["l4_dst"] = rng.choice(_PORTS)
    return MatchFields(**kw)


def random_rule(rng: random.Random, device="s1") -> FlowRule:
    actions = rng.choice([(Drop(),), (Output(rng.randint(1, 4)),),
                          (SetDstMac("00:00:00:00:00:09"), Output(1))])
    return FlowRule(device, rng.randint(1, 5), random_match(rng), actions,
                    Cookie(rng.choice([None, 1, 2]), rng.randint(1, 100)))


# -- round-trip generators --------------------------------------------------

_NAMES = ["A", "B", "C", "east", "west", "dc-1", "x_9"]


def random_policy(rng: random.Random) -> Policy:
    kw = dict(priority=rng.randint(2, 65535),
              via=tuple(rng.sample(["s1", "s2", "a1", "b2", "core"], rng.randint(0, 3))),
              enabled=rng.random() < 0.8,
              name=rng.choice([None, "p1", "web-main"]))
    profile = rng.choice(["web", "ping", "voip", "video", "any", "custom_1"])
    if rng.random() < 0.5:
        return Policy(NetworkFunction.INTRA_SITE_ROUTE, profile,
                      regions=frozenset(rng.sample(_NAMES, rng.randint(1, 4))), **kw)
    src, dst = rng.sample(_NAMES, 2)
    return Policy(NetworkFunction.INTER_SITE_ROUTE, profile, src_region=src, dst_region=dst,
                  bidirectional=rng.random() < 0.7, **kw)


def random_topology(rng: random.Random) -> Topology:
    n_regions = rng.randint(1, 3)
    n_dev = rng.randint(n_regions, 7)
    devs = [f"sw{i}" for i in range(n_dev)]
    rng.shuffle(devs)
    region_of = {d: (f"R{i % n_regions}" if rng.random() < 0.8 or i < n_regions else None)
                 for i, d in enumerate(devs)}
    port_count = {d: rng.randint(2, 6) for d in devs}
    free = [(d, p) for d in devs for p in range(1, port_count[d] + 1)]
    rng.shuffle(free)
    links = []
    for _ in range(rng.randint(0, len(free) // 3)):
        a, b = free.pop(), free.pop()
        if a[0] != b[0] or a[1] != b[1]:
            links.append(Link(a, b))
    regions = {
        f"R{i}": Region(f"R{i}", (IPv4Network(f"10.{i}.0.0/16"),) + (
            (IPv4Network(f"172.{16 + i}.0.0/24"),) if rng.random() < 0.3 else ()),
            frozenset(d for d in devs if region_of[d] == f"R{i}"))
        for i in range(n_regions)
    }
    hosts = {}
    for k in range(rng.randint(0, min(5, len(free)))):
        attach = free.pop()
        r = rng.randrange(n_regions)
        name = f"h{k}"
        hosts[name] = Host(name, f"00:00:00:00:{k // 256:02x}:{k % 256:02x}",
                           IPv4Address(f"10.{r}.{rng.randint(0, 255)}.{k + 1}"), attach)
    devices = {d: Device(d, port_count[d], region_of[d]) for d in devs}
    return Topology(devices, tuple(links), hosts, regions,
                    gateway_mac=rng.choice(["02:00:00:00:00:fe", "0a:0b:0c:0d:0e:0f"]))


def topology_facts(t: Topology):
    """Order-free structural view of a topology, for round-trip comparisons."""
    return (
        {d.id: (d.port_count, d.region) for d in t.devices.values()},
        {frozenset((l.a, l.b)) for l in t.links},
        {h.name: (h.mac, h.ip, h.attach) for h in t.hosts.values()},
        {r.name: (frozenset(r.prefixes), r.devices) for r in t.regions.values()},
        t.gateway_mac,
    )
