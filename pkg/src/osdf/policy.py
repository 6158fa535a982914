"""Application-based network policies: the one-line policy language and the store.

Grammar (keywords are case-insensitive, identifiers are kept as written)::

    intra <profile> region <r1,r2,...> [priority N] [via d1,d2,...] [name X] [disabled]
    inter <profile> from <r> to <r> [priority N] [via d1,d2,...] [oneway] [name X] [disabled]

Optional clauses may appear in any order, each at most once.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, replace
from typing import Iterator, Optional

from .selector import ProfileRegistry
from .topo import Topology

DEFAULT_PRIORITY = 10
MIN_PRIORITY = 2  # 1 is reserved for controller drop rules
MAX_PRIORITY = 65535

_IDENT_RE = re.compile(r"^[A-Za-z0-9_-]+$")


class NetworkFunction(enum.Enum):
    INTRA_SITE_ROUTE = "intra"
    INTER_SITE_ROUTE = "inter"


class PolicyError(ValueError):
    pass


class PolicySyntaxError(PolicyError):
    def __init__(self, msg: str, column: int):
        super().__init__(f"column {column}: {msg}")
        self.column = column


class UnknownPolicyError(PolicyError, KeyError):
    def __str__(self):
        return self.args[0]


@dataclass(frozen=True)
class Policy:
    function: NetworkFunction
    profile: str
    regions: frozenset[str] = frozenset()     # intra scope
    src_region: Optional[str] = None          # inter scope
    dst_region: Optional[str] = None
    bidirectional: bool = True
    priority: int = DEFAULT_PRIORITY
    via: tuple[str, ...] = ()
    enabled: bool = True
    name: Optional[str] = None
    id: Optional[int] = None

    def __post_init__(self):
        if not MIN_PRIORITY <= self.priority <= MAX_PRIORITY:
            raise PolicyError(
                f"priority {self.priority} outside [{MIN_PRIORITY}, {MAX_PRIORITY}]")
        if self.function is NetworkFunction.INTRA_SITE_ROUTE:
            if not self.regions:
                raise PolicyError("intra policy needs at least one region")
            if self.src_region or self.dst_region or not self.bidirectional:
                raise PolicyError("intra policy takes a region set only")
            object.__setattr__(self, "regions", frozenset(self.regions))
        else:
            if self.regions:
                raise PolicyError("inter policy takes 'from' and 'to' regions only")
            if not (self.src_region and self.dst_region):
                raise PolicyError("inter policy needs source and destination regions")
            if self.src_region == self.dst_region:
                raise PolicyError(
                    f"source and destination regions are both {self.src_region!r}")
        object.__setattr__(self, "via", tuple(self.via))

    def region_names(self) -> set[str]:
        if self.function is NetworkFunction.INTRA_SITE_ROUTE:
            return set(self.regions)
        return {self.src_region, self.dst_region}

    def covers(self, src_region: str, dst_region: str) -> bool:
        if self.function is NetworkFunction.INTRA_SITE_ROUTE:
            return src_region == dst_region and src_region in self.regions
        if (src_region, dst_region) == (self.src_region, self.dst_region):
            return True
        return self.bidirectional and (dst_region, src_region) == (self.src_region, self.dst_region)

    @property
    def sort_key(self):
        return -self.priority, self.id


# -- parsing ----------------------------------------------------------------

class _Tokens:
    def __init__(self, line: str):
        self.toks = [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", line)]
        self.pos = 0
        self.end = len(line) + 1

    def peek(self) -> Optional[str]:
        return self.toks[self.pos][0] if self.pos < len(self.toks) else None

    @property
    def column(self) -> int:
        return self.toks[self.pos][1] if self.pos < len(self.toks) else self.end

    def take(self, what: str) -> str:
        if self.pos >= len(self.toks):
            raise PolicySyntaxError(f"expected {what}, got end of line", self.end)
        tok = self.toks[self.pos][0]
        self.pos += 1
        return tok

    def keyword(self, kw: str) -> None:
        col = self.column
        tok = self.take(f"'{kw}'")
        if tok.lower() != kw:
            raise PolicySyntaxError(f"expected '{kw}', got {tok!r}", col)

    def ident(self, what: str) -> str:
        col = self.column
        tok = self.take(what)
        if not _IDENT_RE.match(tok):
            raise PolicySyntaxError(f"bad {what} {tok!r}", col)
        return tok

    def ident_list(self, what: str) -> list[str]:
        col = self.column
        tok = self.take(f"{what} list")
        items = tok.split(",")
        if not all(_IDENT_RE.match(i) for i in items):
            raise PolicySyntaxError(f"bad {what} list {tok!r}", col)
        return items

    def integer(self, what: str) -> int:
        col = self.column
        tok = self.take(what)
        if not tok.isdigit():
            raise PolicySyntaxError(f"expected integer {what}, got {tok!r}", col)
        return int(tok)


def parse_policy(line: str) -> Policy:
    """Parse one policy line; the result has no id yet."""
    ts = _Tokens(line)
    col = ts.column
    kind = ts.take("'intra' or 'inter'").lower()
    try:
        function = NetworkFunction(kind)
    except ValueError:
        raise PolicySyntaxError(f"unknown network function {kind!r}", col) from None
    profile = ts.ident("profile")
    kw: dict = {}
    if function is NetworkFunction.INTRA_SITE_ROUTE:
        ts.keyword("region")
        kw["regions"] = frozenset(ts.ident_list("region"))
    else:
        ts.keyword("from")
        kw["src_region"] = ts.ident("region")
        ts.keyword("to")
        kw["dst_region"] = ts.ident("region")

    seen = set()
    while ts.peek() is not None:
        col = ts.column
        word = ts.take("clause").lower()
        if word in seen:
            raise PolicySyntaxError(f"duplicate '{word}' clause", col)
        seen.add(word)
        if word == "priority":
            pcol = ts.column
            kw["priority"] = ts.integer("priority")
            if not MIN_PRIORITY <= kw["priority"] <= MAX_PRIORITY:
                raise PolicySyntaxError(
                    f"priority {kw['priority']} outside [{MIN_PRIORITY}, {MAX_PRIORITY}]", pcol)
        elif word == "via":
            kw["via"] = tuple(ts.ident_list("device"))
        elif word == "oneway" and function is NetworkFunction.INTER_SITE_ROUTE:
            kw["bidirectional"] = False
        elif word == "name":
            kw["name"] = ts.ident("name")
        elif word == "disabled":
            kw["enabled"] = False
        else:
            raise PolicySyntaxError(f"unexpected {word!r}", col)
    return Policy(function, profile, **kw)


def format_policy(p: Policy) -> str:
    """Canonical policy line; ``parse_policy(format_policy(p))`` equals ``p`` minus its id."""
    if p.function is NetworkFunction.INTRA_SITE_ROUTE:
        out = f"intra {p.profile} region {','.join(sorted(p.regions))}"
    else:
        out = f"inter {p.profile} from {p.src_region} to {p.dst_region}"
    out += f" priority {p.priority}"
    if p.via:
        out += " via " + ",".join(p.via)
    if not p.bidirectional:
        out += " oneway"
    if p.name is not None:
        out += f" name {p.name}"
    if not p.enabled:
        out += " disabled"
    return out


# -- store ------------------------------------------------------------------

class PolicyStore:
    """Active policies, iterated by descending priority then ascending id.

    Ids come from a counter that is never rewound, so a removed id is never
    handed out again.
    """

    def __init__(self, profiles: Optional[ProfileRegistry] = None):
        self.profiles = profiles if profiles is not None else ProfileRegistry()
        self._policies: dict[int, Policy] = {}
        self._next_id = 1

    def add(self, p: Policy, topology: Topology) -> int:
        for region in sorted(p.region_names()):
            if region not in topology.regions:
                raise PolicyError(f"unknown region {region!r}")
        for dev in p.via:
            if dev not in topology.devices:
                raise PolicyError(f"unknown device {dev!r}")
        if p.profile not in self.profiles:
            raise PolicyError(f"unknown traffic profile {p.profile!r}")
        pid = self._next_id
        self._next_id += 1
        self._policies[pid] = replace(p, id=pid)
        return pid

    def remove(self, pid: int) -> Policy:
        try:
            return self._policies.pop(pid)
        except KeyError:
            raise UnknownPolicyError(f"no policy with id {pid}") from None

    def get(self, pid: int) -> Policy:
        try:
            return self._policies[pid]
        except KeyError:
            raise UnknownPolicyError(f"no policy with id {pid}") from None

    def __len__(self):
        return len(self._policies)

    def __iter__(self) -> Iterator[Policy]:
        return iter(sorted(self._policies.values(), key=lambda p: p.sort_key))

    def match(self, function: NetworkFunction, src_region: str, dst_region: str,
              profile: str) -> list[Policy]:
        return [p for p in self
                if p.enabled and p.function is function and p.profile == profile
                and p.covers(src_region, dst_region)]
