"""CBR multicast traffic and random group membership (cbrgen-style plans)."""

from __future__ import annotations

from dataclasses import dataclass, field

from .kernel import US_PER_S


class InvalidTraffic(ValueError):
    pass


@dataclass(frozen=True)
class CbrFlow:
    flow_id: int
    source: int
    group: int
    packet_size: int = 512
    interval: float = 0.25
    start_at: float = 5.0
    stop_at: float = 190.0

    def validate(self, duration: float | None = None):
        if not self.interval > 0:
            raise InvalidTraffic(f"flow {self.flow_id}: interval must be > 0")
        if not self.start_at < self.stop_at:
            raise InvalidTraffic(f"flow {self.flow_id}: start must precede stop")
        if self.start_at < 0 or (duration is not None and self.stop_at > duration + 1e-9):
            raise InvalidTraffic(f"flow {self.flow_id}: [{self.start_at}, {self.stop_at}) outside the run")

    def packet_count(self) -> int:
        """Ticks at start, start + interval, ...; none at or after stop."""
        span = int(round((self.stop_at - self.start_at) * US_PER_S))
        step = int(round(self.interval * US_PER_S))
        return -(-span // step)

    def tick_time(self, k: int) -> float:
        return self.start_at + k * self.interval


@dataclass(frozen=True)
class MulticastGroup:
    gid: int
    members: tuple[int, ...]
    sources: tuple[int, ...]


@dataclass
class GroupPlan:
    groups: list[MulticastGroup] = field(default_factory=list)

    def group(self, gid: int) -> MulticastGroup:
        for g in self.groups:
            if g.gid == gid:
                return g
        raise KeyError(gid)

    def receivers(self, source: int, gid: int) -> frozenset[int]:
        """Members that should receive ``source``'s traffic (the source itself excluded)."""
        return frozenset(m for m in self.group(gid).members if m != source)

    def memberships(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for g in self.groups:
            for m in g.members:
                out.setdefault(m, []).append(g.gid)
        return out


def build_group_plan(nodes: int, group_count: int = 10, members_per_group: int = 10,
                     sources_per_group: int = 1, rng=None, pools: list[list[int]] | None = None,
                     sources_are_members: bool = True) -> GroupPlan:
    """Sample members (without replacement within a group) and sources for each group.

    ``pools`` optionally restricts group ``g``'s members to ``pools[g % len(pools)]``,
    which is how multicast groups are aligned with RPGM mobility groups.
    """
    if nodes <= 0 or group_count <= 0 or members_per_group <= 0 or sources_per_group <= 0:
        raise InvalidTraffic("counts must be positive")
    if members_per_group > nodes:
        raise InvalidTraffic(f"members_per_group {members_per_group} exceeds node count {nodes}")
    groups = []
    for g in range(group_count):
        pool = list(range(nodes)) if pools is None else sorted(pools[g % len(pools)])
        k = min(members_per_group, len(pool))
        members = sorted(rng.sample(pool, k))
        if sources_are_members:
            if sources_per_group > len(members):
                raise InvalidTraffic("more sources than members")
            sources = sorted(rng.sample(members, sources_per_group))
        else:
            others = [i for i in range(nodes) if i not in members]
            if sources_per_group > len(others):
                raise InvalidTraffic("not enough non-member nodes for sources")
            sources = sorted(rng.sample(others, sources_per_group))
        groups.append(MulticastGroup(g, tuple(members), tuple(sources)))
    return GroupPlan(groups)


def build_flows(plan: GroupPlan, duration: float, rng, interval: float = 0.25, packet_size: int = 512,
                start_window: tuple[float, float] = (5.0, 15.0), stop_margin: float = 10.0) -> list[CbrFlow]:
    flows = []
    stop = duration - stop_margin
    for g in plan.groups:
        for s in g.sources:
            start = round(rng.uniform(*start_window), 6)
            flow = CbrFlow(len(flows), s, g.gid, packet_size, interval, start, stop)
            flow.validate(duration)
            flows.append(flow)
    return flows


def expected_originated(flows: list[CbrFlow]) -> int:
    return sum(f.packet_count() for f in flows)


def dump_traffic(plan: GroupPlan, flows: list[CbrFlow]) -> str:
    """Plain-text plan: ``group`` membership lines then one flow per line."""
    lines = ["# group <gid> sources=<s,...> members <m> ..."]
    for g in plan.groups:
        lines.append(f"group {g.gid} sources={','.join(map(str, g.sources))} "
                     f"members {' '.join(map(str, g.members))}")
    lines.append("# flow_id source group size interval start stop")
    for f in flows:
        lines.append(f"{f.flow_id} {f.source} {f.group} {f.packet_size} {f.interval!r} "
                     f"{f.start_at!r} {f.stop_at!r}")
    return "\n".join(lines) + "\n"


def load_traffic(text: str) -> tuple[GroupPlan, list[CbrFlow]]:
    groups = []
    flows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == "group":
                gid = int(parts[1])
                sources = tuple(int(s) for s in parts[2].split("=", 1)[1].split(",") if s)
                if parts[3] != "members":
                    raise ValueError("expected 'members'")
                groups.append(MulticastGroup(gid, tuple(int(m) for m in parts[4:]), sources))
            else:
                if len(parts) != 7:
                    raise ValueError("expected 7 fields")
                fid, src, gid, size = (int(p) for p in parts[:4])
                interval, start, stop = (float(p) for p in parts[4:])
                flows.append(CbrFlow(fid, src, gid, size, interval, start, stop))
        except (ValueError, IndexError) as exc:
            raise InvalidTraffic(f"line {lineno}: {exc}") from None
    if not groups and flows:
        groups = [MulticastGroup(g, (), tuple(sorted({f.source for f in flows if f.group == g})))
                  for g in sorted({f.group for f in flows})]
    return GroupPlan(groups), flows

