"""MAODV: one shared multicast tree per group.

Joins and sender attachment use AODV-style RREQ/RREP discovery; the
chosen branch is switched on hop by hop with MACT.  Data moves only over
activated tree edges (one unicast per edge).  A broken edge is noticed
through a failed unicast or a quiet tree neighbour, and the node farther
from the group leader repairs it.  The leader floods a Group Hello every
period; partitions that come back into contact are merged by the leader
with the lower id.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .core import DUP_HORIZON, DuplicateCache, ProtocolNode, register

RREQ = "RREQ"
RREP = "RREP"
MACT = "MACT"
GROUP_HELLO = "GROUP_HELLO"
HELLO = "HELLO"

UP = "up"
DOWN = "down"

# MACT flags
ACTIVATE = "activate"
PRUNE = "prune"
HANDOFF = "handoff"
DISSOLVE = "dissolve"
UPDATE = "update"

DEFAULTS = {
    "group_hello_period": 5.0,
    "rrep_wait": 1.0,
    "rreq_retries": 2,
    "route_lifetime": 10.0,
    "buffer_n": 64,
    "hello_interval": 1.0,
    "hello_timeout": 2.5,
    "repair_ttl_extra": 2,
    "watchdog_periods": 3.0,
    "dup_horizon": DUP_HORIZON,
}


@dataclass
class RouteEntry:
    destination: int
    next_hop: int
    hop_count: int
    dest_seq: int
    lifetime: float

    def replaces(self, old: "RouteEntry | None", now: float) -> bool:
        if old is None or old.lifetime <= now:
            return True
        return self.dest_seq > old.dest_seq or (self.dest_seq == old.dest_seq and self.hop_count < old.hop_count)


@dataclass
class NextHop:
    direction: str
    activated: bool = True
    since: float = 0.0


@dataclass
class MulticastRouteEntry:
    group: int
    group_leader: int
    group_seq: int
    hop_count_to_leader: int
    member_flag: bool = False
    next_hops: dict[int, NextHop] = field(default_factory=dict)

    @property
    def upstream(self) -> int | None:
        for nb, h in self.next_hops.items():
            if h.activated and h.direction == UP:
                return nb
        return None

    def downstream(self) -> list[int]:
        return sorted(nb for nb, h in self.next_hops.items() if h.activated and h.direction == DOWN)

    def activated(self) -> list[int]:
        return sorted(nb for nb, h in self.next_hops.items() if h.activated)


@dataclass(order=True)
class Reply:
    """Ordering key: larger is better (max seq, min hops, lowest next hop)."""

    key: tuple
    seq: int = field(compare=False)
    hop_count: int = field(compare=False)
    next_hop: int = field(compare=False)
    leader: int = field(compare=False)
    leader_hops: int = field(compare=False)

    @classmethod
    def make(cls, seq, hop_count, next_hop, leader, leader_hops):
        return cls((seq, -hop_count, -next_hop), seq, hop_count, next_hop, leader, leader_hops)


@dataclass
class RreqRecord:
    originator: int
    rreq_id: int
    best_reply: Reply | None = None
    reply_deadline: float = 0.0

    def offer(self, reply: Reply) -> bool:
        if self.best_reply is None or reply > self.best_reply:
            self.best_reply = reply
            return True
        return False


@dataclass
class _Discovery:
    group: int
    purpose: str  # join | send | repair | merge
    record: RreqRecord
    attempt: int = 0
    target: int | None = None
    timer: object = None


@register("maodv")
class MaodvNode(ProtocolNode):
    name = "maodv"

    def __init__(self, port, config=None):
        super().__init__(port, config)
        cfg = dict(DEFAULTS)
        cfg.update(self.config)
        self.cfg = cfg
        self.cache = DuplicateCache(cfg["dup_horizon"])
        self.routes: dict[int, RouteEntry] = {}
        self.mroutes: dict[int, MulticastRouteEntry] = {}
        self.group_info: dict[int, tuple[int, int]] = {}
        self.discovery: dict[int, _Discovery] = {}
        self.relay: dict[tuple[int, int], RreqRecord] = {}
        self.buffers: dict[int, deque] = {}
        self.heard: dict[int, float] = {}
        self.up_info: dict[int, float] = {}
        self.leading: dict[int, object] = {}
        self.sending: dict[int, float] = {}
        self.last_bcast = float("-inf")
        self.rreq_id = 0
        self.repairs = 0
        self.merges = 0

    # -- helpers

    @property
    def now(self) -> float:
        return self.clock.now

    def _bcast(self, packet, jitter=True):
        self.last_bcast = self.now
        self.port.broadcast(packet, jitter=jitter)

    def is_leader(self, group: int) -> bool:
        m = self.mroutes.get(group)
        return m is not None and m.group_leader == self.id and group in self.leading

    def on_tree(self, group: int) -> bool:
        m = self.mroutes.get(group)
        if m is None:
            return False
        return group in self.leading or m.upstream is not None

    def _retained(self, group: int) -> bool:
        """Members, and senders active within the route lifetime, never prune themselves."""
        if group in self.groups:
            return True
        return self.now - self.sending.get(group, float("-inf")) < self.cfg["route_lifetime"]

    def _known_seq(self, group: int) -> int:
        m = self.mroutes.get(group)
        seq = self.group_info.get(group, (-1, 0))[1]
        return max(seq, m.group_seq) if m is not None else seq

    def _entry(self, group: int) -> MulticastRouteEntry:
        m = self.mroutes.get(group)
        if m is None:
            leader, seq = self.group_info.get(group, (-1, 0))
            m = MulticastRouteEntry(group, leader, seq, 0, group in self.groups)
            self.mroutes[group] = m
        return m

    def _link(self, m: MulticastRouteEntry, nb: int, direction: str):
        m.next_hops[nb] = NextHop(direction, True, self.now)
        self.heard[nb] = self.now

    def _drop_entry(self, group: int):
        self.mroutes.pop(group, None)
        self.up_info.pop(group, None)
        self._stop_leading(group)

    # -- lifecycle

    def start(self):
        self.port.set_timer(self.port.rng.random() * self.cfg["hello_interval"], "hello")

    def join(self, group):
        super().join(group)
        m = self.mroutes.get(group)
        if m is not None:
            m.member_flag = True
            if self.on_tree(group):
                return
        d = self.discovery.get(group)
        if d is not None:
            if d.purpose == "send":
                d.purpose = "join"
            return
        if m is None:
            self._discover(group, "join")

    def leave(self, group):
        super().leave(group)
        m = self.mroutes.get(group)
        if m is None:
            return
        m.member_flag = False
        if group in self.leading:
            if self._retained(group):
                return
            self._stop_leading(group)
            self._lost_root(group)
        else:
            self._maybe_prune(group)

    # -- application data

    def on_app_data(self, group, packet):
        self.sending[group] = self.now
        self.cache.seen(packet.uid, self.now)
        if self.on_tree(group):
            self._send_down_tree(group, packet, None)
            return
        buf = self.buffers.setdefault(group, deque(maxlen=self.cfg["buffer_n"]))
        buf.append(packet)
        if group not in self.discovery:
            if group in self.mroutes:
                self._discover(group, "repair")
            else:
                self._discover(group, "join" if group in self.groups else "send")

    def _send_down_tree(self, group, packet, from_):
        m = self.mroutes[group]
        for nb in m.activated():
            if nb != from_:
                self.port.unicast(packet if from_ is None else packet.hop(), nb)

    def _flush(self, group):
        buf = self.buffers.pop(group, None)
        if buf and self.on_tree(group):
            for pkt in buf:
                self._send_down_tree(group, pkt, None)

    # -- discovery (originator side)

    def _discover(self, group, purpose, target=None):
        old = self.discovery.pop(group, None)
        if old is not None:
            self.port.cancel_timer(old.timer)
        d = _Discovery(group, purpose, RreqRecord(self.id, 0), target=target)
        self.discovery[group] = d
        if purpose == "repair":
            self.repairs += 1
        elif purpose == "merge":
            self.merges += 1
        self._send_rreq(d)

    def _max_attempts(self, purpose: str) -> int:
        if purpose == "merge":
            return 1
        if purpose == "repair":
            return 2
        return 1 + int(self.cfg["rreq_retries"])

    def _send_rreq(self, d: _Discovery):
        self.rreq_id += 1
        d.record = RreqRecord(self.id, self.rreq_id, None, self.now + self.cfg["rrep_wait"])
        m = self.mroutes.get(d.group)
        target = d.target if d.purpose == "merge" or d.attempt == 0 else None
        fields = {"rreq_id": self.rreq_id, "join": d.purpose != "send", "repair": d.purpose == "repair",
                  "target": target, "group_seq": 0, "leader": None, "leader_hops": 0}
        ttl = None
        if d.purpose == "repair" and m is not None:
            fields["group_seq"] = m.group_seq
            fields["leader"] = m.group_leader
            fields["leader_hops"] = m.hop_count_to_leader
            if d.attempt == 0:
                ttl = m.hop_count_to_leader + int(self.cfg["repair_ttl_extra"])
        elif d.purpose in ("join", "send"):
            info = self.group_info.get(d.group)
            if info is not None and target is None:
                fields["group_seq"] = info[1]
        pkt = self.control(RREQ, d.group, **fields) if ttl is None else self.control(RREQ, d.group, ttl=ttl, **fields)
        self.cache.seen(pkt.uid, self.now)
        self._bcast(pkt, jitter=False)
        d.timer = self.port.set_timer(self.cfg["rrep_wait"], "rrep_wait", d.group, self.rreq_id)

    def timer_rrep_wait(self, group, rreq_id):
        d = self.discovery.get(group)
        if d is None or d.record.rreq_id != rreq_id:
            return
        best = d.record.best_reply
        m = self.mroutes.get(group)
        if best is not None and not (m is not None and best.next_hop in m.downstream()):
            self._select_and_activate(d)
            return
        d.attempt += 1
        if d.attempt < self._max_attempts(d.purpose):
            self._send_rreq(d)
            return
        del self.discovery[group]
        self._discovery_failed(d)

    def _discovery_failed(self, d: _Discovery):
        group = d.group
        if d.purpose == "join":
            if group in self.groups:
                self._become_leader(group)
        elif d.purpose == "send":
            self.buffers.pop(group, None)
        elif d.purpose == "repair":
            self._lost_root(group)
        elif d.purpose == "merge":
            self._dissolve(group, d.target)

    def _select_and_activate(self, d: _Discovery):
        del self.discovery[d.group]
        best = d.record.best_reply
        m = self._entry(d.group)
        self._stop_leading(d.group)
        for nb, h in list(m.next_hops.items()):
            if h.direction == UP:
                del m.next_hops[nb]
        m.member_flag = d.group in self.groups
        m.group_leader = best.leader
        m.group_seq = max(m.group_seq, best.seq)
        m.hop_count_to_leader = best.hop_count + best.leader_hops
        self._link(m, best.next_hop, UP)
        self.up_info[d.group] = self.now
        mact = self.control(MACT, d.group, flag=ACTIVATE, rreq_origin=self.id, rreq_id=d.record.rreq_id,
                            group_seq=m.group_seq, merging=self.id if d.purpose == "merge" else None)
        self.port.unicast(mact, best.next_hop)
        self._push_update(d.group)
        self._flush(d.group)

    # -- leadership

    def _become_leader(self, group):
        m = self._entry(group)
        for nb, h in list(m.next_hops.items()):
            if h.direction == UP:
                del m.next_hops[nb]
        m.group_leader = self.id
        m.hop_count_to_leader = 0
        m.group_seq += 1
        m.member_flag = group in self.groups
        self.group_info[group] = (self.id, m.group_seq)
        self.leading[group] = None
        self._group_hello(group)
        self._push_update(group)
        self._flush(group)

    def _push_update(self, group, received=None, only=None):
        """Tell our branch who the leader is and how far away it is now."""
        m = self.mroutes[group]
        down = m.downstream() if only is None else [only]
        if not down:
            return
        fields = {"leader": m.group_leader, "hops": m.hop_count_to_leader, "group_seq": m.group_seq}
        if received is None:
            pkt = self.control(MACT, group, flag=UPDATE, **fields)
            self.cache.seen(pkt.uid, self.now)
        else:
            pkt = received.hop(**fields)
        for nb in down:
            self.port.unicast(pkt, nb)

    def _stop_leading(self, group):
        handle = self.leading.pop(group, None)
        if handle is not None:
            self.port.cancel_timer(handle)

    def timer_group_hello(self, group):
        if group not in self.leading:
            return
        self.mroutes[group].group_seq += 1
        self._group_hello(group)

    def _group_hello(self, group):
        m = self.mroutes[group]
        pkt = self.control(GROUP_HELLO, group, leader=self.id, **self._tree_fields(group))
        pkt.seq = m.group_seq
        self.cache.seen(pkt.uid, self.now)
        self._bcast(pkt, jitter=False)
        self.leading[group] = self.port.set_timer(self.cfg["group_hello_period"], "group_hello", group)

    def _tree_fields(self, group) -> dict:
        m = self.mroutes.get(group)
        if m is None:
            return {"tree_leader": None, "tree_hops": 0, "tree_seq": self._known_seq(group),
                    "tree_up": None, "tree_down": ()}
        return {"tree_leader": m.group_leader, "tree_hops": m.hop_count_to_leader, "tree_seq": m.group_seq,
                "tree_up": m.upstream, "tree_down": tuple(m.downstream())}

    # -- receive path

    def on_packet(self, packet, from_):
        self.heard[from_] = self.clock.now
        if packet.kind == "data":
            self.forward_data(packet, from_)
            return
        ptype = packet.ptype
        if ptype == HELLO:
            return
        if ptype == RREQ:
            self.handle_rreq(packet, from_)
        elif ptype == RREP:
            self.handle_rrep(packet, from_)
        elif ptype == MACT:
            self.handle_mact(packet, from_)
        elif ptype == GROUP_HELLO:
            self.handle_group_hello(packet, from_)

    def handle_rreq(self, packet, from_):
        now = self.now
        if self.cache.seen(packet.uid, now):
            # a tree node answers each copy arriving over a distinct neighbour, so the
            # originator sees every equal-cost branch and can apply the tie-break
            if (packet.fields["join"] and self.on_tree(packet.group) and packet.origin != self.id
                    and self._can_reply(packet.group, packet.fields)
                    and not self.cache.seen((packet.uid, from_), now)):
                self._reply(packet, from_)
            return
        self.cache.seen((packet.uid, from_), now)
        f = packet.fields
        orig = packet.origin
        route = RouteEntry(orig, from_, packet.hops + 1, f["rreq_id"], now + self.cfg["route_lifetime"])
        if route.replaces(self.routes.get(orig), now):
            self.routes[orig] = route
        group = packet.group
        on_tree = self.on_tree(group)
        if on_tree and self._can_reply(group, f):
            self._reply(packet, from_)
            return
        if on_tree and (f["repair"] or f["target"] is not None):
            # a scoped search must not be relayed through other tree branches
            return
        fwd = packet.hop()
        if fwd.ttl > 0:
            self._bcast(fwd)

    def _reply(self, packet, from_):
        m = self.mroutes[packet.group]
        rrep = self.control(RREP, packet.group, rreq_origin=packet.origin, rreq_id=packet.fields["rreq_id"],
                            group_seq=m.group_seq, leader=m.group_leader, leader_hops=m.hop_count_to_leader,
                            replier=self.id)
        self.port.unicast(rrep, from_)

    def _can_reply(self, group, f) -> bool:
        m = self.mroutes[group]
        if group in self.discovery and self.discovery[group].purpose == "repair":
            return False
        if m.group_seq < f["group_seq"]:
            return False
        if f["repair"] and (m.group_leader != f["leader"] or m.hop_count_to_leader > f["leader_hops"]):
            return False
        if f["target"] is not None and m.group_leader != f["target"]:
            return False
        return True

    def handle_rrep(self, packet, from_):
        f = packet.fields
        orig = f["rreq_origin"]
        reply = Reply.make(f["group_seq"], packet.hops + 1, from_, f["leader"], f["leader_hops"])
        if orig == self.id:
            d = self.discovery.get(packet.group)
            if d is None or d.record.rreq_id != f["rreq_id"]:
                return
            m = self.mroutes.get(packet.group)
            if m is not None and from_ in m.downstream():
                # that path runs back through our own branch
                return
            d.record.offer(reply)
            return
        key = (orig, f["rreq_id"])
        rec = self.relay.get(key)
        if rec is None:
            if len(self.relay) > 256:
                self._purge_relay()
            rec = self.relay[key] = RreqRecord(orig, f["rreq_id"], None, self.now + self.cfg["route_lifetime"])
        if not rec.offer(reply):
            return
        route = self.routes.get(orig)
        if route is None or route.lifetime <= self.now:
            return
        fwd = packet.hop()
        if fwd.ttl > 0:
            self.port.unicast(fwd, route.next_hop)

    def _purge_relay(self):
        now = self.now
        for k in [k for k, r in self.relay.items() if r.reply_deadline <= now]:
            del self.relay[k]

    def handle_mact(self, packet, from_):
        flag = packet.fields["flag"]
        group = packet.group
        if flag == ACTIVATE:
            self._mact_activate(packet, from_)
            return
        m = self.mroutes.get(group)
        if m is None:
            return
        h = m.next_hops.get(from_)
        if h is None:
            return
        if flag == PRUNE:
            del m.next_hops[from_]
            if h.direction == UP:
                self.up_info.pop(group, None)
                self._lost_root(group)
            else:
                self._maybe_prune(group)
        elif flag == HANDOFF:
            # our upstream gave up; it now hangs below us
            m.next_hops[from_] = NextHop(DOWN, True, self.now)
            self.up_info.pop(group, None)
            self._lost_root(group, came_from=from_)
        elif flag == DISSOLVE and h.direction == UP:
            self._dissolve(group, packet.fields["leader"], exclude=from_)
        elif flag == UPDATE and h.direction == UP:
            if self.cache.seen(packet.uid, self.now):
                # our own update came back around: the branch is a loop, cut it here
                self._link_lost(group, from_)
                return
            f = packet.fields
            m.group_leader = f["leader"]
            m.hop_count_to_leader = f["hops"] + 1
            m.group_seq = max(m.group_seq, f["group_seq"])
            self.up_info[group] = self.now
            self._push_update(group, packet)

    def _mact_activate(self, packet, from_):
        group = packet.group
        f = packet.fields
        if self.on_tree(group):
            m = self.mroutes[group]
            if m.upstream == from_ or (f.get("merging") is not None and m.group_leader == f["merging"]):
                # we already belong to the merging tree; accepting would close a loop
                self.port.unicast(self.control(MACT, group, flag=PRUNE), from_)
                return
            self._link(m, from_, DOWN)
            m.group_seq = max(m.group_seq, f["group_seq"])
            # if the new branch closes a loop this update comes back to us
            self._push_update(group, only=from_)
            return
        rec = self.relay.get((f["rreq_origin"], f["rreq_id"]))
        if rec is None or rec.best_reply is None:
            return
        best = rec.best_reply
        m = self._entry(group)
        pending = self.discovery.pop(group, None)
        if pending is not None:
            self.port.cancel_timer(pending.timer)
        m.member_flag = group in self.groups
        m.group_leader = best.leader
        m.group_seq = max(m.group_seq, best.seq, f["group_seq"])
        m.hop_count_to_leader = best.hop_count + best.leader_hops
        self._link(m, best.next_hop, UP)
        self._link(m, from_, DOWN)
        self.up_info[group] = self.now
        self.port.unicast(packet.hop(group_seq=m.group_seq), best.next_hop)
        self._flush(group)

    def handle_group_hello(self, packet, from_):
        now = self.now
        first = not self.cache.seen(packet.uid, now)
        group = packet.group
        f = packet.fields
        leader = f["leader"]
        m = self.mroutes.get(group)
        if m is not None:
            self._check_neighbor_state(group, m, from_, f)
            m = self.mroutes.get(group)
        if m is not None:
            m.group_seq = max(m.group_seq, f["tree_seq"] if f["tree_leader"] == m.group_leader else 0,
                              packet.seq if leader == m.group_leader else 0)
        old = self.group_info.get(group)
        if old is None or old[0] != leader or packet.seq > old[1]:
            self.group_info[group] = (leader, packet.seq)
        if (m is not None and group in self.leading and leader != self.id and self.id < leader
                and group not in self.discovery):
            self._discover(group, "merge", target=leader)
        if first:
            fwd = packet.hop(**self._tree_fields(group))
            if fwd.ttl > 0:
                self._bcast(fwd)

    def _check_neighbor_state(self, group, m, nb, f):
        """Reconcile our view of the tree edge to ``nb`` with the state ``nb`` advertised."""
        h = m.next_hops.get(nb)
        if h is None or not h.activated or self.now - h.since < self.cfg["hello_interval"]:
            return
        if h.direction == UP:
            if f["tree_leader"] is None or self.id not in f["tree_down"]:
                self._link_lost(group, nb)
                return
            m.group_leader = f["tree_leader"]
            m.hop_count_to_leader = f["tree_hops"] + 1
            self.up_info[group] = self.now
        elif f["tree_up"] != self.id:
            del m.next_hops[nb]
            self._maybe_prune(group)

    # -- data

    def forward_data(self, packet, from_):
        if self.cache.seen(packet.uid, self.clock.now):
            return
        group = packet.group
        if group in self.groups:
            self.port.deliver(packet)
        m = self.mroutes.get(group)
        if m is None:
            return
        h = m.next_hops.get(from_)
        if h is None or not h.activated or packet.ttl <= 1:
            return
        self._send_down_tree(group, packet, from_)

    # -- link maintenance

    def timer_hello(self):
        now = self.now
        cfg = self.cfg
        if self.mroutes and now - self.last_bcast >= cfg["hello_interval"]:
            self._bcast(self.control(HELLO, ttl=1), jitter=False)
        timeout = cfg["hello_timeout"]
        watchdog = cfg["watchdog_periods"] * cfg["group_hello_period"]
        for group in list(self.mroutes):
            m = self.mroutes.get(group)
            if m is None:
                continue
            for nb in m.activated():
                if now - self.heard.get(nb, float("-inf")) > timeout and group in self.mroutes:
                    self._link_lost(group, nb)
            m = self.mroutes.get(group)
            if m is not None and m.upstream is not None and now - self.up_info.get(group, now) > watchdog:
                self._link_lost(group, m.upstream)
        self.port.set_timer(cfg["hello_interval"], "hello")

    def on_link_break(self, next_hop, packet):
        for group in list(self.mroutes):
            m = self.mroutes.get(group)
            if m is not None and next_hop in m.next_hops:
                self._link_lost(group, next_hop)

    def _link_lost(self, group, nb):
        m = self.mroutes.get(group)
        if m is None:
            return
        h = m.next_hops.pop(nb, None)
        if h is None:
            return
        if h.direction == UP:
            self.up_info.pop(group, None)
            if not m.downstream() and not self._retained(group):
                self._drop_entry(group)
                return
            # we are the node farther from the leader: repair
            self._discover(group, "repair")
        else:
            self._maybe_prune(group)

    def _maybe_prune(self, group):
        m = self.mroutes.get(group)
        if m is None or self._retained(group) or group in self.leading:
            return
        if m.downstream():
            return
        up = m.upstream
        self._drop_entry(group)
        pending = self.discovery.pop(group, None)
        if pending is not None:
            self.port.cancel_timer(pending.timer)
        if up is not None:
            self.port.unicast(self.control(MACT, group, flag=PRUNE), up)

    def _lost_root(self, group, came_from=None):
        """Our side of the tree lost its way to the leader and could not reconnect.

        ``came_from`` is the former upstream that handed the root role to us.
        """
        m = self.mroutes.get(group)
        if m is None:
            return
        if self._retained(group):
            self._become_leader(group)
            return
        down = [nb for nb in m.downstream() if nb != came_from]
        if not down:
            self._drop_entry(group)
            if came_from is not None:
                self.port.unicast(self.control(MACT, group, flag=PRUNE), came_from)
            return
        if len(down) == 1 and came_from is None:
            self._drop_entry(group)
            self.port.unicast(self.control(MACT, group, flag=PRUNE), down[0])
            return
        # keep the branch together: hand the root role to the lowest-id child
        child = down[0]
        m.next_hops[child] = NextHop(UP, True, self.now)
        self.up_info[group] = self.now
        self.port.unicast(self.control(MACT, group, flag=HANDOFF), child)

    def _dissolve(self, group, leader, exclude=None):
        """Tear down our tree so its members rejoin the tree led by ``leader``."""
        m = self.mroutes.get(group)
        if m is None:
            return
        for nb in m.activated():
            if nb != exclude:
                self.port.unicast(self.control(MACT, group, flag=DISSOLVE, leader=leader), nb)
        self._drop_entry(group)
        pending = self.discovery.pop(group, None)
        if pending is not None:
            self.port.cancel_timer(pending.timer)
        if group in self.groups:
            self._discover(group, "join", target=leader)


def tree_edges(nodes, group) -> set[tuple[int, int]]:
    """Activated (child, parent) edges of ``group`` as seen from each child."""
    edges = set()
    for node in nodes:
        m = node.mroutes.get(group)
        if m is not None and m.upstream is not None:
            edges.add((node.id, m.upstream))
    return edges


def leaders(nodes, group) -> list[int]:
    return sorted(n.id for n in nodes if n.is_leader(group))
