"""ADMR: adaptive demand-driven multicast with source-specific trees.

Receivers attach by flooding a MULTICAST SOLICITATION (answered by active
sources with a unicast KEEP-ALIVE) or by answering the source's periodic
RECEIVER DISCOVERY flood; the RECEIVER JOIN that follows lays down
forwarder state hop by hop.  Forwarders rebroadcast data, and hearing a
child's rebroadcast is the passive acknowledgement that keeps the branch
alive.  Nodes watch the packet rate: a forwarder that misses enough
packets repairs with a hop-limited RECONNECT, a receiver re-solicits.
Receivers with persistent loss can ask the source to flood for a while.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import DEFAULT_TTL, DUP_HORIZON, DuplicateCache, ProtocolNode, register

SOLICITATION = "MULTICAST_SOLICITATION"
KEEP_ALIVE = "KEEP_ALIVE"
RECEIVER_JOIN = "RECEIVER_JOIN"
RECEIVER_DISCOVERY = "RECEIVER_DISCOVERY"
REPAIR_NOTIFICATION = "REPAIR_NOTIFICATION"
RECONNECT = "RECONNECT"
RECONNECT_REPLY = "RECONNECT_REPLY"
EXPLICIT_ACK = "EXPLICIT_ACK"
FLOOD_REQUEST = "FLOOD_REQUEST"

DEFAULTS = {
    "repair_threshold": 3,
    "reconnect_ttl": 3,
    "discovery_period": 30.0,
    "ack_miss_limit": 5,
    "explicit_ack_every": 8,
    "fallback_pdr": 0.5,
    "fallback_window": 20,
    "fallback_exit": 0.8,
    "interval_weight": 0.25,
    "repair_timeout": 1.0,
    "repair_hop_delay": 0.05,
    "monitor_period": 0.25,
    "flood_lease": 5.0,
    "flood_request_gap": 2.0,
    "source_idle": 1.0,
    "source_idle_periods": 2.0,
    "orphan_timeout": 10.0,
    "dup_horizon": DUP_HORIZON,
}


@dataclass
class AckState:
    last_confirmed: float
    consecutive_missed: int = 0
    explicit: bool = False


@dataclass
class SourceTreeState:
    source: int
    group: int
    receiver: bool = False
    upstream: int | None = None
    downstream: dict[int, AckState] = field(default_factory=dict)
    last_data_at: float = 0.0
    last_seq: int = -1
    first_seq: int = -1
    missed_count: int = 0
    expected_interval: float | None = None
    hops: int = 0
    rx_seqs: set = field(default_factory=set)
    rx_count: int = 0
    # repair bookkeeping for the current silence episode
    repairing: str | None = None
    repair_timer: object = None
    due_timer: object = None
    reconnect_used: bool = False
    solicit_used: bool = False
    cancelled: bool = False
    # flood fallback (receiver side)
    flood_wanted: bool = False
    flood_requested_at: float = float("-inf")
    lease_seen: float = float("-inf")

    @property
    def role(self) -> str:
        if self.downstream:
            return "forwarder"
        return "receiver" if self.receiver else "idle"


@dataclass
class _SourceFlow:
    active: bool = False
    last_app: float = float("-inf")
    discovery_timer: object = None
    flood_until: float = float("-inf")
    floods_granted: int = 0
    interval: float | None = None


@register("admr")
class AdmrNode(ProtocolNode):
    name = "admr"

    def __init__(self, port, config=None):
        super().__init__(port, config)
        cfg = dict(DEFAULTS)
        cfg.update(self.config)
        self.cfg = cfg
        self.cache = DuplicateCache(cfg["dup_horizon"])
        self.states: dict[tuple[int, int], SourceTreeState] = {}
        self.flows: dict[int, _SourceFlow] = {}
        self.toward: dict[int, int] = {}  # node -> previous hop the last flood/unicast from it came through
        self.reconnect_back: dict[int, int] = {}
        self.group_sources: dict[int, set[int]] = {}
        self.repairs = 0
        self.solicitations = 0

    @property
    def now(self) -> float:
        return self.clock.now

    # -- lifecycle

    def start(self):
        self.port.set_timer(self.port.rng.random() * self.cfg["monitor_period"], "monitor")

    def join(self, group):
        super().join(group)
        for (s, g), st in self.states.items():
            if g == group:
                st.receiver = True
        if not self._connected_any(group):
            self._solicit(group)

    def _connected_any(self, group) -> bool:
        return any(g == group and self._connected(st) for (s, g), st in self.states.items() if s != self.id)

    def _connected(self, st: SourceTreeState) -> bool:
        if st.upstream is None:
            return False
        if st.expected_interval is None:
            return True
        limit = self.cfg["repair_threshold"] * st.expected_interval
        return self.now - st.last_data_at <= limit

    def _state(self, source, group) -> SourceTreeState:
        key = (source, group)
        st = self.states.get(key)
        if st is None:
            st = SourceTreeState(source, group, receiver=group in self.groups and source != self.id,
                                 last_data_at=self.now)
            self.states[key] = st
        return st

    def _drop_state(self, st: SourceTreeState):
        for handle in (st.repair_timer, st.due_timer):
            if handle is not None:
                self.port.cancel_timer(handle)
        self.states.pop((st.source, st.group), None)

    def _solicit(self, group, flood_request: bool = False, source: int | None = None):
        self.solicitations += 1
        pkt = self.control(SOLICITATION, group, flood_request=flood_request, source=source)
        self.cache.seen(pkt.uid, self.now)
        self.port.broadcast(pkt)

    # -- source side

    def _source_active(self, group) -> bool:
        fl = self.flows.get(group)
        if fl is None or not fl.active:
            return False
        idle = self.cfg["source_idle"]
        if fl.interval is not None:
            idle = min(idle, self.cfg["source_idle_periods"] * fl.interval)
        return self.now - fl.last_app <= idle

    def on_app_data(self, group, packet):
        now = self.now
        fl = self.flows.setdefault(group, _SourceFlow())
        if fl.last_app > float("-inf"):
            gap = now - fl.last_app
            fl.interval = gap if fl.interval is None else min(fl.interval, gap)
        fl.last_app = now
        self.cache.seen(packet.uid, now)
        st = self._state(self.id, group)
        self._account_forward(st)
        if now < fl.flood_until:
            packet.fields["flood"] = True
            packet.fields["lease"] = fl.flood_until
        if not fl.active:
            fl.active = True
            self._discovery(group, packet)
            return
        self.port.broadcast(packet)

    def _discovery(self, group, data=None):
        fl = self.flows[group]
        pkt = self.control(RECEIVER_DISCOVERY, group, data=data)
        self.cache.seen(pkt.uid, self.now)
        self.port.broadcast(pkt)
        fl.discovery_timer = self.port.set_timer(self.cfg["discovery_period"], "discovery", group)

    def timer_discovery(self, group):
        fl = self.flows[group]
        fl.discovery_timer = None
        if not self._source_active(group):
            fl.active = False
            return
        self._discovery(group)

    # -- receive path

    def on_packet(self, packet, from_):
        if packet.kind == "data":
            self.forward_data(packet, from_)
            return
        handler = _HANDLERS.get(packet.ptype)
        if handler is not None:
            handler(self, packet, from_)

    def handle_solicitation(self, packet, from_):
        if self.cache.seen(packet.uid, self.now):
            return
        receiver = packet.origin
        self.toward[receiver] = from_
        group = packet.group
        if self.flows.get(group) is not None and self._source_active(group):
            if packet.fields.get("flood_request"):
                self._grant_flood(group)
            ka = self.control(KEEP_ALIVE, group, receiver=receiver)
            self.port.unicast(ka, from_)
            return
        fwd = packet.hop()
        if fwd.ttl > 0:
            self.port.broadcast(fwd, jitter=True)

    def handle_keep_alive(self, packet, from_):
        source = packet.origin
        self.toward[source] = from_
        receiver = packet.fields["receiver"]
        if receiver == self.id:
            st = self._state(source, packet.group)
            if not self._connected(st) or st.upstream is None:
                self._send_join(st, from_)
            return
        nxt = self.toward.get(receiver)
        if nxt is not None:
            fwd = packet.hop()
            if fwd.ttl > 0:
                self.port.unicast(fwd, nxt)

    def _send_join(self, st: SourceTreeState, via: int, receiver: bool = True):
        st.upstream = via
        join = self.control(RECEIVER_JOIN, st.group, source=st.source, receiver=receiver)
        self.port.unicast(join, via)

    def handle_receiver_join(self, packet, from_):
        source = packet.fields["source"]
        group = packet.group
        st = self._state(source, group)
        link = st.downstream.get(from_)
        if link is None:
            st.downstream[from_] = AckState(self.now, 0, bool(packet.fields["receiver"]))
        else:
            link.consecutive_missed = 0
        if source == self.id or st.upstream is not None:
            return
        nxt = self.toward.get(source)
        if nxt is None:
            return
        st.upstream = nxt
        fwd = packet.hop(receiver=False)
        if fwd.ttl > 0:
            self.port.unicast(fwd, nxt)

    def handle_discovery(self, packet, from_):
        if self.cache.seen(packet.uid, self.now):
            return
        source = packet.origin
        group = packet.group
        self.toward[source] = from_
        self.group_sources.setdefault(group, set()).add(source)
        data = packet.fields.get("data")
        if data is not None and not self.cache.seen(data.uid, self.now):
            if group in self.groups:
                self.port.deliver(data)
            st = self.states.get((source, group))
            if st is not None:
                self._note_data(st, data, from_, packet.hops + 1)
        if group in self.groups and source != self.id:
            st = self._state(source, group)
            if not self._connected(st):
                self._send_join(st, from_)
        fwd = packet.hop()
        if fwd.ttl > 0:
            self.port.broadcast(fwd, jitter=True)

    # -- data path

    def forward_data(self, packet, from_):
        now = self.clock.now
        key = (packet.origin, packet.group)
        st = self.states.get(key)
        if self.cache.seen(packet.uid, now):
            # an overheard rebroadcast by a child is its passive acknowledgement
            if st is not None:
                link = st.downstream.get(from_)
                if link is not None:
                    link.last_confirmed = now
                    link.consecutive_missed = 0
                    link.explicit = False
            return
        group = packet.group
        if group in self.groups:
            self.port.deliver(packet)
        flood = packet.fields.get("flood", False)
        if st is not None:
            self._note_data(st, packet, from_, packet.hops + 1)
        if packet.ttl <= 1:
            return
        if flood or (st is not None and st.downstream):
            if st is not None:
                self._account_forward(st)
            self.port.broadcast(packet.hop(), jitter=True)
        elif st is not None and st.receiver and st.upstream is not None:
            k = int(self.cfg["explicit_ack_every"])
            if st.rx_count % k == 0:
                ack = self.control(EXPLICIT_ACK, group, source=st.source, seq=packet.seq)
                self.port.unicast(ack, st.upstream)

    def _note_data(self, st: SourceTreeState, packet, from_, hops):
        now = self.now
        seq = packet.seq
        if st.last_seq >= 0 and seq > st.last_seq:
            gap = (now - st.last_data_at) / (seq - st.last_seq)
            w = self.cfg["interval_weight"]
            st.expected_interval = gap if st.expected_interval is None else (1 - w) * st.expected_interval + w * gap
        if seq > st.last_seq:
            st.last_seq = seq
            st.last_data_at = now
        if st.first_seq < 0:
            st.first_seq = seq
        if packet.fields.get("flood"):
            st.lease_seen = max(st.lease_seen, packet.fields["lease"])
        st.hops = hops
        st.missed_count = 0
        st.rx_count += 1
        st.rx_seqs.add(seq)
        if len(st.rx_seqs) > 2 * self.cfg["fallback_window"]:
            lo = st.last_seq - self.cfg["fallback_window"]
            st.rx_seqs = {q for q in st.rx_seqs if q > lo}
        # data flows again: the silence episode is over
        if st.repairing is not None and st.repair_timer is not None:
            self.port.cancel_timer(st.repair_timer)
        st.repairing = None
        st.repair_timer = None
        st.reconnect_used = st.solicit_used = st.cancelled = False
        if st.upstream is None and st.receiver and from_ != self.id:
            st.upstream = from_
        if st.receiver:
            self._check_fallback(st)

    def _account_forward(self, st: SourceTreeState):
        """Charge one expected confirmation to every downstream link; expire silent ones."""
        limit = int(self.cfg["ack_miss_limit"])
        k = int(self.cfg["explicit_ack_every"])
        dead = []
        for nb, link in st.downstream.items():
            link.consecutive_missed += 1
            if link.consecutive_missed > (limit * k if link.explicit else limit):
                dead.append(nb)
        for nb in dead:
            del st.downstream[nb]
        if dead and not st.downstream and not st.receiver and st.source != self.id:
            self._drop_state(st)

    def handle_explicit_ack(self, packet, from_):
        st = self.states.get((packet.fields["source"], packet.group))
        if st is None:
            return
        link = st.downstream.get(from_)
        if link is None:
            st.downstream[from_] = AckState(self.now, 0, True)
        else:
            link.last_confirmed = self.now
            link.consecutive_missed = 0
            link.explicit = True

    # -- traffic monitoring and repair

    def timer_monitor(self):
        if self.states:
            now = self.now
            cfg = self.cfg
            for st in list(self.states.values()):
                if st.source == self.id:
                    continue
                if st.expected_interval is None:
                    if not st.receiver and now - st.last_data_at > cfg["orphan_timeout"]:
                        self._drop_state(st)
                    continue
                silence = now - st.last_data_at
                st.missed_count = int(silence / st.expected_interval)
                if st.flood_wanted and silence <= cfg["flood_lease"]:
                    # loss already seen on arrivals: keep asking for a while even if nothing gets through
                    self._check_fallback(st)
                delay = cfg["repair_threshold"] * st.expected_interval + st.hops * cfg["repair_hop_delay"]
                if st.repairing in (None, "given_up") and silence > delay + cfg["repair_timeout"] \
                        and (st.cancelled or st.repairing == "given_up"):
                    # nobody repaired this branch in time: forwarding state goes silently
                    if not st.receiver:
                        self._drop_state(st)
                        continue
                    st.downstream.clear()
                    st.upstream = None
                if st.repairing is not None or st.cancelled:
                    continue
                if silence > delay:
                    self._start_repair(st)
                elif delay - silence < cfg["monitor_period"] and st.due_timer is None:
                    # hit the deadline exactly so upstream nodes keep their head start
                    st.due_timer = self.port.set_timer(delay - silence + 1e-6, "repair_due", st.source, st.group)
        self.port.set_timer(self.cfg["monitor_period"], "monitor")

    def timer_repair_due(self, source, group):
        st = self.states.get((source, group))
        if st is None:
            return
        st.due_timer = None
        if st.repairing is not None or st.cancelled or st.expected_interval is None:
            return
        delay = self.cfg["repair_threshold"] * st.expected_interval + st.hops * self.cfg["repair_hop_delay"]
        if self.now - st.last_data_at > delay:
            self._start_repair(st)

    def _start_repair(self, st: SourceTreeState):
        if st.downstream and not st.reconnect_used:
            st.reconnect_used = True
            st.repairing = "reconnect"
            self.repairs += 1
            note = self.control(REPAIR_NOTIFICATION, st.group, source=st.source, ttl=1)
            self.cache.seen(note.uid, self.now)
            self.port.broadcast(note)
            rc = self.control(RECONNECT, st.group, ttl=int(self.cfg["reconnect_ttl"]), source=st.source,
                              up=False)
            self.cache.seen(rc.uid, self.now)
            self.port.broadcast(rc)
            st.repair_timer = self.port.set_timer(self.cfg["repair_timeout"], "repair_timeout",
                                                  st.source, st.group)
        elif st.receiver and not st.solicit_used:
            st.solicit_used = True
            st.repairing = "solicit"
            self.repairs += 1
            self._solicit(st.group, flood_request=st.flood_wanted, source=st.source)
            st.repair_timer = self.port.set_timer(self.cfg["repair_timeout"], "repair_timeout",
                                                  st.source, st.group)
        elif not st.receiver:
            # nothing left worth keeping: forwarding state is silently removed
            self._drop_state(st)
        else:
            st.repairing = "given_up"

    def timer_repair_timeout(self, source, group):
        st = self.states.get((source, group))
        if st is None:
            return
        st.repair_timer = None
        if self._connected(st) and st.repairing is None:
            return
        kind = st.repairing
        st.repairing = None
        if kind == "reconnect":
            st.downstream.clear()
            st.upstream = None
            if st.receiver:
                # escalate: the receiver part re-solicits
                self._start_repair(st)
            else:
                self._drop_state(st)
        elif kind == "solicit":
            st.repairing = "given_up"

    def handle_repair_notification(self, packet, from_):
        if self.cache.seen(packet.uid, self.now):
            return
        st = self.states.get((packet.fields["source"], packet.group))
        if st is None or st.upstream != from_:
            return
        # upstream is already repairing for us
        st.cancelled = True
        if st.repair_timer is not None and st.repairing is not None:
            self.port.cancel_timer(st.repair_timer)
            st.repair_timer = None
            st.repairing = None
        if st.downstream:
            self.port.broadcast(packet.hop(ttl=1))

    def handle_reconnect(self, packet, from_):
        source = packet.fields["source"]
        group = packet.group
        if packet.fields["up"]:
            # travelling up the tree by unicast; a second visit means an upstream loop
            if self.cache.seen(("up", packet.uid), self.now):
                return
            self.reconnect_back[packet.uid] = from_
            self._reconnect_up(packet, source, group)
            return
        if self.cache.seen(packet.uid, self.now):
            return
        self.reconnect_back[packet.uid] = from_
        st = self.states.get((source, group))
        if source == self.id or (st is not None and self._connected(st) and packet.origin != self.id):
            self._reconnect_up(packet, source, group)
            return
        fwd = packet.hop()
        if fwd.ttl > 0:
            self.port.broadcast(fwd, jitter=True)

    def _reconnect_up(self, packet, source, group):
        self.cache.seen(("up", packet.uid), self.now)
        if source == self.id:
            if self._source_active(group):
                reply = self.control(RECONNECT_REPLY, group, source=source, ref=packet.uid,
                                     repairer=packet.origin)
                self.port.unicast(reply, self.reconnect_back[packet.uid])
            return
        st = self.states.get((source, group))
        if st is None or st.upstream is None:
            return
        fwd = packet.hop(up=True)
        if not packet.fields["up"]:
            # the scoped search is over; the climb gets a fresh hop budget
            fwd.ttl = DEFAULT_TTL
        if fwd.ttl > 0:
            self.port.unicast(fwd, st.upstream)

    def handle_reconnect_reply(self, packet, from_):
        f = packet.fields
        if self.cache.seen(("reply", f["ref"]), self.now):
            return
        source = f["source"]
        st = self._state(source, packet.group)
        if f["repairer"] == self.id:
            st.upstream = from_
            if st.repair_timer is not None:
                self.port.cancel_timer(st.repair_timer)
            st.repair_timer = None
            st.repairing = None
            st.last_data_at = self.now
            return
        nxt = self.reconnect_back.get(f["ref"])
        if nxt is None:
            return
        if st.upstream is None:
            st.upstream = from_
        link = st.downstream.get(nxt)
        if link is None:
            st.downstream[nxt] = AckState(self.now)
        else:
            link.consecutive_missed = 0
        self.port.unicast(packet.hop(), nxt)

    # -- flood fallback

    def _window_ratio(self, st: SourceTreeState) -> float | None:
        # only gaps between packets that did arrive count: silence is the repair logic's business
        w = int(self.cfg["fallback_window"])
        lo = st.last_seq - w + 1
        if st.first_seq < 0 or lo < st.first_seq:
            return None
        return sum(1 for q in st.rx_seqs if q >= lo) / w

    def _check_fallback(self, st: SourceTreeState):
        ratio = self._window_ratio(st)
        if ratio is None:
            return
        cfg = self.cfg
        if st.flood_wanted:
            if ratio >= cfg["fallback_exit"]:
                st.flood_wanted = False
                return
        elif ratio < cfg["fallback_pdr"]:
            st.flood_wanted = True
        now = self.now
        gap = cfg["flood_request_gap"]
        lease = cfg["flood_lease"]
        if not st.flood_wanted or now - st.flood_requested_at < gap or st.lease_seen - now > lease - gap:
            return
        # a request counts as answered once a lease starting after it shows up on the data
        answered = st.flood_requested_at == float("-inf") or st.lease_seen >= st.flood_requested_at + lease - 1e-6
        st.flood_requested_at = now
        if answered and st.upstream is not None and self._connected(st):
            req = self.control(FLOOD_REQUEST, st.group, source=st.source)
            self.port.unicast(req, st.upstream)
        else:
            # the tree path is gone or lossy: piggyback the request on a solicitation
            self._solicit(st.group, flood_request=True, source=st.source)

    def handle_flood_request(self, packet, from_):
        source = packet.fields["source"]
        if source == self.id:
            if self._source_active(packet.group):
                self._grant_flood(packet.group)
            return
        st = self.states.get((source, packet.group))
        if st is None or st.upstream is None:
            return
        fwd = packet.hop()
        if fwd.ttl > 0:
            self.port.unicast(fwd, st.upstream)

    def _grant_flood(self, group):
        fl = self.flows[group]
        fl.flood_until = self.now + self.cfg["flood_lease"]
        fl.floods_granted += 1

    # -- failures

    def on_link_break(self, next_hop, packet):
        for st in self.states.values():
            if st.upstream == next_hop:
                st.upstream = None
            st.downstream.pop(next_hop, None)


_HANDLERS = {
    SOLICITATION: AdmrNode.handle_solicitation,
    KEEP_ALIVE: AdmrNode.handle_keep_alive,
    RECEIVER_JOIN: AdmrNode.handle_receiver_join,
    RECEIVER_DISCOVERY: AdmrNode.handle_discovery,
    REPAIR_NOTIFICATION: AdmrNode.handle_repair_notification,
    RECONNECT: AdmrNode.handle_reconnect,
    RECONNECT_REPLY: AdmrNode.handle_reconnect_reply,
    EXPLICIT_ACK: AdmrNode.handle_explicit_ack,
    FLOOD_REQUEST: AdmrNode.handle_flood_request,
}


def forwarders(nodes, source, group) -> list[int]:
    return sorted(n.id for n in nodes
                  if n.id != source and (source, group) in n.states and n.states[(source, group)].downstream)

