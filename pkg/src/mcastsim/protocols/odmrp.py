"""ODMRP: mesh multicast built from periodic JOIN QUERY floods.

Members answer each query with a JOIN REPLY that walks the stored
previous-hop chain back to the source; every node relaying a reply holds
soft forwarding-group state for the group until ``fg_timeout``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import DUP_HORIZON, DuplicateCache, ProtocolNode, register

JOIN_QUERY = "JOIN_QUERY"
JOIN_REPLY = "JOIN_REPLY"


@dataclass
class QueryCacheEntry:
    source: int
    group: int
    query_seq: int
    previous_hop: int
    received_at: float


@dataclass
class _SourceFlow:
    query_seq: int = 0
    last_app: float = -1.0
    active: bool = False
    timer: object = None
    mesh_round: int = -1


@register("odmrp")
class OdmrpNode(ProtocolNode):
    name = "odmrp"

    def __init__(self, port, config=None):
        super().__init__(port, config)
        self.query_period = float(self.config.get("query_period", 3.0))
        self.fg_timeout = float(self.config.get("fg_timeout", 3.0 * self.query_period))
        self.flow_idle = float(self.config.get("flow_idle", 2.0 * self.query_period))
        self.cache = DuplicateCache(self.config.get("dup_horizon", DUP_HORIZON))
        self.query_cache: dict[tuple[int, int], QueryCacheEntry] = {}
        self.fg_expires: dict[int, float] = {}
        self.replied: dict[tuple[int, int], int] = {}
        self.sources: dict[int, _SourceFlow] = {}
        self.stale_replies = 0

    # -- forwarding group soft state

    def forwarding(self, group: int) -> bool:
        return self.port.now < self.fg_expires.get(group, -1.0)

    # -- source side

    def on_app_data(self, group, packet):
        now = self.port.now
        st = self.sources.setdefault(group, _SourceFlow())
        st.last_app = now
        self.cache.seen(packet.uid, now)
        if not st.active:
            st.active = True
            self._send_query(group, packet)
            st.timer = self.port.set_timer(self.query_period, "query", group)
        else:
            self.port.broadcast(packet)

    def timer_query(self, group):
        st = self.sources[group]
        if self.port.now - st.last_app > self.flow_idle:
            st.active = False
            st.timer = None
            return
        self._send_query(group, None)
        st.timer = self.port.set_timer(self.query_period, "query", group)

    def _send_query(self, group, data):
        st = self.sources[group]
        st.query_seq += 1
        q = self.control(JOIN_QUERY, group, data=data)
        q.seq = st.query_seq
        self.cache.seen(q.uid, self.port.now)
        self.port.broadcast(q)

    # -- receive path

    def on_packet(self, packet, from_):
        if packet.kind == "data":
            self.forward_data(packet, from_)
        elif packet.ptype == JOIN_QUERY:
            self.handle_query(packet, from_)
        elif packet.ptype == JOIN_REPLY:
            self.handle_reply(packet, from_)

    def handle_query(self, packet, from_):
        now = self.port.now
        if self.cache.seen(packet.uid, now):
            return
        key = (packet.origin, packet.group)
        self.query_cache[key] = QueryCacheEntry(packet.origin, packet.group, packet.seq, from_, now)
        data = packet.fields.get("data")
        if data is not None and not self.cache.seen(data.uid, now) and packet.group in self.groups:
            self.port.deliver(data)
        fwd = packet.hop()
        if fwd.ttl > 0:
            self.port.broadcast(fwd, jitter=True)
        if packet.group in self.groups:
            self.replied[key] = packet.seq
            reply = self.control(JOIN_REPLY, packet.group, source=packet.origin, query_seq=packet.seq)
            self.port.unicast(reply, from_)

    def handle_reply(self, packet, from_):
        now = self.port.now
        source = packet.fields["source"]
        qseq = packet.fields["query_seq"]
        if source == self.id:
            st = self.sources.get(packet.group)
            if st is not None:
                st.mesh_round = max(st.mesh_round, qseq)
            return
        key = (source, packet.group)
        entry = self.query_cache.get(key)
        if entry is None or now - entry.received_at > self.fg_timeout:
            self.stale_replies += 1
            return
        self.fg_expires[packet.group] = now + self.fg_timeout
        if self.replied.get(key, -1) >= qseq:
            return
        self.replied[key] = qseq
        fwd = packet.hop()
        if fwd.ttl > 0:
            self.port.unicast(fwd, entry.previous_hop)

    def forward_data(self, packet, from_):
        now = self.clock.now
        if self.cache.seen(packet.uid, now):
            return
        if packet.group in self.groups:
            self.port.deliver(packet)
        if now < self.fg_expires.get(packet.group, -1.0) and packet.ttl > 1:
            self.port.broadcast(packet.hop(), jitter=True)
