"""Protocol-facing contract shared by every multicast protocol.

A protocol node sees only its own events: application data, received
packets, its timers and link-break notifications.  It acts only through
its :class:`NodePort` (transmit, set timers, deliver to the application).
"""

from __future__ import annotations

from collections import deque
from typing import Callable

CONTROL = "control"
DATA = "data"

DEFAULT_TTL = 32
REBROADCAST_JITTER = 0.010
DUP_HORIZON = 30.0


class Packet:
    """A frame on the air.  Forwarding makes a copy via :meth:`hop`."""

    __slots__ = ("uid", "kind", "ptype", "origin", "group", "seq", "ttl", "size", "hops", "fields")

    def __init__(self, uid: int, kind: str, ptype: str, origin: int, group: int = -1, seq: int = 0,
                 ttl: int = DEFAULT_TTL, size: int = 64, hops: int = 0, fields: dict | None = None):
        self.uid = uid
        self.kind = kind
        self.ptype = ptype
        self.origin = origin
        self.group = group
        self.seq = seq
        self.ttl = ttl
        self.size = size
        self.hops = hops
        self.fields = fields if fields is not None else {}

    @property
    def is_control(self) -> bool:
        return self.kind == CONTROL

    def hop(self, **updates) -> "Packet":
        """Copy for retransmission: ttl - 1, hops + 1, optional field updates."""
        fields = self.fields
        if updates:
            fields = dict(fields)
            fields.update(updates)
        return Packet(self.uid, self.kind, self.ptype, self.origin, self.group, self.seq,
                      self.ttl - 1, self.size, self.hops + 1, fields)

    def copy(self, **updates) -> "Packet":
        fields = dict(self.fields)
        fields.update(updates)
        return Packet(self.uid, self.kind, self.ptype, self.origin, self.group, self.seq,
                      self.ttl, self.size, self.hops, fields)

    def __repr__(self):
        return f"{self.ptype}#{self.uid}(o={self.origin},g={self.group},s={self.seq},ttl={self.ttl})"


class DuplicateCache:
    """Remembers recently seen keys until ``horizon`` seconds after first sighting."""

    def __init__(self, horizon: float = DUP_HORIZON):
        self.horizon = horizon
        self._seen: dict = {}
        self._expiry: deque = deque()

    def seen(self, key, now: float) -> bool:
        """True if ``key`` was already cached; otherwise cache it and return False."""
        if self._expiry and self._expiry[0][0] <= now:
            self._purge(now)
        if key in self._seen:
            return True
        exp = now + self.horizon
        self._seen[key] = exp
        self._expiry.append((exp, key))
        return False

    def __contains__(self, key) -> bool:
        return key in self._seen

    def __len__(self) -> int:
        return len(self._seen)

    def _purge(self, now: float):
        exp = self._expiry
        while exp and exp[0][0] <= now:
            _, key = exp.popleft()
            self._seen.pop(key, None)


class NodePort:
    """The only window a protocol node has onto the simulated world."""

    __slots__ = ("node_id", "_world", "rng", "clock")

    def __init__(self, node_id: int, world, rng):
        self.node_id = node_id
        self._world = world
        self.rng = rng
        self.clock = world.sim

    @property
    def now(self) -> float:
        return self.clock.now

    def new_uid(self) -> int:
        return self._world.new_uid()

    def broadcast(self, packet: Packet, jitter: bool = False):
        if jitter:
            self._world.sim.schedule_in(self.rng.random() * REBROADCAST_JITTER, self._world.medium.transmit,
                                        self.node_id, packet, None, node=self.node_id)
        else:
            self._world.medium.transmit(self.node_id, packet)

    def unicast(self, packet: Packet, next_hop: int):
        self._world.medium.transmit(self.node_id, packet, next_hop)

    def set_timer(self, delay: float, name: str, *args):
        node = self._world.nodes[self.node_id]
        return self._world.sim.schedule_in(delay, node.on_timer, name, *args, node=self.node_id)

    def cancel_timer(self, handle) -> bool:
        return self._world.sim.cancel(handle)

    def deliver(self, packet: Packet):
        self._world.ledger.record_delivery(self.node_id, packet)

    def is_member(self, group: int) -> bool:
        return group in self._world.nodes[self.node_id].groups


class ProtocolNode:
    """Base per-node protocol state machine.

    Subclasses override the ``on_*`` hooks.  Timers are dispatched by name
    to ``timer_<name>`` methods.
    """

    name = "base"

    def __init__(self, port: NodePort, config: dict | None = None):
        self.port = port
        self.clock = port.clock
        self.id = port.node_id
        self.config = dict(config or {})
        self.groups: set[int] = set()

    def start(self):
        pass

    def join(self, group: int):
        self.groups.add(group)

    def leave(self, group: int):
        self.groups.discard(group)

    def on_app_data(self, group: int, packet: Packet):
        raise NotImplementedError

    def on_packet(self, packet: Packet, from_: int):
        raise NotImplementedError

    def on_timer(self, name: str, *args):
        getattr(self, "timer_" + name)(*args)

    def on_link_break(self, next_hop: int, packet: Packet):
        pass

    def control(self, ptype: str, group: int = -1, ttl: int = DEFAULT_TTL, size: int = 48, **fields) -> Packet:
        return Packet(self.port.new_uid(), CONTROL, ptype, self.id, group, 0, ttl, size, 0, fields)


class Flooding(ProtocolNode):
    """Blind flooding of every data packet; the delivery-ceiling baseline."""

    name = "flooding"

    def __init__(self, port, config=None):
        super().__init__(port, config)
        self.cache = DuplicateCache(self.config.get("dup_horizon", DUP_HORIZON))

    def on_app_data(self, group, packet):
        self.cache.seen(packet.uid, self.port.now)
        self.port.broadcast(packet)

    def on_packet(self, packet, from_):
        self.flood_forward(packet)

    def flood_forward(self, packet: Packet) -> bool:
        """Cache, deliver if member, rebroadcast while ttl remains.  False for duplicates."""
        if self.cache.seen(packet.uid, self.port.now):
            return False
        if packet.group in self.groups:
            self.port.deliver(packet)
        fwd = packet.hop()
        if fwd.ttl > 0:
            self.port.broadcast(fwd, jitter=True)
        return True


class UnknownProtocol(KeyError):
    pass


_REGISTRY: dict[str, Callable] = {}


def register(name: str):
    def deco(cls):
        _REGISTRY[name.lower()] = cls
        return cls
    return deco


register("flooding")(Flooding)


def register_protocol(name: str):
    """Factory for the named protocol (case-insensitive)."""
    # importing the protocol modules populates the registry
    from . import admr, maodv, odmrp  # noqa: F401

    try:
        return _REGISTRY[name.lower()]
    except KeyError:
        raise UnknownProtocol(f"unknown protocol {name!r}; expected one of {sorted(_REGISTRY)}") from None


def protocol_names() -> list[str]:
    from . import admr, maodv, odmrp  # noqa: F401

    return sorted(_REGISTRY)
