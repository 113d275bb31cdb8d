"""Multicast protocol state machines and their shared contract."""

from .core import (CONTROL, DATA, DuplicateCache, Flooding, NodePort, Packet, ProtocolNode,
                   UnknownProtocol, protocol_names, register_protocol)

__all__ = ["CONTROL", "DATA", "DuplicateCache", "Flooding", "NodePort", "Packet", "ProtocolNode",
           "UnknownProtocol", "protocol_names", "register_protocol"]
