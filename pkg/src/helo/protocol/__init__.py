"""Roles, messages and the running system."""
from helo.protocol.messages import KC, PRIVATE_TYPES, SP, Message, Network, RoutingError, user_role
from helo.protocol.roles import (KeyCurator, ProtocolConfig, ProtocolError, ServiceProvider, SpRecord, User,
                                 sample_registration_noise)
from helo.protocol.system import HElo, PublicSetup, user_ids

__all__ = ["KC", "PRIVATE_TYPES", "SP", "Message", "Network", "RoutingError", "user_role", "KeyCurator",
           "ProtocolConfig", "ProtocolError", "ServiceProvider", "SpRecord", "User", "sample_registration_noise", "HElo",
           "PublicSetup", "user_ids"]
