"""Deterministic educational token economy.

Capped, burnable, owner-administered fungible token on a simulated chain,
plus a learn-to-earn reward policy engine, a transaction explorer, and an
HTTP/CLI service layer.
"""

from .chain import Block, Chain, Receipt, Transaction, replay
from .explorer import ExplorerIndex
from .rewards import PlatformEvent, PolicySet, RewardEngine, load_policy
from .token_core import BlockContext, TokenConfig, TokenState, TransferRecord

__all__ = [
    "Block",
    "BlockContext",
    "Chain",
    "ExplorerIndex",
    "PlatformEvent",
    "PolicySet",
    "Receipt",
    "RewardEngine",
    "TokenConfig",
    "TokenState",
    "Transaction",
    "TransferRecord",
    "load_policy",
    "replay",
]

__version__ = "0.1.0"
