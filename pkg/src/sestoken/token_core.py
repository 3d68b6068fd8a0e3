"""Capped, burnable, owner-administered fungible token state machine.

Pure functions over immutable snapshots: every mutating operation validates
all preconditions against the incoming state, then returns a fresh
``TokenState`` plus the transfer records it produced, in execution order.
A failed operation raises and leaves the caller's state untouched.

Balance-moving transfers run a before-transfer hook that may mint a miner
reward to the block's coinbase first; the hook skips its own mint (the
non-recursion guard) and skips silently when the cap has no headroom.
"""

from dataclasses import dataclass, replace
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Optional

from .errors import (
    CapExceededError,
    InsufficientAllowanceError,
    InsufficientBalanceError,
    InvalidConfigError,
    NotOwnerError,
    TokenDestroyedError,
)
from .units import ZERO_ADDRESS, check_amount, normalize_address, require_nonzero

DECIMALS = 18


class RecordKind(str, Enum):
    TRANSFER = "transfer"
    MINT = "mint"
    BURN = "burn"
    MINER_REWARD = "miner_reward"


@dataclass(frozen=True)
class TransferRecord:
    src: str  # ZERO_ADDRESS for mints / miner rewards
    dst: str  # ZERO_ADDRESS for burns
    amount: int
    kind: RecordKind

    def __post_init__(self):
        if self.kind in (RecordKind.MINT, RecordKind.MINER_REWARD):
            assert self.src == ZERO_ADDRESS
        if self.kind is RecordKind.BURN:
            assert self.dst == ZERO_ADDRESS


@dataclass(frozen=True)
class TokenConfig:
    name: str
    symbol: str
    cap: int
    initial_supply: int
    owner: str
    block_reward: int
    decimals: int = DECIMALS

    def validate(self) -> "TokenConfig":
        if not self.name or not self.symbol:
            raise InvalidConfigError("name and symbol must be non-empty")
        check_amount(self.cap)
        check_amount(self.initial_supply)
        check_amount(self.block_reward)
        if self.cap == 0:
            raise InvalidConfigError("cap must be positive")
        if self.initial_supply > self.cap:
            raise InvalidConfigError("initial_supply exceeds cap")
        if self.decimals != DECIMALS:
            raise InvalidConfigError("decimals is fixed at 18")
        require_nonzero(normalize_address(self.owner))
        return self


@dataclass(frozen=True)
class BlockContext:
    block_number: int
    coinbase: str
    timestamp: int

    def __post_init__(self):
        require_nonzero(self.coinbase)


@dataclass(frozen=True)
class TokenState:
    config: TokenConfig
    balances: Mapping[str, int]  # no zero-valued entries
    allowances: Mapping[tuple, int]  # (owner, spender) -> amount, no zeros
    total_supply: int
    block_reward: int
    owner: str
    destroyed: bool = False


def init(config: TokenConfig) -> tuple[TokenState, list[TransferRecord]]:
    """Deploy: premint initial_supply to the owner."""
    config.validate()
    owner = normalize_address(config.owner)
    balances = {}
    records = []
    if config.initial_supply > 0:
        balances[owner] = config.initial_supply
        records.append(
            TransferRecord(ZERO_ADDRESS, owner, config.initial_supply, RecordKind.MINT)
        )
    state = TokenState(
        config=config,
        balances=MappingProxyType(balances),
        allowances=MappingProxyType({}),
        total_supply=config.initial_supply,
        block_reward=config.block_reward,
        owner=owner,
    )
    return state, records


def balance_of(state: TokenState, addr: str) -> int:
    return state.balances.get(addr, 0)


def total_supply(state: TokenState) -> int:
    return state.total_supply


def allowance(state: TokenState, owner: str, spender: str) -> int:
    return state.allowances.get((owner, spender), 0)


def _require_live(state: TokenState):
    if state.destroyed:
        raise TokenDestroyedError("token has been destroyed")


def _with_balances(state: TokenState, balances: dict) -> TokenState:
    return replace(state, balances=MappingProxyType(balances))


def _set_balance(balances: dict, addr: str, value: int):
    # normalization rule: absence means zero
    if value == 0:
        balances.pop(addr, None)
    else:
        balances[addr] = value


def before_token_transfer(
    state: TokenState, ctx: BlockContext, src: str, dst: str, amount: int
) -> tuple[TokenState, Optional[TransferRecord]]:
    """Hook run once before every balance-moving record except the reward
    mint itself. Mints block_reward to the coinbase unless the move IS the
    reward mint (non-recursion guard) or the cap has no headroom."""
    if src == ZERO_ADDRESS and dst == ctx.coinbase:
        return state, None
    reward = state.block_reward
    if reward == 0 or state.total_supply + reward > state.config.cap:
        return state, None
    balances = dict(state.balances)
    _set_balance(balances, ctx.coinbase, balances.get(ctx.coinbase, 0) + reward)
    new = replace(
        _with_balances(state, balances), total_supply=state.total_supply + reward
    )
    return new, TransferRecord(ZERO_ADDRESS, ctx.coinbase, reward, RecordKind.MINER_REWARD)


def _move(
    state: TokenState, ctx: BlockContext, src: str, dst: str, amount: int
) -> tuple[TokenState, list[TransferRecord]]:
    """Hook + balance move. Preconditions (incl. balance) are checked against
    the pre-hook state so failures never leave a partial reward mint."""
    if balance_of(state, src) < amount:
        raise InsufficientBalanceError(f"{src} holds less than {amount}")
    records = []
    state, reward_rec = before_token_transfer(state, ctx, src, dst, amount)
    if reward_rec is not None:
        records.append(reward_rec)
    balances = dict(state.balances)
    _set_balance(balances, src, balances.get(src, 0) - amount)
    _set_balance(balances, dst, balances.get(dst, 0) + amount)
    state = _with_balances(state, balances)
    records.append(TransferRecord(src, dst, amount, RecordKind.TRANSFER))
    return state, records


def transfer(
    state: TokenState, ctx: BlockContext, src: str, dst: str, amount: int
) -> tuple[TokenState, list[TransferRecord]]:
    _require_live(state)
    require_nonzero(src)
    require_nonzero(dst)
    check_amount(amount)
    return _move(state, ctx, src, dst, amount)


def approve(state: TokenState, caller: str, spender: str, amount: int) -> TokenState:
    _require_live(state)
    require_nonzero(caller)
    require_nonzero(spender)
    check_amount(amount)
    allowances = dict(state.allowances)
    if amount == 0:
        allowances.pop((caller, spender), None)
    else:
        allowances[(caller, spender)] = amount
    return replace(state, allowances=MappingProxyType(allowances))


def transfer_from(
    state: TokenState, ctx: BlockContext, spender: str, src: str, dst: str, amount: int
) -> tuple[TokenState, list[TransferRecord]]:
    _require_live(state)
    require_nonzero(spender)
    require_nonzero(src)
    require_nonzero(dst)
    check_amount(amount)
    allowed = allowance(state, src, spender)
    if allowed < amount:
        raise InsufficientAllowanceError(f"allowance {allowed} < {amount}")
    state, records = _move(state, ctx, src, dst, amount)
    allowances = dict(state.allowances)
    remaining = allowed - amount
    if remaining == 0:
        allowances.pop((src, spender), None)
    else:
        allowances[(src, spender)] = remaining
    return replace(state, allowances=MappingProxyType(allowances)), records


def _require_owner(state: TokenState, caller: str):
    if caller != state.owner:
        raise NotOwnerError(f"{caller} is not the contract owner")


def mint(
    state: TokenState, caller: str, dst: str, amount: int
) -> tuple[TokenState, list[TransferRecord]]:
    _require_live(state)
    _require_owner(state, caller)
    require_nonzero(dst)
    check_amount(amount)
    if state.total_supply + amount > state.config.cap:
        raise CapExceededError("mint would exceed the cap")
    balances = dict(state.balances)
    _set_balance(balances, dst, balances.get(dst, 0) + amount)
    state = replace(
        _with_balances(state, balances), total_supply=state.total_supply + amount
    )
    return state, [TransferRecord(ZERO_ADDRESS, dst, amount, RecordKind.MINT)]


def _burn_balance(
    state: TokenState, holder: str, amount: int
) -> tuple[TokenState, list[TransferRecord]]:
    if balance_of(state, holder) < amount:
        raise InsufficientBalanceError(f"{holder} holds less than {amount}")
    balances = dict(state.balances)
    _set_balance(balances, holder, balances.get(holder, 0) - amount)
    state = replace(
        _with_balances(state, balances), total_supply=state.total_supply - amount
    )
    return state, [TransferRecord(holder, ZERO_ADDRESS, amount, RecordKind.BURN)]


def burn(
    state: TokenState, caller: str, amount: int
) -> tuple[TokenState, list[TransferRecord]]:
    _require_live(state)
    require_nonzero(caller)
    check_amount(amount)
    return _burn_balance(state, caller, amount)


def burn_from(
    state: TokenState, caller: str, src: str, amount: int
) -> tuple[TokenState, list[TransferRecord]]:
    _require_live(state)
    require_nonzero(caller)
    require_nonzero(src)
    check_amount(amount)
    allowed = allowance(state, src, caller)
    if allowed < amount:
        raise InsufficientAllowanceError(f"allowance {allowed} < {amount}")
    state, records = _burn_balance(state, src, amount)
    allowances = dict(state.allowances)
    remaining = allowed - amount
    if remaining == 0:
        allowances.pop((src, caller), None)
    else:
        allowances[(src, caller)] = remaining
    return replace(state, allowances=MappingProxyType(allowances)), records


def set_block_reward(state: TokenState, caller: str, amount: int) -> TokenState:
    _require_live(state)
    _require_owner(state, caller)
    check_amount(amount)
    return replace(state, block_reward=amount)


def destroy(
    state: TokenState, caller: str, treasury: Optional[str] = None
) -> tuple[TokenState, list[TransferRecord]]:
    """Freeze the token; the treasury's remaining balance (if any) is
    recovered to the owner. Views keep working afterwards."""
    _require_live(state)
    _require_owner(state, caller)
    records = []
    balances = dict(state.balances)
    if treasury is not None and treasury != state.owner:
        recovered = balances.get(treasury, 0)
        if recovered > 0:
            _set_balance(balances, treasury, 0)
            _set_balance(balances, state.owner, balances.get(state.owner, 0) + recovered)
            records.append(
                TransferRecord(treasury, state.owner, recovered, RecordKind.TRANSFER)
            )
    state = replace(_with_balances(state, balances), destroyed=True)
    return state, records
