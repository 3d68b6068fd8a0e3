"""Learn-to-earn reward policy engine.

Maps platform events (course completed, peer helped, extension published…)
to token grants or points per a declarative policy, with idempotency keys,
per-actor daily limits, lifetime caps, points conversion and redemptions.
Rejections are data (a decision with a reason), not faults.

All timestamps come from the events themselves, never the wall clock, so
any event stream replays to the same decisions. Rate-limit days are UTC.
"""

from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Optional

import yaml

from .chain import Chain, Transaction
from .errors import (
    AlreadyUnlockedError,
    InsufficientBalanceError,
    InsufficientPointsError,
    InvalidPolicyError,
    NotDivisibleError,
    PolicyParseError,
    UnknownUnlockError,
)
from .token_core import balance_of
from .units import (
    UNIT,
    check_amount,
    normalize_address,
    parse_token_amount,
    require_nonzero,
)

EVENT_KINDS = frozenset(
    {
        "course_completed",
        "module_completed",
        "question_answered",
        "peer_helped",
        "content_contributed",
        "extension_published",
        "bug_fixed",
        "challenge_won",
        "milestone_reached",
    }
)

REJECT_REASONS = (
    "duplicate",
    "rate_limited",
    "lifetime_capped",
    "unknown_kind",
    "cap_exhausted",
    "treasury_insufficient",
)


@dataclass(frozen=True)
class PlatformEvent:
    event_id: str
    kind: str
    actor: str
    occurred_at: int  # unix seconds
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.event_id:
            raise InvalidPolicyError("event_id must be non-empty")
        object.__setattr__(self, "actor", normalize_address(self.actor))
        require_nonzero(self.actor)


@dataclass(frozen=True)
class RewardRule:
    kind: str
    reward: Optional[int] = None  # base units; exclusive with points
    points: Optional[int] = None
    per_actor_daily_limit: Optional[int] = None
    per_actor_lifetime_cap: Optional[int] = None  # same unit as the rule
    funding: str = "mint"  # "mint" | "treasury"


@dataclass(frozen=True)
class PolicySet:
    rules: dict  # kind -> RewardRule
    conversion_rate: int  # points per token; 0 when unused
    treasury: str
    unlocks: dict  # unlock_id -> price (base units)
    version: str = "1"


def load_policy(document) -> PolicySet:
    """Parse a YAML policy document (or an already-parsed mapping).

    Token amounts in the document are human decimal token strings and are
    converted exactly to base units."""
    if isinstance(document, str):
        try:
            document = yaml.safe_load(document)
        except yaml.YAMLError as exc:
            raise PolicyParseError(str(exc))
    if not isinstance(document, dict):
        raise PolicyParseError("policy document must be a mapping")

    try:
        treasury = require_nonzero(normalize_address(document["treasury"]))
    except KeyError:
        raise InvalidPolicyError("policy requires a treasury address")

    rules = {}
    any_points = False
    for raw in document.get("rules", []):
        if not isinstance(raw, dict) or "kind" not in raw:
            raise InvalidPolicyError("each rule needs a kind")
        kind = raw["kind"]
        if kind not in EVENT_KINDS:
            raise InvalidPolicyError(f"unknown event kind {kind!r}")
        if kind in rules:
            raise InvalidPolicyError(f"duplicate rule for kind {kind!r}")
        has_reward = "reward_tokens" in raw
        has_points = "points" in raw
        if has_reward == has_points:
            raise InvalidPolicyError(
                f"rule {kind!r} must set exactly one of reward_tokens/points"
            )
        reward = parse_token_amount(str(raw["reward_tokens"])) if has_reward else None
        points = None
        if has_points:
            points = int(raw["points"])
            if points <= 0:
                raise InvalidPolicyError("points must be positive")
            any_points = True
        daily = raw.get("per_actor_daily_limit")
        if daily is not None and int(daily) < 0:
            raise InvalidPolicyError("per_actor_daily_limit must be nonnegative")
        lifetime = raw.get("per_actor_lifetime_cap")
        if lifetime is not None:
            lifetime = (
                parse_token_amount(str(lifetime)) if has_reward else int(lifetime)
            )
            if lifetime < 0:
                raise InvalidPolicyError("per_actor_lifetime_cap must be nonnegative")
        funding = raw.get("funding", "mint")
        if funding not in ("mint", "treasury"):
            raise InvalidPolicyError(f"bad funding mode {funding!r}")
        rules[kind] = RewardRule(
            kind=kind,
            reward=reward,
            points=points,
            per_actor_daily_limit=None if daily is None else int(daily),
            per_actor_lifetime_cap=lifetime,
            funding=funding,
        )

    rate = int(document.get("conversion_rate", 0))
    if any_points and rate <= 0:
        raise InvalidPolicyError("conversion_rate required when points rules exist")

    unlocks = {}
    for unlock_id, price in (document.get("unlocks") or {}).items():
        unlocks[str(unlock_id)] = parse_token_amount(str(price))

    return PolicySet(
        rules=rules,
        conversion_rate=rate,
        treasury=treasury,
        unlocks=unlocks,
        version=str(document.get("version", "1")),
    )


@dataclass(frozen=True)
class RewardDecision:
    event_id: str
    outcome: str  # "granted" | "rejected"
    reason: Optional[str] = None
    tx_id: Optional[str] = None
    actor: Optional[str] = None
    kind: Optional[str] = None
    amount: int = 0  # token base units granted (0 for points grants)
    points: int = 0  # points credited
    occurred_at: int = 0
    seq: int = 0

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "event_id": self.event_id,
            "outcome": self.outcome,
            "reason": self.reason,
            "tx_id": self.tx_id,
            "actor": self.actor,
            "kind": self.kind,
            "amount": str(self.amount),
            "points": self.points,
            "occurred_at": self.occurred_at,
        }


def utc_day(timestamp: int) -> str:
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).strftime("%Y-%m-%d")


class RewardEngine:
    """Serial event processor on top of a chain.

    Each grant submits exactly one transaction and seals it into its own
    block, so a decision is final the moment it is returned."""

    def __init__(self, chain: Chain, policy: PolicySet, miner: Optional[str] = None,
                 on_decision=None):
        self.chain = chain
        self.policy = policy
        self.miner = miner or policy.treasury
        self.on_decision = on_decision
        self.decisions: list[RewardDecision] = []
        self.granted_ids: set[str] = set()
        self.daily_counts: dict[tuple, int] = {}  # (actor, kind, day) -> count
        self.lifetime_granted: dict[tuple, int] = {}  # (actor, kind) -> amount
        self.points: dict[str, int] = {}
        self.unlocked: set[tuple] = set()  # (actor, unlock_id)
        self._synthetic_seq = 0

    # --- helpers ------------------------------------------------------------

    def _record(self, decision: RewardDecision) -> RewardDecision:
        decision = replace(decision, seq=len(self.decisions))
        self.decisions.append(decision)
        if self.on_decision is not None:
            self.on_decision(decision)
        return decision

    def _block_timestamp(self, occurred_at: int) -> int:
        return max(occurred_at, self.chain.blocks[-1].timestamp)

    def _submit_and_seal(self, sender: str, call: dict, timestamp: int) -> str:
        tx = Transaction(sender=sender, nonce=self.chain.next_nonce(sender), call=call)
        tx_id = self.chain.submit_tx(tx)
        self.chain.produce_block(self.miner, self._block_timestamp(timestamp))
        receipt = self.chain.get_receipt(tx_id)
        assert receipt.status == "success", receipt.error  # pre-checked above
        return tx_id

    # --- operations -----------------------------------------------------------

    def handle_event(self, event: PlatformEvent) -> RewardDecision:
        rejected = lambda reason: self._record(
            RewardDecision(
                event_id=event.event_id,
                outcome="rejected",
                reason=reason,
                actor=event.actor,
                kind=event.kind,
                occurred_at=event.occurred_at,
            )
        )
        rule = self.policy.rules.get(event.kind)
        if rule is None:
            return rejected("unknown_kind")
        if event.event_id in self.granted_ids:
            return rejected("duplicate")
        day_key = (event.actor, event.kind, utc_day(event.occurred_at))
        if (
            rule.per_actor_daily_limit is not None
            and self.daily_counts.get(day_key, 0) >= rule.per_actor_daily_limit
        ):
            return rejected("rate_limited")
        grant_size = rule.reward if rule.reward is not None else rule.points
        life_key = (event.actor, event.kind)
        if (
            rule.per_actor_lifetime_cap is not None
            and self.lifetime_granted.get(life_key, 0) + grant_size
            > rule.per_actor_lifetime_cap
        ):
            return rejected("lifetime_capped")

        tx_id = None
        amount = 0
        points = 0
        if rule.reward is not None:
            amount = rule.reward
            if rule.funding == "treasury":
                if balance_of(self.chain.state, self.policy.treasury) < amount:
                    return rejected("treasury_insufficient")
                tx_id = self._submit_and_seal(
                    self.policy.treasury,
                    {"op": "transfer", "to": event.actor, "amount": str(amount)},
                    event.occurred_at,
                )
            else:
                if self.chain.state.total_supply + amount > self.chain.state.config.cap:
                    return rejected("cap_exhausted")
                tx_id = self._submit_and_seal(
                    self.chain.state.owner,
                    {"op": "mint", "to": event.actor, "amount": str(amount)},
                    event.occurred_at,
                )
        else:
            points = rule.points
            self.points[event.actor] = self.points.get(event.actor, 0) + points

        self.granted_ids.add(event.event_id)
        self.daily_counts[day_key] = self.daily_counts.get(day_key, 0) + 1
        self.lifetime_granted[life_key] = (
            self.lifetime_granted.get(life_key, 0) + grant_size
        )
        return self._record(
            RewardDecision(
                event_id=event.event_id,
                outcome="granted",
                tx_id=tx_id,
                actor=event.actor,
                kind=event.kind,
                amount=amount,
                points=points,
                occurred_at=event.occurred_at,
            )
        )

    def points_of(self, actor: str) -> int:
        return self.points.get(actor, 0)

    def convert_points(self, actor: str, points: int, occurred_at: int = 0) -> RewardDecision:
        actor = require_nonzero(normalize_address(actor))
        if points <= 0 or self.points.get(actor, 0) < points:
            raise InsufficientPointsError(f"{actor} holds {self.points.get(actor, 0)} points")
        rate = self.policy.conversion_rate
        if rate <= 0 or points % rate != 0:
            raise NotDivisibleError(f"{points} not divisible by rate {rate}")
        tokens = check_amount((points // rate) * UNIT)
        self._synthetic_seq += 1
        event_id = f"convert:{actor}:{self._synthetic_seq}"
        if self.chain.state.total_supply + tokens > self.chain.state.config.cap:
            return self._record(
                RewardDecision(
                    event_id=event_id,
                    outcome="rejected",
                    reason="cap_exhausted",
                    actor=actor,
                    occurred_at=occurred_at,
                )
            )
        self.points[actor] = self.points[actor] - points
        tx_id = self._submit_and_seal(
            self.chain.state.owner,
            {"op": "mint", "to": actor, "amount": str(tokens)},
            occurred_at,
        )
        return self._record(
            RewardDecision(
                event_id=event_id,
                outcome="granted",
                tx_id=tx_id,
                actor=actor,
                amount=tokens,
                points=-points,
                occurred_at=occurred_at,
            )
        )

    def redeem(self, actor: str, unlock_id: str, occurred_at: int = 0) -> RewardDecision:
        actor = require_nonzero(normalize_address(actor))
        if unlock_id not in self.policy.unlocks:
            raise UnknownUnlockError(unlock_id)
        if (actor, unlock_id) in self.unlocked:
            raise AlreadyUnlockedError(f"{actor} already unlocked {unlock_id}")
        price = self.policy.unlocks[unlock_id]
        if balance_of(self.chain.state, actor) < price:
            raise InsufficientBalanceError(f"{actor} holds less than {price}")
        tx_id = self._submit_and_seal(
            actor,
            {"op": "transfer", "to": self.policy.treasury, "amount": str(price)},
            occurred_at,
        )
        self.unlocked.add((actor, unlock_id))
        self._synthetic_seq += 1
        return self._record(
            RewardDecision(
                event_id=f"redeem:{actor}:{unlock_id}",
                outcome="granted",
                tx_id=tx_id,
                actor=actor,
                amount=0,
                occurred_at=occurred_at,
            )
        )

    def leaderboard(self, start: int, end: int, limit: int = 10):
        """Top earners of granted tokens in [start, end), ranked by amount
        desc, then by earlier first grant, then by address."""
        totals: dict[str, int] = {}
        first_seq: dict[str, int] = {}
        for d in self.decisions:
            if d.outcome != "granted" or d.amount <= 0:
                continue
            if not start <= d.occurred_at < end:
                continue
            totals[d.actor] = totals.get(d.actor, 0) + d.amount
            first_seq.setdefault(d.actor, d.seq)
        ranked = sorted(
            totals.items(), key=lambda kv: (-kv[1], first_seq[kv[0]], kv[0])
        )
        return ranked[:limit]
