import pytest

from sestoken.chain import Chain
from sestoken.errors import (
    AlreadyUnlockedError,
    InsufficientBalanceError,
    InsufficientPointsError,
    InvalidPolicyError,
    NotDivisibleError,
    UnknownUnlockError,
)
from sestoken.rewards import PlatformEvent, RewardEngine, load_policy
from sestoken.token_core import balance_of
from sestoken.units import address_from_int, tokens

from scenarios import OWNER, TREASURY, small_config

STUDENT = address_from_int(0x30)
HELPER = address_from_int(0x31)
DEV = address_from_int(0x32)

DAY = 86_400

POLICY_YAML = f"""
version: "test"
treasury: "{TREASURY}"
conversion_rate: 10
rules:
  - kind: course_completed
    reward_tokens: "100"
  - kind: question_answered
    points: 10
    per_actor_daily_limit: 5
  - kind: peer_helped
    reward_tokens: "25"
    per_actor_daily_limit: 2
  - kind: extension_published
    reward_tokens: "500"
  - kind: challenge_won
    reward_tokens: "75"
    per_actor_lifetime_cap: "150"
  - kind: bug_fixed
    reward_tokens: "40"
    funding: treasury
unlocks:
  premium_uml_pack: "20"
"""


def make_engine(cap=100_000, initial=700, fund_treasury=0):
    chain = Chain(small_config(cap=cap, initial=initial))
    engine = RewardEngine(chain, load_policy(POLICY_YAML))
    if fund_treasury:
        from sestoken.chain import Transaction

        chain.submit_tx(
            Transaction(OWNER, 0, {
                "op": "transfer", "to": TREASURY, "amount": str(tokens(fund_treasury)),
            })
        )
        chain.produce_block(TREASURY, 1)
    return engine


def event(event_id, kind="course_completed", actor=STUDENT, at=1_700_000_000):
    return PlatformEvent(event_id=event_id, kind=kind, actor=actor, occurred_at=at)


class TestPolicyLoading:
    def test_loads_rules(self):
        policy = load_policy(POLICY_YAML)
        assert policy.rules["course_completed"].reward == tokens(100)
        assert policy.rules["question_answered"].points == 10
        assert policy.unlocks["premium_uml_pack"] == tokens(20)

    def test_duplicate_kind_rejected(self):
        doc = {
            "treasury": TREASURY,
            "rules": [
                {"kind": "course_completed", "reward_tokens": "1"},
                {"kind": "course_completed", "reward_tokens": "2"},
            ],
        }
        with pytest.raises(InvalidPolicyError):
            load_policy(doc)

    def test_points_without_rate_rejected(self):
        doc = {
            "treasury": TREASURY,
            "rules": [{"kind": "question_answered", "points": 5}],
        }
        with pytest.raises(InvalidPolicyError):
            load_policy(doc)

    def test_reward_and_points_exclusive(self):
        doc = {
            "treasury": TREASURY,
            "conversion_rate": 10,
            "rules": [{"kind": "peer_helped", "reward_tokens": "1", "points": 2}],
        }
        with pytest.raises(InvalidPolicyError):
            load_policy(doc)

    def test_unparseable_document(self):
        from sestoken.errors import PolicyParseError

        with pytest.raises(PolicyParseError):
            load_policy("rules: [unclosed")


class TestHandleEvent:
    def test_grant_mints_to_student(self):
        engine = make_engine()
        decision = engine.handle_event(event("e1"))
        assert decision.outcome == "granted"
        assert decision.tx_id is not None
        assert balance_of(engine.chain.state, STUDENT) == tokens(100)

    def test_duplicate_event_id(self):
        engine = make_engine()
        engine.handle_event(event("e1"))
        decision = engine.handle_event(event("e1"))
        assert decision.outcome == "rejected"
        assert decision.reason == "duplicate"
        assert balance_of(engine.chain.state, STUDENT) == tokens(100)

    def test_unknown_kind(self):
        engine = make_engine()
        decision = engine.handle_event(event("e1", kind="module_completed"))
        assert decision.reason == "unknown_kind"

    def test_daily_limit(self):
        engine = make_engine()
        for i in range(2):
            assert engine.handle_event(
                event(f"h{i}", kind="peer_helped", actor=HELPER)
            ).outcome == "granted"
        third = engine.handle_event(event("h2", kind="peer_helped", actor=HELPER))
        assert third.reason == "rate_limited"
        # next UTC day resets the counter
        nxt = engine.handle_event(
            event("h3", kind="peer_helped", actor=HELPER, at=1_700_000_000 + DAY)
        )
        assert nxt.outcome == "granted"

    def test_lifetime_cap(self):
        engine = make_engine()
        assert engine.handle_event(event("c1", kind="challenge_won")).outcome == "granted"
        assert engine.handle_event(event("c2", kind="challenge_won")).outcome == "granted"
        capped = engine.handle_event(event("c3", kind="challenge_won"))
        assert capped.reason == "lifetime_capped"

    def test_extension_published_reward(self):
        engine = make_engine()
        decision = engine.handle_event(event("x1", kind="extension_published", actor=DEV))
        assert decision.outcome == "granted"
        assert balance_of(engine.chain.state, DEV) == tokens(500)

    def test_cap_exhausted(self):
        engine = make_engine(cap=750, initial=700)
        decision = engine.handle_event(event("e1"))  # 100 SES > 50 SES headroom
        assert decision.reason == "cap_exhausted"
        assert balance_of(engine.chain.state, STUDENT) == 0

    def test_treasury_funding_and_exhaustion(self):
        engine = make_engine(fund_treasury=50)
        first = engine.handle_event(event("b1", kind="bug_fixed", actor=DEV))
        assert first.outcome == "granted"
        assert balance_of(engine.chain.state, DEV) == tokens(40)
        assert balance_of(engine.chain.state, TREASURY) == tokens(10)
        second = engine.handle_event(event("b2", kind="bug_fixed", actor=DEV))
        assert second.reason == "treasury_insufficient"

    def test_points_rule_credits_points(self):
        engine = make_engine()
        decision = engine.handle_event(event("q1", kind="question_answered"))
        assert decision.outcome == "granted"
        assert decision.points == 10
        assert engine.points_of(STUDENT) == 10
        assert balance_of(engine.chain.state, STUDENT) == 0


class TestPointsConversion:
    def _engine_with_points(self, n_events=5):
        engine = make_engine()
        for i in range(n_events):
            engine.handle_event(
                event(f"q{i}", kind="question_answered", at=1_700_000_000 + i * DAY)
            )
        return engine

    def test_convert(self):
        engine = self._engine_with_points()
        decision = engine.convert_points(STUDENT, 50)
        assert decision.outcome == "granted"
        assert engine.points_of(STUDENT) == 0
        assert balance_of(engine.chain.state, STUDENT) == tokens(5)

    def test_not_divisible(self):
        engine = self._engine_with_points(6)  # 60 points held
        with pytest.raises(NotDivisibleError):
            engine.convert_points(STUDENT, 55)

    def test_insufficient_points(self):
        engine = self._engine_with_points(1)
        with pytest.raises(InsufficientPointsError):
            engine.convert_points(STUDENT, 20)

    def test_points_conservation(self):
        engine = self._engine_with_points()
        engine.convert_points(STUDENT, 20)
        credited = sum(d.points for d in engine.decisions if d.points > 0)
        converted = -sum(d.points for d in engine.decisions if d.points < 0)
        assert credited - converted == engine.points_of(STUDENT)


class TestRedeem:
    def _funded_engine(self):
        engine = make_engine()
        engine.handle_event(event("e1"))  # student +100
        return engine

    def test_redeem_moves_price_to_treasury(self):
        engine = self._funded_engine()
        decision = engine.redeem(STUDENT, "premium_uml_pack")
        assert decision.outcome == "granted"
        assert balance_of(engine.chain.state, STUDENT) == tokens(80)
        assert balance_of(engine.chain.state, TREASURY) == tokens(20)

    def test_redeem_twice(self):
        engine = self._funded_engine()
        engine.redeem(STUDENT, "premium_uml_pack")
        with pytest.raises(AlreadyUnlockedError):
            engine.redeem(STUDENT, "premium_uml_pack")

    def test_unknown_unlock(self):
        engine = self._funded_engine()
        with pytest.raises(UnknownUnlockError):
            engine.redeem(STUDENT, "nope")

    def test_insufficient_balance(self):
        engine = make_engine()
        with pytest.raises(InsufficientBalanceError):
            engine.redeem(STUDENT, "premium_uml_pack")
        assert balance_of(engine.chain.state, TREASURY) == 0


class TestLeaderboard:
    def test_empty_window(self):
        engine = make_engine()
        assert engine.leaderboard(0, 10) == []

    def test_ranked_by_amount(self):
        engine = make_engine()
        engine.handle_event(event("a", actor=STUDENT))  # 100
        engine.handle_event(event("b", kind="peer_helped", actor=HELPER))  # 25
        board = engine.leaderboard(0, 2_000_000_000)
        assert board == [(STUDENT, tokens(100)), (HELPER, tokens(25))]

    def test_tie_broken_by_first_grant(self):
        engine = make_engine()
        engine.handle_event(event("a", actor=HELPER))
        engine.handle_event(event("b", actor=STUDENT))
        board = engine.leaderboard(0, 2_000_000_000)
        assert board[0][0] == HELPER

    def test_window_filters(self):
        engine = make_engine()
        engine.handle_event(event("a", at=100))
        engine.handle_event(event("b", actor=HELPER, at=5000))
        board = engine.leaderboard(0, 1000)
        assert board == [(STUDENT, tokens(100))]


class TestDecisionLogCompleteness:
    def test_one_decision_per_event_and_amount_matches_chain(self):
        engine = make_engine()
        ids = ["a", "a", "b", "c", "c", "d"]
        for i, eid in enumerate(ids):
            engine.handle_event(event(eid, kind="peer_helped", actor=HELPER, at=100 + i * DAY))
        assert len(engine.decisions) == len(ids)
        granted = sum(d.amount for d in engine.decisions if d.outcome == "granted")
        on_chain = sum(
            rec.amount
            for receipt in engine.chain.receipts.values()
            for rec in receipt.records
            if rec.dst == HELPER
        )
        assert granted == on_chain
