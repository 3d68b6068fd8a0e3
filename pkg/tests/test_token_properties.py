"""Invariant suites for the token state machine, driven by hypothesis."""

import pytest
from hypothesis import given, settings, strategies as st

from sestoken import token_core
from sestoken.errors import SesError
from sestoken.token_core import BlockContext
from sestoken.units import address_from_int, tokens

from scenarios import MINERS, OWNER, PARTIES, naive_supply, small_config

addresses = st.sampled_from(PARTIES)
amounts = st.integers(min_value=0, max_value=150).map(tokens)


def op_strategy():
    return st.one_of(
        st.tuples(st.just("transfer"), addresses, addresses, amounts),
        st.tuples(st.just("approve"), addresses, addresses, amounts),
        st.tuples(st.just("transfer_from"), addresses, addresses, amounts),
        st.tuples(st.just("mint"), addresses, addresses, amounts),
        st.tuples(st.just("burn"), addresses, addresses, amounts),
        st.tuples(st.just("burn_from"), addresses, addresses, amounts),
        st.tuples(st.just("set_block_reward"), addresses, addresses,
                  st.integers(min_value=0, max_value=3).map(tokens)),
    )


def apply_op(state, ctx, op):
    kind, a, b, amount = op
    if kind == "transfer":
        return token_core.transfer(state, ctx, a, b, amount)[0]
    if kind == "approve":
        return token_core.approve(state, a, b, amount)
    if kind == "transfer_from":
        return token_core.transfer_from(state, ctx, a, OWNER, b, amount)[0]
    if kind == "mint":
        return token_core.mint(state, a, b, amount)[0]
    if kind == "burn":
        return token_core.burn(state, a, amount)[0]
    if kind == "burn_from":
        return token_core.burn_from(state, a, b, amount)[0]
    return token_core.set_block_reward(state, a, amount)


@given(ops=st.lists(op_strategy(), max_size=40), seed=st.integers(0, 2**16))
@settings(max_examples=150, deadline=None)
def test_conservation_and_cap(ops, seed):
    state, _ = token_core.init(small_config(block_reward=seed % 3))
    for i, op in enumerate(ops):
        ctx = BlockContext(1 + i // 5, MINERS[seed % len(MINERS)], 12 * (1 + i // 5))
        try:
            state = apply_op(state, ctx, op)
        except SesError:
            pass
        assert naive_supply(state) == state.total_supply
        assert state.total_supply <= state.config.cap
        assert all(v > 0 for v in state.balances.values())


@given(ops=st.lists(op_strategy(), max_size=30))
@settings(max_examples=100, deadline=None)
def test_atomicity_failed_op_leaves_state_identical(ops):
    state, _ = token_core.init(small_config())
    ctx = BlockContext(1, MINERS[0], 12)
    for op in ops:
        before = state
        try:
            state = apply_op(state, ctx, op)
        except SesError:
            # pre-state object untouched: same mappings, same scalars
            assert state is before
            assert dict(before.balances) == dict(state.balances)


@given(a=addresses, b=addresses, amount=amounts)
@settings(max_examples=60, deadline=None)
def test_transfer_antisymmetry(a, b, amount):
    state, _ = token_core.init(small_config())
    ctx = BlockContext(1, MINERS[0], 12)
    try:
        mid, _ = token_core.transfer(state, ctx, a, b, amount)
        back, _ = token_core.transfer(mid, ctx, b, a, amount)
    except SesError:
        return
    assert token_core.balance_of(back, a) == token_core.balance_of(state, a)
    assert token_core.balance_of(back, b) == token_core.balance_of(state, b)


@given(approved=amounts, spent=amounts)
@settings(max_examples=60, deadline=None)
def test_allowance_consumed_exactly_on_success(approved, spent):
    state, _ = token_core.init(small_config())
    spender = address_from_int(0x55)
    dest = PARTIES[3]
    state = token_core.approve(state, OWNER, spender, approved)
    ctx = BlockContext(1, MINERS[0], 12)
    before = token_core.allowance(state, OWNER, spender)
    try:
        state, _ = token_core.transfer_from(state, ctx, spender, OWNER, dest, spent)
    except SesError:
        assert token_core.allowance(state, OWNER, spender) == before
        return
    assert before - token_core.allowance(state, OWNER, spender) == spent


@given(k=st.integers(0, 20), reward=st.integers(1, 5).map(tokens))
@settings(max_examples=40, deadline=None)
def test_reward_count_k_transfers(k, reward):
    state, _ = token_core.init(small_config(cap=100000, initial=700))
    state = token_core.set_block_reward(state, OWNER, reward)
    miner = MINERS[0]
    ctx = BlockContext(2, miner, 24)
    before = token_core.balance_of(state, miner)
    for _ in range(k):
        state, _ = token_core.transfer(state, ctx, OWNER, PARTIES[4], tokens(1))
    assert token_core.balance_of(state, miner) == before + k * reward


def test_owner_gating_mutates_nothing():
    state, _ = token_core.init(small_config())
    intruder = PARTIES[5]
    for call in (
        lambda: token_core.mint(state, intruder, intruder, tokens(1)),
        lambda: token_core.set_block_reward(state, intruder, tokens(1)),
        lambda: token_core.destroy(state, intruder),
    ):
        with pytest.raises(SesError) as exc:
            call()
        assert exc.value.code == "not-owner"
    assert naive_supply(state) == state.total_supply
