import json

import pytest

from sestoken import chain as chain_mod
from sestoken.chain import Chain, Transaction, ZERO_HASH, canonical_json
from sestoken.errors import (
    BadNonceError,
    CorruptLogError,
    DuplicateTxError,
    NotFoundError,
    StaleTimestampError,
)
from sestoken.token_core import balance_of
from sestoken.units import address_from_int, tokens

from scenarios import MINERS, OWNER, random_chain, small_config

A1 = address_from_int(0xA1)
A2 = address_from_int(0xA2)
MINER = MINERS[0]


def transfer_call(to, amount):
    return {"op": "transfer", "to": to, "amount": str(amount)}


@pytest.fixture
def chain():
    return Chain(small_config())


class TestGenesis:
    def test_block_zero(self, chain):
        genesis = chain.get_block(0)
        assert genesis.number == 0
        assert genesis.parent_hash == ZERO_HASH
        assert genesis.tx_ids == ()
        assert balance_of(chain.state, OWNER) == tokens(700)

    def test_equal_inputs_equal_hash(self):
        a = Chain(small_config(), chain_seed=7)
        b = Chain(small_config(), chain_seed=7)
        assert a.state_hash() == b.state_hash()
        assert a.log[0]["entry_hash"] == b.log[0]["entry_hash"]

    def test_different_supply_different_hash(self):
        a = Chain(small_config(initial=700))
        b = Chain(small_config(initial=0))
        assert a.state_hash() != b.state_hash()


class TestSubmit:
    def test_nonce_sequence(self, chain):
        tx0 = Transaction(OWNER, 0, transfer_call(A1, tokens(1)))
        chain.submit_tx(tx0)
        with pytest.raises(BadNonceError):
            chain.submit_tx(Transaction(OWNER, 0, transfer_call(A2, tokens(1))))
        chain.submit_tx(Transaction(OWNER, 1, transfer_call(A2, tokens(1))))

    def test_duplicate_tx_id(self):
        # same content from the same sender needs a fresh nonce; replaying
        # an already-accepted nonce is bad-nonce, an identical tx is a dup
        chain = Chain(small_config())
        tx = Transaction(OWNER, 0, transfer_call(A1, tokens(1)))
        chain.submit_tx(tx)
        with pytest.raises((DuplicateTxError, BadNonceError)):
            chain.submit_tx(tx)

    def test_tx_id_is_content_digest(self):
        tx1 = Transaction(OWNER, 0, transfer_call(A1, tokens(1)))
        tx2 = Transaction(OWNER, 0, transfer_call(A1, tokens(1)))
        assert tx1.tx_id == tx2.tx_id
        tx3 = Transaction(OWNER, 0, transfer_call(A1, tokens(2)))
        assert tx1.tx_id != tx3.tx_id


class TestBlocks:
    def test_empty_block_keeps_state_hash(self, chain):
        before = chain.state_hash()
        block = chain.produce_block(MINER, 10)
        assert block.tx_ids == ()
        assert block.state_hash == before

    def test_poc_transfer_block(self):
        chain = Chain(small_config(cap=200_000_000, initial=70_000_000))
        tx_id = chain.submit_tx(
            Transaction(OWNER, 0, transfer_call(A1, tokens(1_000_000)))
        )
        chain.produce_block(MINER, 10)
        receipt = chain.get_receipt(tx_id)
        assert receipt.status == "success"
        assert receipt.records[0].amount == tokens(1_000_000)
        assert balance_of(chain.state, A1) == tokens(1_000_000)

    def test_three_reward_transfers(self):
        chain = Chain(small_config(block_reward=50, cap=10_000, initial=700))
        for i in range(3):
            chain.submit_tx(
                Transaction(OWNER, i, transfer_call(A1, tokens(1)))
            )
        chain.produce_block(MINER, 10)
        assert balance_of(chain.state, MINER) == tokens(150)

    def test_failed_tx_included_with_no_effect(self, chain):
        before = chain.state_hash()
        tx_id = chain.submit_tx(Transaction(A1, 0, transfer_call(A2, tokens(5))))
        chain.produce_block(MINER, 10)
        receipt = chain.get_receipt(tx_id)
        assert receipt.status == "failed"
        assert receipt.error == "insufficient-balance"
        assert receipt.records == ()
        assert chain.state_hash() == before

    def test_stale_timestamp(self, chain):
        chain.produce_block(MINER, 100)
        with pytest.raises(StaleTimestampError):
            chain.produce_block(MINER, 99)

    def test_parent_hash_links(self, chain):
        chain.produce_block(MINER, 5)
        chain.produce_block(MINER, 6)
        for number in range(1, len(chain.blocks)):
            assert (
                chain.blocks[number].parent_hash
                == chain.blocks[number - 1].block_hash
            )

    def test_inclusion_totality(self):
        chain = random_chain(seed=11)
        seen = [tx_id for b in chain.blocks for tx_id in b.tx_ids]
        assert sorted(seen) == sorted(chain.transactions)
        assert len(seen) == len(set(seen))
        assert set(seen) == set(chain.receipts)


class TestLookups:
    def test_get_block_not_found(self, chain):
        with pytest.raises(NotFoundError):
            chain.get_block(5)

    def test_get_receipt_not_found(self, chain):
        with pytest.raises(NotFoundError):
            chain.get_receipt("ff" * 32)


class TestStateHash:
    def test_single_base_unit_changes_hash(self):
        a = Chain(small_config())
        b = Chain(small_config())
        b.submit_tx(Transaction(OWNER, 0, transfer_call(A1, 1)))
        b.produce_block(MINER, 1)
        assert a.state_hash() != b.state_hash()


class TestReplay:
    def test_replay_matches_live_at_every_height(self):
        for seed in range(5):
            live = random_chain(seed=seed)
            rebuilt = chain_mod.replay(live.log)
            assert rebuilt.state_hash() == live.state_hash()
            for n, block in enumerate(live.blocks):
                assert rebuilt.blocks[n].state_hash == block.state_hash
                assert rebuilt.blocks[n].block_hash == block.block_hash

    def test_truncated_log_is_valid_prefix(self):
        live = random_chain(seed=3)
        prefix = chain_mod.replay(live.log[:3])
        assert len(prefix.log) == 3

    def test_mutated_payload_detected(self):
        live = random_chain(seed=4)
        entries = json.loads(json.dumps(live.log))
        entries[2]["payload"]["nonce" if "nonce" in entries[2]["payload"] else "timestamp"] = 999
        with pytest.raises(CorruptLogError):
            chain_mod.replay(entries)

    def test_single_byte_text_mutation_detected(self):
        live = random_chain(seed=5)
        text = "\n".join(canonical_json(e) for e in live.log)
        for pos in range(0, len(text), max(1, len(text) // 40)):
            if text[pos] == "\n":
                continue
            mutated = text[:pos] + ("x" if text[pos] != "x" else "y") + text[pos + 1 :]
            entries = []
            bad = False
            for line in mutated.splitlines():
                try:
                    entries.append(json.loads(line))
                except json.JSONDecodeError:
                    bad = True
                    break
            if bad:
                continue  # unparseable counts as detected
            with pytest.raises(CorruptLogError):
                chain_mod.replay(entries)

    def test_gap_detected(self):
        live = random_chain(seed=6)
        entries = [e for i, e in enumerate(live.log) if i != 1]
        with pytest.raises(CorruptLogError):
            chain_mod.replay(entries)

    def test_empty_log_rejected(self):
        with pytest.raises(CorruptLogError):
            chain_mod.replay([])
