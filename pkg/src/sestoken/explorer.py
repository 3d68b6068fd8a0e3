"""Etherscan-analog index over chain output.

A pure index: everything here is derivable from blocks + receipts (and the
genesis premint), so it can always be rebuilt from the ledger log. Deltas
are signed only in this view layer.
"""

import io
import csv
from dataclasses import dataclass
from typing import Optional

from .chain import Block, Chain, Receipt, Transaction
from .errors import NotFoundError, OutOfOrderBlockError
from .token_core import RecordKind, TransferRecord
from .units import ZERO_ADDRESS


@dataclass(frozen=True)
class AccountHistoryEntry:
    tx_id: Optional[str]  # None for the genesis premint
    block_number: int
    counterparty: str
    delta: int  # signed, base units
    kind: RecordKind
    running_balance: int


@dataclass(frozen=True)
class SupplyPoint:
    block_number: int
    total_supply: int


class ExplorerIndex:
    def __init__(self):
        self.histories: dict[str, list[AccountHistoryEntry]] = {}
        self.txs: dict[str, tuple[Transaction, Receipt]] = {}
        self.supply: list[SupplyPoint] = []
        self.next_block = 0

    def _post(self, addr: str, tx_id, block_number, counterparty, delta, kind):
        history = self.histories.setdefault(addr, [])
        previous = history[-1].running_balance if history else 0
        history.append(
            AccountHistoryEntry(
                tx_id=tx_id,
                block_number=block_number,
                counterparty=counterparty,
                delta=delta,
                kind=kind,
                running_balance=previous + delta,
            )
        )

    def _post_record(self, rec: TransferRecord, tx_id, block_number):
        # ZERO-address legs (mint/burn/reward) appear in one history only
        if rec.src != ZERO_ADDRESS:
            self._post(rec.src, tx_id, block_number, rec.dst, -rec.amount, rec.kind)
        if rec.dst != ZERO_ADDRESS:
            self._post(rec.dst, tx_id, block_number, rec.src, rec.amount, rec.kind)

    def _supply_delta(self, rec: TransferRecord) -> int:
        if rec.kind in (RecordKind.MINT, RecordKind.MINER_REWARD):
            return rec.amount
        if rec.kind is RecordKind.BURN:
            return -rec.amount
        return 0

    def index_genesis(self, chain: Chain):
        """Index block 0 and the premint it carries."""
        if self.next_block != 0:
            raise OutOfOrderBlockError("genesis already indexed")
        supply = 0
        for rec in chain.genesis_records:
            self._post_record(rec, None, 0)
            supply += self._supply_delta(rec)
        self.supply.append(SupplyPoint(0, supply))
        self.next_block = 1

    def index_block(self, block: Block, receipts_with_txs):
        """Ingest one block in order; re-indexing an already-seen block is a
        no-op. ``receipts_with_txs`` is a list of (Transaction, Receipt)."""
        if block.number < self.next_block:
            return
        if block.number != self.next_block:
            raise OutOfOrderBlockError(
                f"expected block {self.next_block}, got {block.number}"
            )
        supply = self.supply[-1].total_supply
        for tx, receipt in receipts_with_txs:
            self.txs[tx.tx_id] = (tx, receipt)
            for rec in receipt.records:
                self._post_record(rec, tx.tx_id, block.number)
                supply += self._supply_delta(rec)
        self.supply.append(SupplyPoint(block.number, supply))
        self.next_block = block.number + 1

    def index_chain(self, chain: Chain):
        """Catch up with everything the chain has sealed."""
        if self.next_block == 0:
            self.index_genesis(chain)
        for number in range(self.next_block, len(chain.blocks)):
            block = chain.blocks[number]
            pairs = [
                (chain.get_transaction(tx_id), chain.get_receipt(tx_id))
                for tx_id in block.tx_ids
            ]
            self.index_block(block, pairs)

    # --- queries ----------------------------------------------------------

    def txs_by_account(self, addr: str, page: int = 0, page_size: int = 100):
        if page < 0 or page_size <= 0:
            raise NotFoundError("bad page parameters")
        history = self.histories.get(addr, [])
        return history[page * page_size : (page + 1) * page_size]

    def find_tx(self, tx_id: str) -> tuple[Transaction, Receipt]:
        if tx_id not in self.txs:
            raise NotFoundError(f"tx {tx_id} not indexed")
        return self.txs[tx_id]

    def supply_history(self) -> list[SupplyPoint]:
        return list(self.supply)

    def balance_history(self, addr: str) -> list[tuple[int, int]]:
        """(block_number, balance) at every block where the balance moved."""
        out = []
        for entry in self.histories.get(addr, []):
            if out and out[-1][0] == entry.block_number:
                out[-1] = (entry.block_number, entry.running_balance)
            else:
                out.append((entry.block_number, entry.running_balance))
        return out

    def export_account_csv(self, addr: str) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["address", "block", "tx_id", "kind", "delta", "running_balance"])
        for e in self.histories.get(addr, []):
            writer.writerow(
                [addr, e.block_number, e.tx_id or "", e.kind.value, e.delta, e.running_balance]
            )
        return buf.getvalue()
