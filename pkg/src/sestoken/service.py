"""Operational surface: node wiring plus the HTTP/JSON API.

A ``Node`` owns one data directory (exclusive lock), the chain, the reward
engine and the explorer index, and exposes JSON-ready methods that both the
FastAPI endpoints and the CLI's local mode call. All mutations are
serialized through one lock; every accepted input is fsync'd to the ledger
log before the call returns, so a restart replays to the same state.
"""

import threading
from dataclasses import dataclass, field
from typing import Optional

import yaml

from . import chain as chain_mod
from .chain import Chain, Transaction
from .errors import MalformedRequestError, SesError, UnauthorizedError
from .explorer import ExplorerIndex
from .rewards import PlatformEvent, PolicySet, RewardEngine, load_policy
from .token_core import TokenConfig, balance_of
from .units import (
    address_from_int,
    format_token_amount,
    normalize_address,
    parse_base_units,
    parse_token_amount,
)

DEFAULT_OWNER = address_from_int(1)
DEFAULT_TREASURY = address_from_int(2)


def default_token_config(owner: str = DEFAULT_OWNER) -> TokenConfig:
    """Repo defaults: 100M cap, 70M premint to the owner, no miner reward."""
    return TokenConfig(
        name="SESkillToken",
        symbol="SES",
        cap=parse_token_amount("100000000"),
        initial_supply=parse_token_amount("70000000"),
        owner=owner,
        block_reward=0,
    )


def default_policy(treasury: str = DEFAULT_TREASURY) -> PolicySet:
    return load_policy(
        {
            "version": "default",
            "treasury": treasury,
            "conversion_rate": 10,
            "rules": [
                {"kind": "course_completed", "reward_tokens": "100"},
                {"kind": "module_completed", "reward_tokens": "10",
                 "per_actor_daily_limit": 10},
                {"kind": "question_answered", "points": 10,
                 "per_actor_daily_limit": 5},
                {"kind": "peer_helped", "reward_tokens": "25",
                 "per_actor_daily_limit": 5},
                {"kind": "content_contributed", "reward_tokens": "50"},
                {"kind": "extension_published", "reward_tokens": "500"},
                {"kind": "bug_fixed", "reward_tokens": "200"},
                {"kind": "challenge_won", "reward_tokens": "75",
                 "per_actor_lifetime_cap": "750"},
                {"kind": "milestone_reached", "points": 20,
                 "per_actor_daily_limit": 3},
            ],
            "unlocks": {"premium_uml_pack": "20", "advanced_course": "50"},
        }
    )


def load_genesis_file(path) -> tuple[TokenConfig, int]:
    """Genesis file: YAML/JSON mapping with human token amounts."""
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise MalformedRequestError("genesis file must be a mapping")
    config = TokenConfig(
        name=doc.get("name", "SESkillToken"),
        symbol=doc.get("symbol", "SES"),
        cap=parse_token_amount(str(doc.get("cap_tokens", "100000000"))),
        initial_supply=parse_token_amount(str(doc.get("initial_supply_tokens", "70000000"))),
        owner=normalize_address(doc.get("owner", DEFAULT_OWNER)),
        block_reward=parse_token_amount(str(doc.get("block_reward_tokens", "0"))),
    )
    return config, int(doc.get("chain_seed", 0))


@dataclass
class ServiceConfig:
    data_dir: str
    listen_host: str = "127.0.0.1"
    listen_port: int = 8545
    genesis: TokenConfig = field(default_factory=default_token_config)
    policy: PolicySet = field(default_factory=default_policy)
    admin_key: str = "change-me"
    chain_seed: int = 0

    def __post_init__(self):
        if not self.admin_key:
            raise MalformedRequestError("admin key must be non-empty")


def _block_summary(chain: Chain, block) -> dict:
    receipts = []
    for tx_id in block.tx_ids:
        r = chain.get_receipt(tx_id)
        receipts.append({"tx_id": tx_id, "status": r.status, "error": r.error})
    return {
        "number": block.number,
        "block_hash": block.block_hash,
        "parent_hash": block.parent_hash,
        "coinbase": block.coinbase,
        "timestamp": block.timestamp,
        "tx_ids": list(block.tx_ids),
        "state_hash": block.state_hash,
        "receipts": receipts,
    }


def _receipt_payload(receipt) -> dict:
    return {
        "tx_id": receipt.tx_id,
        "block_number": receipt.block_number,
        "index_in_block": receipt.index_in_block,
        "status": receipt.status,
        "error": receipt.error,
        "records": [
            {"from": r.src, "to": r.dst, "amount": str(r.amount), "kind": r.kind.value}
            for r in receipt.records
        ],
    }


class Node:
    """One running instance over a data directory."""

    def __init__(self, config: ServiceConfig):
        # DataDir import is deferred so in-memory tests can stub persistence
        from .storage import DataDir

        self.config = config
        self.dir = DataDir(config.data_dir)
        if self.dir.has_ledger():
            self.chain = chain_mod.replay(self.dir.read_ledger_entries())
            self.chain.on_entry = self.dir.append_ledger_entry
        else:
            self.chain = Chain(
                config.genesis, config.chain_seed, on_entry=self.dir.append_ledger_entry
            )
        self.engine = RewardEngine(
            self.chain, config.policy, on_decision=self.dir.append_decision
        )
        self._restore_engine()
        self.index = ExplorerIndex()
        self.index.index_chain(self.chain)
        self.lock = threading.Lock()

    def _restore_engine(self):
        """Rebuild idempotency/limit bookkeeping from the decision log."""
        import json

        from .rewards import utc_day

        decisions_path = self.dir.path / "decisions.log"
        if not decisions_path.exists():
            return
        eng = self.engine
        with open(decisions_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                d = json.loads(line)
                if d["outcome"] != "granted":
                    continue
                if d["event_id"].startswith("redeem:"):
                    eng.unlocked.add((d["actor"], d["event_id"].split(":", 2)[2]))
                    continue
                points = int(d.get("points", 0))
                if d["event_id"].startswith("convert:"):
                    eng.points[d["actor"]] = eng.points.get(d["actor"], 0) + points
                    eng._synthetic_seq += 1
                    continue
                eng.granted_ids.add(d["event_id"])
                amount = int(d["amount"])
                grant_size = amount if amount > 0 else points
                day_key = (d["actor"], d["kind"], utc_day(int(d["occurred_at"])))
                life_key = (d["actor"], d["kind"])
                eng.daily_counts[day_key] = eng.daily_counts.get(day_key, 0) + 1
                eng.lifetime_granted[life_key] = (
                    eng.lifetime_granted.get(life_key, 0) + grant_size
                )
                if points > 0:
                    eng.points[d["actor"]] = eng.points.get(d["actor"], 0) + points

    def close(self):
        self.dir.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # --- API methods (JSON-ready dicts) ------------------------------------

    def submit_transfer(self, payload: dict) -> dict:
        src = normalize_address(_need(payload, "from"))
        dst = normalize_address(_need(payload, "to"))
        amount = parse_base_units(_need(payload, "amount"))
        with self.lock:
            tx = Transaction(
                sender=src,
                nonce=self.chain.next_nonce(src),
                call={"op": "transfer", "to": dst, "amount": str(amount)},
            )
            tx_id = self.chain.submit_tx(tx)
        return {"tx_id": tx_id, "status": "pending"}

    def produce_block(self, payload: dict) -> dict:
        coinbase = normalize_address(_need(payload, "coinbase"))
        timestamp = _int(_need(payload, "timestamp"))
        with self.lock:
            block = self.chain.produce_block(coinbase, timestamp)
            self.index.index_chain(self.chain)
        return _block_summary(self.chain, block)

    def balance(self, address: str) -> dict:
        addr = normalize_address(address)
        amount = balance_of(self.chain.state, addr)
        return {
            "address": addr,
            "balance": str(amount),
            "balance_tokens": format_token_amount(amount),
        }

    def supply(self) -> dict:
        state = self.chain.state
        return {
            "total_supply": str(state.total_supply),
            "total_supply_tokens": format_token_amount(state.total_supply),
            "cap": str(state.config.cap),
        }

    def handle_event(self, payload: dict) -> dict:
        event = PlatformEvent(
            event_id=str(_need(payload, "event_id")),
            kind=str(_need(payload, "kind")),
            actor=normalize_address(_need(payload, "actor")),
            occurred_at=_int(_need(payload, "occurred_at")),
            metadata=payload.get("metadata") or {},
        )
        with self.lock:
            decision = self.engine.handle_event(event)
            self.index.index_chain(self.chain)
        return decision.to_dict()

    def convert_points(self, payload: dict) -> dict:
        with self.lock:
            decision = self.engine.convert_points(
                normalize_address(_need(payload, "actor")),
                _int(_need(payload, "points")),
                _int(payload.get("occurred_at", 0)),
            )
            self.index.index_chain(self.chain)
        return decision.to_dict()

    def redeem(self, payload: dict) -> dict:
        with self.lock:
            decision = self.engine.redeem(
                normalize_address(_need(payload, "actor")),
                str(_need(payload, "unlock_id")),
                _int(payload.get("occurred_at", 0)),
            )
            self.index.index_chain(self.chain)
        return decision.to_dict()

    def explorer_txs(self, account: str, page: int = 0, page_size: int = 100) -> dict:
        addr = normalize_address(account)
        entries = self.index.txs_by_account(addr, page, page_size)
        return {
            "account": addr,
            "page": page,
            "page_size": page_size,
            "entries": [
                {
                    "tx_id": e.tx_id,
                    "block_number": e.block_number,
                    "counterparty": e.counterparty,
                    "delta": str(e.delta),
                    "kind": e.kind.value,
                    "running_balance": str(e.running_balance),
                }
                for e in entries
            ],
        }

    def explorer_tx(self, tx_id: str) -> dict:
        tx, receipt = self.index.find_tx(tx_id)
        return {
            "transaction": {
                "tx_id": tx.tx_id,
                "sender": tx.sender,
                "nonce": tx.nonce,
                "call": tx.call,
            },
            "receipt": _receipt_payload(receipt),
        }

    def explorer_supply(self) -> dict:
        return {
            "points": [
                {"block_number": p.block_number, "total_supply": str(p.total_supply)}
                for p in self.index.supply_history()
            ]
        }

    def admin_mint(self, payload: dict) -> dict:
        dst = normalize_address(_need(payload, "to"))
        amount = parse_base_units(_need(payload, "amount"))
        return self._submit_owner_call({"op": "mint", "to": dst, "amount": str(amount)})

    def admin_block_reward(self, payload: dict) -> dict:
        amount = parse_base_units(_need(payload, "amount"))
        return self._submit_owner_call({"op": "set_block_reward", "amount": str(amount)})

    def admin_destroy(self, payload: Optional[dict] = None) -> dict:
        call = {"op": "destroy", "treasury": self.config.policy.treasury}
        return self._submit_owner_call(call)

    def _submit_owner_call(self, call: dict) -> dict:
        owner = self.chain.state.owner
        with self.lock:
            tx = Transaction(sender=owner, nonce=self.chain.next_nonce(owner), call=call)
            tx_id = self.chain.submit_tx(tx)
        return {"tx_id": tx_id, "status": "pending"}

    def state_hash(self) -> dict:
        return {"state_hash": self.chain.state_hash()}


def _need(payload: dict, key: str):
    if not isinstance(payload, dict) or key not in payload or payload[key] is None:
        raise MalformedRequestError(f"missing field {key!r}")
    return payload[key]


def _int(value) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise MalformedRequestError(f"expected integer, got {value!r}")


# --- HTTP layer -------------------------------------------------------------

_STATUS_BY_CODE = {
    "malformed-request": 400,
    "invalid-config": 400,
    "invalid-policy": 400,
    "parse-error": 400,
    "unauthorized": 401,
    "not-found": 404,
    "unknown-unlock": 404,
    "corrupt-log": 500,
    "internal-error": 500,
}
_DEFAULT_STATUS = 409  # state conflicts: nonce, balances, gating, lifecycle


def error_status(code: str) -> int:
    return _STATUS_BY_CODE.get(code, _DEFAULT_STATUS)


def create_app(node: Node):
    from fastapi import FastAPI, Header, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="SES token service", docs_url=None, redoc_url=None)
    app.state.node = node

    @app.exception_handler(SesError)
    async def _ses_error(request: Request, exc: SesError):
        return JSONResponse(
            status_code=error_status(exc.code),
            content={"code": exc.code, "message": str(exc)},
        )

    from fastapi.exceptions import RequestValidationError

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"code": "malformed-request", "message": str(exc.errors())},
        )

    def _admin(admin_key: Optional[str]):
        if admin_key != node.config.admin_key:
            raise UnauthorizedError("bad or missing admin key")

    async def _json_body(request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise MalformedRequestError("body must be JSON")
        if not isinstance(body, dict):
            raise MalformedRequestError("body must be a JSON object")
        return body

    @app.post("/v1/transfers")
    async def transfers(request: Request):
        return node.submit_transfer(await _json_body(request))

    @app.post("/v1/blocks")
    async def blocks(request: Request):
        return node.produce_block(await _json_body(request))

    @app.get("/v1/balances/{address}")
    async def balances(address: str):
        return node.balance(address)

    @app.get("/v1/supply")
    async def supply():
        return node.supply()

    @app.post("/v1/events")
    async def events(request: Request):
        return node.handle_event(await _json_body(request))

    @app.post("/v1/points/convert")
    async def points_convert(request: Request):
        return node.convert_points(await _json_body(request))

    @app.post("/v1/redeem")
    async def redeem(request: Request):
        return node.redeem(await _json_body(request))

    @app.get("/v1/explorer/txs")
    async def explorer_txs(account: str, page: int = 0, page_size: int = 100):
        return node.explorer_txs(account, page, page_size)

    @app.get("/v1/explorer/tx/{tx_id}")
    async def explorer_tx(tx_id: str):
        return node.explorer_tx(tx_id)

    @app.get("/v1/explorer/supply")
    async def explorer_supply():
        return node.explorer_supply()

    @app.post("/v1/admin/mint")
    async def admin_mint(request: Request, x_admin_key: Optional[str] = Header(None)):
        _admin(x_admin_key)
        return node.admin_mint(await _json_body(request))

    @app.post("/v1/admin/block-reward")
    async def admin_block_reward(
        request: Request, x_admin_key: Optional[str] = Header(None)
    ):
        _admin(x_admin_key)
        return node.admin_block_reward(await _json_body(request))

    @app.post("/v1/admin/destroy")
    async def admin_destroy(request: Request, x_admin_key: Optional[str] = Header(None)):
        _admin(x_admin_key)
        return node.admin_destroy()

    @app.get("/v1/state/hash")
    async def state_hash():
        return node.state_hash()

    return app
