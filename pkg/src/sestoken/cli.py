"""`ses` command line interface.

Subcommands mirror the HTTP endpoints 1:1 and run either against a local
data directory (opening a node in-process) or a remote service URL.
Human-facing amounts are decimal token strings and are converted exactly;
everything on the wire stays in base units.

Exit codes: 0 success, 2 validation error, 3 state/lock error, 4 corrupt log.
"""

import json
import os
import sys
import time

import click

from .errors import SesError
from .service import (
    Node,
    ServiceConfig,
    create_app,
    default_policy,
    default_token_config,
    load_genesis_file,
)
from .rewards import load_policy
from .units import address_from_int, normalize_address, parse_token_amount

EXIT_VALIDATION = 2
EXIT_STATE = 3
EXIT_CORRUPT = 4

_VALIDATION_CODES = {
    "malformed-request",
    "invalid-config",
    "invalid-policy",
    "parse-error",
    "unauthorized",
    "not-found",
    "unknown-unlock",
}

# well-known demo addresses
OWNER = address_from_int(1)
TREASURY = address_from_int(2)
ACCOUNT_1 = address_from_int(0xA1)
ACCOUNT_2 = address_from_int(0xA2)
MINER = address_from_int(0xEE)


def _exit_code(code: str) -> int:
    if code == "corrupt-log":
        return EXIT_CORRUPT
    if code in _VALIDATION_CODES:
        return EXIT_VALIDATION
    return EXIT_STATE


def fail(code: str, message: str):
    click.echo(f"error: {code}: {message}", err=True)
    sys.exit(_exit_code(code))


class Client:
    """Dispatches a request either to a remote service or a local node."""

    def __init__(self, url, data_dir, admin_key=None, genesis=None, policy=None):
        self.url = url
        self.data_dir = data_dir
        self.admin_key = admin_key
        self.genesis = genesis
        self.policy = policy
        if url is None and data_dir is None:
            fail("malformed-request", "pass --data-dir or --url")

    def call(self, method: str, path: str, payload=None, params=None, admin=False):
        if self.url is not None:
            return self._remote(method, path, payload, params, admin)
        return self._local(method, path, payload, params)

    def _remote(self, method, path, payload, params, admin):
        import httpx

        headers = {}
        if admin:
            headers["x-admin-key"] = self.admin_key or ""
        resp = httpx.request(
            method, self.url.rstrip("/") + path, json=payload, params=params,
            headers=headers, timeout=30.0,
        )
        if resp.status_code >= 400:
            try:
                body = resp.json()
                fail(body.get("code", "internal-error"), body.get("message", ""))
            except ValueError:
                fail("internal-error", resp.text)
        return resp.json()

    def _local(self, method, path, payload, params):
        config = ServiceConfig(
            data_dir=self.data_dir,
            genesis=self.genesis or default_token_config(),
            policy=self.policy or default_policy(),
            admin_key=self.admin_key or "local",
        )
        with Node(config) as node:
            routes = {
                ("POST", "/v1/transfers"): lambda: node.submit_transfer(payload),
                ("POST", "/v1/blocks"): lambda: node.produce_block(payload),
                ("GET", "/v1/supply"): node.supply,
                ("POST", "/v1/events"): lambda: node.handle_event(payload),
                ("POST", "/v1/points/convert"): lambda: node.convert_points(payload),
                ("POST", "/v1/redeem"): lambda: node.redeem(payload),
                ("GET", "/v1/explorer/supply"): node.explorer_supply,
                ("POST", "/v1/admin/mint"): lambda: node.admin_mint(payload),
                ("POST", "/v1/admin/block-reward"): lambda: node.admin_block_reward(payload),
                ("POST", "/v1/admin/destroy"): node.admin_destroy,
                ("GET", "/v1/state/hash"): node.state_hash,
            }
            if path.startswith("/v1/balances/"):
                return node.balance(path.rsplit("/", 1)[1])
            if path.startswith("/v1/explorer/tx/"):
                return node.explorer_tx(path.rsplit("/", 1)[1])
            if path == "/v1/explorer/txs":
                return node.explorer_txs(
                    params["account"],
                    int(params.get("page", 0)),
                    int(params.get("page_size", 100)),
                )
            return routes[(method, path)]()


def _client(ctx) -> Client:
    opts = ctx.obj
    genesis = None
    policy = None
    if opts.get("genesis_path"):
        genesis, _ = load_genesis_file(opts["genesis_path"])
    if opts.get("policy_path"):
        with open(opts["policy_path"], encoding="utf-8") as fh:
            policy = load_policy(fh.read())
    admin_key = None
    if opts.get("admin_key_env"):
        admin_key = os.environ.get(opts["admin_key_env"])
    return Client(opts.get("url"), opts.get("data_dir"), admin_key, genesis, policy)


def _echo(obj):
    click.echo(json.dumps(obj, indent=2, sort_keys=True))


def _guard(fn):
    try:
        return fn()
    except SesError as exc:
        fail(exc.code, str(exc))


@click.group()
@click.option("--data-dir", type=click.Path(), help="local node data directory")
@click.option("--url", help="remote service URL (overrides --data-dir)")
@click.option("--genesis", "genesis_path", type=click.Path(exists=True),
              help="genesis config file (YAML/JSON)")
@click.option("--policy", "policy_path", type=click.Path(exists=True),
              help="reward policy file (YAML)")
@click.option("--admin-key-env", help="env var holding the admin key")
@click.pass_context
def main(ctx, data_dir, url, genesis_path, policy_path, admin_key_env):
    """SES token-economy node, explorer, and reward engine."""
    ctx.obj = {
        "data_dir": data_dir,
        "url": url,
        "genesis_path": genesis_path,
        "policy_path": policy_path,
        "admin_key_env": admin_key_env,
    }


@main.command()
@click.option("--listen", default="127.0.0.1:8545", show_default=True)
@click.pass_context
def serve(ctx, listen):
    """Run the HTTP service over the data directory."""
    import uvicorn

    opts = ctx.obj
    if not opts.get("data_dir"):
        fail("malformed-request", "serve requires --data-dir")
    host, _, port = listen.partition(":")
    genesis = default_token_config()
    chain_seed = 0
    if opts.get("genesis_path"):
        genesis, chain_seed = load_genesis_file(opts["genesis_path"])
    policy = default_policy()
    if opts.get("policy_path"):
        with open(opts["policy_path"], encoding="utf-8") as fh:
            policy = load_policy(fh.read())
    admin_key = "change-me"
    if opts.get("admin_key_env"):
        admin_key = os.environ.get(opts["admin_key_env"]) or ""

    def build():
        config = ServiceConfig(
            data_dir=opts["data_dir"],
            listen_host=host or "127.0.0.1",
            listen_port=int(port or 8545),
            genesis=genesis,
            policy=policy,
            admin_key=admin_key,
            chain_seed=chain_seed,
        )
        return Node(config)

    node = _guard(build)
    try:
        uvicorn.run(create_app(node), host=node.config.listen_host,
                    port=node.config.listen_port)
    finally:
        node.close()


@main.group()
def scenario():
    """Canned end-to-end scenarios."""


@scenario.command()
@click.pass_context
def poc(ctx):
    """Fund account 1 with 70,000,000 SES, then move 1,000,000 to account 2."""
    import tempfile

    opts = ctx.obj or {}
    data_dir = opts.get("data_dir") or tempfile.mkdtemp(prefix="ses-poc-")
    client = Client(None, data_dir)

    def run():
        now = int(time.time())
        client.call("POST", "/v1/transfers", {
            "from": OWNER, "to": ACCOUNT_1, "amount": str(parse_token_amount("70000000")),
        })
        client.call("POST", "/v1/blocks", {"coinbase": MINER, "timestamp": now})
        client.call("POST", "/v1/transfers", {
            "from": ACCOUNT_1, "to": ACCOUNT_2, "amount": str(parse_token_amount("1000000")),
        })
        client.call("POST", "/v1/blocks", {"coinbase": MINER, "timestamp": now + 12})
        b1 = client.call("GET", f"/v1/balances/{ACCOUNT_1}")
        b2 = client.call("GET", f"/v1/balances/{ACCOUNT_2}")
        state = client.call("GET", "/v1/state/hash")
        click.echo(f"A1 {ACCOUNT_1} = {b1['balance_tokens']} SES")
        click.echo(f"A2 {ACCOUNT_2} = {b2['balance_tokens']} SES")
        click.echo(f"state_hash = {state['state_hash']}")

    _guard(run)


@main.command()
@click.argument("logfile", type=click.Path(exists=True))
def replay(logfile):
    """Verify a ledger log replays deterministically; exit 4 on mismatch."""
    from . import chain as chain_mod
    from .storage import read_ledger_file

    def run():
        chain = chain_mod.replay(read_ledger_file(logfile))
        click.echo(f"ok: {len(chain.blocks)} blocks, state_hash = {chain.state_hash()}")

    _guard(run)


@main.command()
@click.argument("src")
@click.argument("dst")
@click.argument("amount_tokens")
@click.pass_context
def transfer(ctx, src, dst, amount_tokens):
    """Queue a transfer (confirmed by the next block)."""

    def run():
        payload = {
            "from": normalize_address(src),
            "to": normalize_address(dst),
            "amount": str(parse_token_amount(amount_tokens)),
        }
        return _client(ctx).call("POST", "/v1/transfers", payload)

    _echo(_guard(run))


@main.command()
@click.option("--coinbase", default=MINER, show_default=True)
@click.option("--timestamp", type=int, default=None)
@click.pass_context
def block(ctx, coinbase, timestamp):
    """Produce a block, draining the mempool."""
    payload = {"coinbase": coinbase, "timestamp": timestamp or int(time.time())}
    _echo(_guard(lambda: _client(ctx).call("POST", "/v1/blocks", payload)))


@main.command()
@click.argument("address")
@click.pass_context
def balance(ctx, address):
    _echo(_guard(lambda: _client(ctx).call("GET", f"/v1/balances/{address}")))


@main.command()
@click.pass_context
def supply(ctx):
    _echo(_guard(lambda: _client(ctx).call("GET", "/v1/supply")))


@main.command()
@click.option("--event-id", required=True)
@click.option("--kind", required=True)
@click.option("--actor", required=True)
@click.option("--occurred-at", type=int, default=None)
@click.pass_context
def event(ctx, event_id, kind, actor, occurred_at):
    """Submit a platform event to the reward engine."""
    payload = {
        "event_id": event_id,
        "kind": kind,
        "actor": actor,
        "occurred_at": occurred_at if occurred_at is not None else int(time.time()),
    }
    _echo(_guard(lambda: _client(ctx).call("POST", "/v1/events", payload)))


@main.command("convert-points")
@click.argument("actor")
@click.argument("points", type=int)
@click.pass_context
def convert_points(ctx, actor, points):
    payload = {"actor": actor, "points": points}
    _echo(_guard(lambda: _client(ctx).call("POST", "/v1/points/convert", payload)))


@main.command()
@click.argument("actor")
@click.argument("unlock_id")
@click.pass_context
def redeem(ctx, actor, unlock_id):
    payload = {"actor": actor, "unlock_id": unlock_id}
    _echo(_guard(lambda: _client(ctx).call("POST", "/v1/redeem", payload)))


@main.group()
def explorer():
    """Explorer queries."""


@explorer.command("txs")
@click.argument("account")
@click.option("--page", type=int, default=0)
@click.option("--page-size", type=int, default=100)
@click.pass_context
def explorer_txs(ctx, account, page, page_size):
    params = {"account": account, "page": page, "page_size": page_size}
    client = _client(ctx)
    _echo(_guard(lambda: client.call("GET", "/v1/explorer/txs", params=params)))


@explorer.command("tx")
@click.argument("tx_id")
@click.pass_context
def explorer_tx(ctx, tx_id):
    client = _client(ctx)
    _echo(_guard(lambda: client.call("GET", f"/v1/explorer/tx/{tx_id}")))


@explorer.command("supply")
@click.pass_context
def explorer_supply(ctx):
    client = _client(ctx)
    _echo(_guard(lambda: client.call("GET", "/v1/explorer/supply")))


@main.group()
def admin():
    """Owner-gated operations (admin key required against a remote)."""


@admin.command("mint")
@click.argument("dst")
@click.argument("amount_tokens")
@click.pass_context
def admin_mint(ctx, dst, amount_tokens):
    def run():
        payload = {"to": dst, "amount": str(parse_token_amount(amount_tokens))}
        return _client(ctx).call("POST", "/v1/admin/mint", payload, admin=True)

    _echo(_guard(run))


@admin.command("block-reward")
@click.argument("amount_tokens")
@click.pass_context
def admin_block_reward(ctx, amount_tokens):
    def run():
        payload = {"amount": str(parse_token_amount(amount_tokens))}
        return _client(ctx).call("POST", "/v1/admin/block-reward", payload, admin=True)

    _echo(_guard(run))


@admin.command("destroy")
@click.pass_context
def admin_destroy(ctx):
    client = _client(ctx)
    _echo(_guard(lambda: client.call("POST", "/v1/admin/destroy", {}, admin=True)))


@main.command("state-hash")
@click.pass_context
def state_hash(ctx):
    _echo(_guard(lambda: _client(ctx).call("GET", "/v1/state/hash")))


if __name__ == "__main__":
    main()
