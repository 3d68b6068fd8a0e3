"""Error types shared across the package.

Every error carries a stable machine-readable ``code`` string; the HTTP
layer and the CLI map codes to status codes / exit codes without parsing
messages.
"""


class SesError(Exception):
    """Base class; ``code`` is stable across releases."""

    code = "internal-error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


# --- token_core ---------------------------------------------------------

class TokenError(SesError):
    code = "token-error"


class InvalidConfigError(TokenError):
    code = "invalid-config"


class ZeroAddressError(TokenError):
    code = "zero-address"


class InsufficientBalanceError(TokenError):
    code = "insufficient-balance"


class InsufficientAllowanceError(TokenError):
    code = "insufficient-allowance"


class CapExceededError(TokenError):
    code = "cap-exceeded"


class NotOwnerError(TokenError):
    code = "not-owner"


class TokenDestroyedError(TokenError):
    code = "token-destroyed"


# --- chain_sim ----------------------------------------------------------

class ChainError(SesError):
    code = "chain-error"


class BadNonceError(ChainError):
    code = "bad-nonce"


class DuplicateTxError(ChainError):
    code = "duplicate-tx-id"


class StaleTimestampError(ChainError):
    code = "stale-timestamp"


class NotFoundError(ChainError):
    code = "not-found"


class CorruptLogError(ChainError):
    code = "corrupt-log"


# --- reward_engine ------------------------------------------------------

class RewardError(SesError):
    code = "reward-error"


class InvalidPolicyError(RewardError):
    code = "invalid-policy"


class PolicyParseError(RewardError):
    code = "parse-error"


class InsufficientPointsError(RewardError):
    code = "insufficient-points"


class NotDivisibleError(RewardError):
    code = "not-divisible"


class UnknownUnlockError(RewardError):
    code = "unknown-unlock"


class AlreadyUnlockedError(RewardError):
    code = "already-unlocked"


# --- explorer / service -------------------------------------------------

class OutOfOrderBlockError(SesError):
    code = "out-of-order-block"


class LockHeldError(SesError):
    code = "lock-held"


class UnauthorizedError(SesError):
    code = "unauthorized"


class MalformedRequestError(SesError):
    code = "malformed-request"
