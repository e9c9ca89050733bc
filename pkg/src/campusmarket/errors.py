"""Domain error hierarchy.

Every error carries a machine-readable ``code`` so the HTTP layer can map it
to exactly one (status, code) pair. Raising a plain exception instead of one
of these from a service is a bug.
"""


class MarketError(Exception):
    code = "error"


# --- persistence ---------------------------------------------------------

class NotFound(MarketError):
    code = "not_found"


class VersionConflict(MarketError):
    code = "version_conflict"


class AlreadyExists(MarketError):
    code = "already_exists"


class StoreUnavailable(MarketError):
    code = "store_unavailable"


# --- auth ----------------------------------------------------------------

class DomainNotAllowed(MarketError):
    code = "domain_not_allowed"


class EmailTaken(MarketError):
    code = "email_taken"


class WeakPassword(MarketError):
    code = "weak_password"


class OtpNotFound(MarketError):
    code = "otp_not_found"


class OtpMismatch(MarketError):
    code = "otp_mismatch"


class OtpExpired(MarketError):
    code = "otp_expired"


class OtpAlreadyConsumed(MarketError):
    code = "otp_already_consumed"


class InvalidCredentials(MarketError):
    code = "invalid_credentials"


class TokenInvalid(MarketError):
    code = "token_invalid"


class TokenExpired(MarketError):
    code = "token_expired"


class Unauthorized(MarketError):
    """Missing or unusable credentials on a protected call."""

    code = "unauthorized"


class Forbidden(MarketError):
    """Authenticated, but not allowed to act on this resource."""

    code = "forbidden"


# --- reputation ----------------------------------------------------------

class AccountExists(MarketError):
    code = "account_exists"


class UnknownAccount(MarketError):
    code = "unknown_account"


class WrongTiming(MarketError):
    code = "wrong_timing"


class NothingPending(MarketError):
    code = "nothing_pending"


# --- catalog -------------------------------------------------------------

class ValidationFailed(MarketError):
    code = "validation_failed"

    def __init__(self, field: str, message: str | None = None):
        self.field = field
        super().__init__(message or f"invalid value for '{field}'")


class UnknownCategory(MarketError):
    code = "unknown_category"


class NonCompliant(MarketError):
    code = "non_compliant"

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class ReservedCannotDelete(MarketError):
    code = "reserved_cannot_delete"


# --- transactions --------------------------------------------------------

class AlreadyReserved(MarketError):
    code = "already_reserved"


class SelfRequestForbidden(MarketError):
    code = "self_request_forbidden"


class AlreadyResolved(MarketError):
    code = "already_resolved"
