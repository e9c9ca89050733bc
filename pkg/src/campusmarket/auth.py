"""Registration with campus-email OTP verification, login, signed sessions.

Accounts are created only when the OTP is verified: the registration profile
is parked on the OTP record (password already hashed; plaintext is never
persisted), and ``verify_otp`` turns it into a user row. OTP consumption and
account creation are serialized through the store's compare-and-set, so a
code verifies at most once even under concurrent calls.

Session tokens are stateless signed claims:
``base64url(header).base64url(claims).base64url(mac)`` with claims
``{sub, role, iat, exp}`` and an HMAC-SHA-256 over the first two segments.
Decoding is strict (canonical base64url only), so any single-bit change to
the wire string invalidates the token.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import random
import re
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

from .errors import (
    DomainNotAllowed,
    EmailTaken,
    InvalidCredentials,
    OtpAlreadyConsumed,
    OtpExpired,
    OtpMismatch,
    OtpNotFound,
    TokenExpired,
    TokenInvalid,
    ValidationFailed,
    VersionConflict,
    WeakPassword,
)
from .persistence import MemoryDocumentStore

USERS = "users"
OTPS = "otps"

_EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")

Clock = Callable[[], float]


# --- password hashing ------------------------------------------------------

def hash_password(plain: str, *, cost: int = 2**14) -> str:
    """Salted scrypt hash, self-describing: ``scrypt$n$r$p$salt$key`` (hex)."""
    salt = uuid.uuid4().bytes + uuid.uuid4().bytes
    key = hashlib.scrypt(plain.encode("utf-8"), salt=salt, n=cost, r=8, p=1)
    return f"scrypt${cost}$8$1${salt.hex()}${key.hex()}"


def verify_password(plain: str, hashed: str) -> bool:
    try:
        scheme, n, r, p, salt_hex, key_hex = hashed.split("$")
        if scheme != "scrypt":
            return False
        key = hashlib.scrypt(
            plain.encode("utf-8"), salt=bytes.fromhex(salt_hex), n=int(n), r=int(r), p=int(p)
        )
        return hmac.compare_digest(key, bytes.fromhex(key_hex))
    except (ValueError, TypeError):
        return False


# --- signed session tokens --------------------------------------------------

_TOKEN_HEADER = {"alg": "HS256", "typ": "JWT"}


@dataclass(frozen=True)
class TokenClaims:
    subject: str
    role: int
    issued_at: int
    expires_at: int


def _b64u_encode(raw: bytes) -> str:
    return base64.urlsafe_b64encode(raw).rstrip(b"=").decode("ascii")


def _b64u_decode(segment: str) -> bytes:
    # Strict: reject non-alphabet characters and non-canonical encodings, so
    # two distinct wire strings can never decode to the same bytes.
    pad = -len(segment) % 4
    if pad == 3:
        raise ValueError("bad segment length")
    raw = base64.urlsafe_b64decode((segment + "=" * pad).encode("ascii"), )
    if _b64u_encode(raw) != segment:
        raise ValueError("non-canonical base64url")
    return raw


def issue_token(secret: str, subject: str, role: int, issued_at: int, ttl_seconds: int) -> str:
    header = _b64u_encode(json.dumps(_TOKEN_HEADER, separators=(",", ":")).encode())
    claims = _b64u_encode(
        json.dumps(
            {"sub": subject, "role": role, "iat": issued_at, "exp": issued_at + ttl_seconds},
            separators=(",", ":"),
        ).encode()
    )
    mac = hmac.new(secret.encode(), f"{header}.{claims}".encode("ascii"), hashlib.sha256).digest()
    return f"{header}.{claims}.{_b64u_encode(mac)}"


def verify_token(secret: str, token: str, now: float) -> TokenClaims:
    """Valid iff the MAC matches under ``secret`` and ``now`` < expiry."""
    try:
        header_seg, claims_seg, mac_seg = token.split(".")
        expected = hmac.new(
            secret.encode(), f"{header_seg}.{claims_seg}".encode("ascii"), hashlib.sha256
        ).digest()
        if not hmac.compare_digest(_b64u_decode(mac_seg), expected):
            raise TokenInvalid("signature mismatch")
        _b64u_decode(header_seg)  # canonicality check
        payload = json.loads(_b64u_decode(claims_seg))
        subject = payload["sub"]
        role = payload["role"]
        iat = payload["iat"]
        exp = payload["exp"]
        if not (isinstance(subject, str) and isinstance(role, int) and not isinstance(role, bool)):
            raise ValueError("bad claim types")
        if not (isinstance(iat, int) and isinstance(exp, int)):
            raise ValueError("bad claim types")
    except TokenInvalid:
        raise
    except Exception:
        raise TokenInvalid("malformed token") from None
    if now >= exp:
        raise TokenExpired("token expired")
    return TokenClaims(subject=subject, role=role, issued_at=iat, expires_at=exp)


# --- mailer -----------------------------------------------------------------

class Mailer(Protocol):
    def send(self, to: str, subject: str, body: str) -> None: ...


@dataclass(frozen=True)
class MailMessage:
    to: str
    subject: str
    body: str


class CaptureMailer:
    """Default adapter: keeps messages in memory and, when given a path,
    appends them to a JSON-lines capture log (the dev stand-in for an inbox)."""

    def __init__(self, path: str | Path | None = None):
        self.messages: list[MailMessage] = []
        self.path = Path(path) if path is not None else None

    def send(self, to: str, subject: str, body: str) -> None:
        message = MailMessage(to=to, subject=subject, body=body)
        self.messages.append(message)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"to": to, "subject": subject, "body": body}) + "\n")

    def last_code_for(self, email: str) -> str | None:
        """Pull the 6-digit code line out of the newest mail to ``email``."""
        for message in reversed(self.messages):
            if message.to == email:
                for line in message.body.splitlines():
                    if line.strip().isdigit() and len(line.strip()) == 6:
                        return line.strip()
        return None


# --- accounts and the service ------------------------------------------------

@dataclass(frozen=True)
class UserAccount:
    id: str
    name: str
    email: str
    phone: str
    college_id: str
    role: int
    created_at: float
    updated_at: float


@dataclass(frozen=True)
class OtpIssued:
    email: str
    ttl_seconds: int


@dataclass(frozen=True)
class SessionToken:
    token: str
    subject: str
    role: int
    issued_at: int
    expires_at: int


@dataclass
class AuthConfig:
    allowed_domains: Sequence[str]
    session_secret: str
    otp_ttl_seconds: int = 600
    session_ttl_seconds: int = 86400
    otp_max_attempts: int = 5
    min_password_length: int = 8
    scrypt_cost: int = 2**14


def _account_from_doc(doc_id: str, body: dict) -> UserAccount:
    return UserAccount(
        id=doc_id,
        name=body["name"],
        email=body["email"],
        phone=body["phone"],
        college_id=body["college_id"],
        role=body["role"],
        created_at=body["created_at"],
        updated_at=body["updated_at"],
    )


class AuthService:
    def __init__(
        self,
        store: MemoryDocumentStore,
        mailer: Mailer,
        config: AuthConfig,
        clock: Clock = time.time,
        rng: random.Random | None = None,
        on_account_created: Callable[[str], None] | None = None,
    ):
        self.store = store
        self.mailer = mailer
        self.config = config
        self.clock = clock
        self.rng = rng if rng is not None else random.SystemRandom()
        self.on_account_created = on_account_created

    # --- registration ---

    def register_begin(
        self, name: str, email: str, phone: str, college_id: str, password: str
    ) -> OtpIssued:
        email = email.strip().lower()
        if not _EMAIL_RE.match(email):
            raise ValidationFailed("email", f"not a valid email address: {email!r}")
        if len(password) < self.config.min_password_length:
            raise WeakPassword(f"password must be at least {self.config.min_password_length} characters")
        domain = email.rsplit("@", 1)[1]
        if domain not in {d.lower() for d in self.config.allowed_domains}:
            raise DomainNotAllowed(f"email domain '{domain}' is not allowed")
        if self.find_by_email(email) is not None:
            raise EmailTaken(email)

        code = f"{self.rng.randrange(1_000_000):06d}"
        # replaces any previous unconsumed record for this email
        self.store.put(
            OTPS,
            email,
            {
                "email": email,
                "otp_code": code,
                "created_at": self.clock(),
                "status": "pending",
                "attempts": 0,
                "profile": {
                    "name": name.strip(),
                    "phone": phone.strip(),
                    "college_id": college_id.strip(),
                    "password_hash": hash_password(password, cost=self.config.scrypt_cost),
                },
            },
        )
        minutes = max(1, self.config.otp_ttl_seconds // 60)
        self.mailer.send(
            to=email,
            subject="Your campus marketplace verification code",
            body=(
                "Hi,\n\nYour verification code is:\n\n"
                f"{code}\n\n"
                f"It expires in {minutes} minutes. If you did not request this, ignore this mail.\n"
            ),
        )
        return OtpIssued(email=email, ttl_seconds=self.config.otp_ttl_seconds)

    def verify_otp(self, email: str, code: str) -> UserAccount:
        email = email.strip().lower()
        while True:
            doc = self.store.get(OTPS, email)
            if doc is None:
                raise OtpNotFound(email)
            body = doc.body
            if body["status"] == "consumed":
                raise OtpAlreadyConsumed(email)
            if body["status"] == "invalidated":
                # attempt limit hit earlier; the record no longer verifies
                raise OtpNotFound(email)
            if self.clock() - body["created_at"] > self.config.otp_ttl_seconds:
                raise OtpExpired(email)
            if code != body["otp_code"]:
                body["attempts"] += 1
                if body["attempts"] >= self.config.otp_max_attempts:
                    body["status"] = "invalidated"
                try:
                    self.store.compare_and_set(OTPS, email, doc.version, body)
                except VersionConflict:
                    continue  # racer touched the record; re-evaluate
                raise OtpMismatch(email)
            body["status"] = "consumed"
            try:
                self.store.compare_and_set(OTPS, email, doc.version, body)
            except VersionConflict:
                continue  # exactly one verifier may consume
            return self._create_account(email, body["profile"])

    def _create_account(self, email: str, profile: dict) -> UserAccount:
        now = self.clock()
        user_id = uuid.uuid4().hex
        body = {
            "name": profile["name"],
            "email": email,
            "password_hash": profile["password_hash"],
            "phone": profile["phone"],
            "college_id": profile["college_id"],
            "role": 0,
            "created_at": now,
            "updated_at": now,
        }
        self.store.insert(USERS, user_id, body)
        if self.on_account_created is not None:
            self.on_account_created(user_id)
        return _account_from_doc(user_id, body)

    # --- login / tokens ---

    def login(self, email: str, password: str) -> SessionToken:
        email = email.strip().lower()
        found = self.find_by_email(email)
        # wrong password and unknown email are indistinguishable to the caller
        if found is None:
            raise InvalidCredentials()
        user_id, body = found
        if not verify_password(password, body["password_hash"]):
            raise InvalidCredentials()
        issued_at = int(self.clock())
        token = issue_token(
            self.config.session_secret, user_id, body["role"], issued_at, self.config.session_ttl_seconds
        )
        return SessionToken(
            token=token,
            subject=user_id,
            role=body["role"],
            issued_at=issued_at,
            expires_at=issued_at + self.config.session_ttl_seconds,
        )

    def verify_token(self, token: str) -> TokenClaims:
        return verify_token(self.config.session_secret, token, self.clock())

    # --- lookups ---

    def find_by_email(self, email: str) -> tuple[str, dict] | None:
        docs = self.store.query(USERS, where=lambda b: b["email"] == email)
        if not docs:
            return None
        return docs[0].id, docs[0].body

    def get_account(self, user_id: str) -> UserAccount | None:
        doc = self.store.get(USERS, user_id)
        return _account_from_doc(doc.id, doc.body) if doc else None
