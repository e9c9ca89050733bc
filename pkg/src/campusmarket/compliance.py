"""Two-stage listing moderation: blacklist pre-filter, then classifier verdict.

Stage one scans the listing text for blacklisted terms as whole words; a hit
short-circuits with zero classifier calls. Stage two sends the listing to a
classifier client and parses its reply against a strict verdict schema
(``{"compliant": bool, "reason": str-required-iff-false}``, unknown fields
rejected). Any failure (malformed reply, client exception, timeout) retries
once and then fails closed: the listing is rejected, never admitted.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence, Union

Part = Union[str, tuple[bytes, str]]  # text, or (image bytes, media type)

FAIL_CLOSED_REASON = "classifier-unavailable"


def normalize_text(text: str) -> str:
    """Lowercase, map non-alphanumerics to spaces, collapse whitespace."""
    lowered = text.lower()
    cleaned = "".join(ch if ch.isalnum() else " " for ch in lowered)
    return " ".join(cleaned.split())


# --- blacklist --------------------------------------------------------------

@dataclass(frozen=True)
class BlacklistConfig:
    terms: frozenset[str] = frozenset()

    @classmethod
    def from_terms(cls, terms) -> "BlacklistConfig":
        clean = set()
        for term in terms:
            norm = normalize_text(term)
            if not norm or " " in norm:
                raise ValueError(f"blacklist term must be one non-empty word: {term!r}")
            clean.add(norm)
        return cls(terms=frozenset(clean))


def load_blacklist(path: str | Path) -> BlacklistConfig:
    """One term per line; ``#`` starts a comment; blank lines ignored."""
    terms = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        term = line.split("#", 1)[0].strip()
        if term:
            terms.append(term)
    return BlacklistConfig.from_terms(terms)


def check_blacklist(text: str, config: BlacklistConfig) -> str | None:
    """First blacklisted term occurring as a whole word, else None."""
    if not config.terms:
        return None
    for word in normalize_text(text).split():
        if word in config.terms:
            return word
    return None


# --- classifier client and verdict schema -----------------------------------

class ClassifierClient(Protocol):
    def classify(self, system_prompt: str, parts: Sequence[Part]) -> str:
        """Return the raw text response. Blocking; adapters own their timeout
        (10 s for anything remote). May raise on transport failure."""
        ...


@dataclass(frozen=True)
class ComplianceRequest:
    name: str
    description: str
    category_name: str
    photo: bytes | None = None
    photo_media_type: str | None = None


@dataclass(frozen=True)
class ComplianceVerdict:
    compliant: bool
    reason: str | None
    classifier_calls: int = 0


def build_parts(request: ComplianceRequest) -> list[Part]:
    parts: list[Part] = [
        f"name: {request.name.strip()}",
        f"description: {request.description.strip()}",
        f"category: {request.category_name.strip()}",
    ]
    if request.photo is not None:
        parts.append((request.photo, request.photo_media_type or "application/octet-stream"))
    return parts


def fingerprint_parts(parts: Sequence[Part]) -> str:
    """Stable key for fixture lookups. Only text parts contribute, so canned
    responses can be authored from listing fields alone."""
    digest = hashlib.sha256()
    for part in parts:
        if isinstance(part, str):
            digest.update(part.encode("utf-8"))
            digest.update(b"\x1f")
    return digest.hexdigest()


class VerdictSchemaError(ValueError):
    pass


def parse_verdict(raw: str) -> tuple[bool, str | None]:
    """Enforce the verdict schema exactly; anything else raises."""
    try:
        payload = json.loads(raw)
    except (json.JSONDecodeError, TypeError) as exc:
        raise VerdictSchemaError(f"not JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise VerdictSchemaError("verdict must be a JSON object")
    if not set(payload) <= {"compliant", "reason"}:
        raise VerdictSchemaError(f"unknown fields: {sorted(set(payload) - {'compliant', 'reason'})}")
    compliant = payload.get("compliant")
    if not isinstance(compliant, bool):
        raise VerdictSchemaError("'compliant' must be a boolean")
    reason = payload.get("reason")
    if reason is not None and not isinstance(reason, str):
        raise VerdictSchemaError("'reason' must be a string")
    if not compliant and not reason:
        raise VerdictSchemaError("'reason' is required when compliant is false")
    return compliant, reason


def classify(
    request: ComplianceRequest, client: ClassifierClient, system_prompt: str
) -> ComplianceVerdict:
    """One retry on any failure, then fail closed."""
    parts = build_parts(request)
    calls = 0
    for _ in range(2):
        try:
            calls += 1
            raw = client.classify(system_prompt, parts)
            compliant, reason = parse_verdict(raw)
        except Exception:
            continue
        return ComplianceVerdict(compliant=compliant, reason=reason, classifier_calls=calls)
    return ComplianceVerdict(compliant=False, reason=FAIL_CLOSED_REASON, classifier_calls=calls)


def check_compliance(
    request: ComplianceRequest,
    config: BlacklistConfig,
    client: ClassifierClient,
    system_prompt: str,
) -> ComplianceVerdict:
    joined = f"{request.name} {request.description} {request.category_name}"
    term = check_blacklist(joined, config)
    if term is not None:
        return ComplianceVerdict(
            compliant=False, reason=f"blacklisted term: {term}", classifier_calls=0
        )
    return classify(request, client, system_prompt)


def default_system_prompt() -> str:
    return resources.files("campusmarket.assets").joinpath("classifier_prompt_v1.txt").read_text(
        encoding="utf-8"
    )


class ComplianceChecker:
    """The two stages bundled with their configuration."""

    def __init__(
        self,
        blacklist: BlacklistConfig,
        client: ClassifierClient,
        system_prompt: str | None = None,
    ):
        self.blacklist = blacklist
        self.client = client
        self.system_prompt = system_prompt if system_prompt is not None else default_system_prompt()

    def check(self, request: ComplianceRequest) -> ComplianceVerdict:
        return check_compliance(request, self.blacklist, self.client, self.system_prompt)


# --- mock adapter -------------------------------------------------------------

class MockClassifierClient:
    """Deterministic fixture-driven adapter.

    ``responses`` maps a request fingerprint to a canned raw response (or a
    list of responses consumed in order, last one repeating, handy for retry
    scripts). ``script`` ignores fingerprints and replays responses in call
    order. A request with no canned answer raises, which the pipeline folds
    into its fail-closed verdict.
    """

    def __init__(
        self,
        responses: dict[str, str | list[str]] | None = None,
        default: str | None = None,
        script: list[str] | None = None,
    ):
        self.responses = dict(responses or {})
        self.default = default
        self.script = list(script) if script is not None else None
        self.calls = 0
        self._cursors: dict[str, int] = {}

    @classmethod
    def from_file(cls, path: str | Path) -> "MockClassifierClient":
        """Fixture JSON: ``{"default": raw?, "responses": [{"name", "description",
        "category", "response"}, ...]}``. Entries are fingerprinted on load."""
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        responses: dict[str, str | list[str]] = {}
        for entry in doc.get("responses", []):
            request = ComplianceRequest(
                name=entry["name"],
                description=entry.get("description", ""),
                category_name=entry.get("category", ""),
            )
            responses[fingerprint_parts(build_parts(request))] = entry["response"]
        return cls(responses=responses, default=doc.get("default"))

    def classify(self, system_prompt: str, parts: Sequence[Part]) -> str:
        self.calls += 1
        if self.script is not None:
            index = min(self.calls - 1, len(self.script) - 1)
            if index < 0:
                raise RuntimeError("mock classifier has no scripted response")
            return self.script[index]
        key = fingerprint_parts(parts)
        canned = self.responses.get(key)
        if canned is None:
            if self.default is None:
                raise RuntimeError("mock classifier has no response for this request")
            return self.default
        if isinstance(canned, list):
            cursor = self._cursors.get(key, 0)
            self._cursors[key] = cursor + 1
            return canned[min(cursor, len(canned) - 1)]
        return canned
