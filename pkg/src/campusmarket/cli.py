"""Operations entry point: serve the API, seed categories, run the
moderation corpus, promote admins.

Reports go to stdout as JSON; everything chatty goes to stderr. Exit codes:
0 success, 1 bad input (config, file, unknown email, corpus disagreement),
2 unbindable address.
"""

from __future__ import annotations

import json
import socket
import sys
from pathlib import Path

import click

from .bootstrap import build_runtime
from .compliance import (
    BlacklistConfig,
    ComplianceRequest,
    MockClassifierClient,
    build_parts,
    check_compliance,
    default_system_prompt,
    fingerprint_parts,
    load_blacklist,
)
from .config import AppConfig, ConfigError, load_config
from .errors import VersionConflict
from .persistence import FileDocumentStore


def _load(config_path: str) -> AppConfig:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)


@click.group()
def main() -> None:
    """Campus second-hand market operations tool."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
def serve(config_path: str) -> None:
    """Run the HTTP service until interrupted."""
    import uvicorn

    from .api import create_app

    config = _load(config_path)
    try:
        config.require_data_dir()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)

    # claim the port up front so a taken address is a clean exit, not a stack trace
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        probe.bind((config.bind_host, config.bind_port))
    except OSError as exc:
        click.echo(f"cannot bind {config.bind_host}:{config.bind_port}: {exc}", err=True)
        sys.exit(2)
    finally:
        probe.close()

    runtime = build_runtime(config)
    app = create_app(runtime)
    click.echo(f"listening on {config.bind_host}:{config.bind_port}", err=True)
    try:
        uvicorn.run(app, host=config.bind_host, port=config.bind_port, log_level="warning")
    finally:
        runtime.close()


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.argument("categories_file", type=click.Path())
def seed(config_path: str, categories_file: str) -> None:
    """Upsert categories from a newline-delimited file; prints the count."""
    config = _load(config_path)
    try:
        text = Path(categories_file).read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"cannot read {categories_file}: {exc}", err=True)
        sys.exit(1)
    names = [line.strip() for line in text.splitlines() if line.strip()]
    try:
        config.require_data_dir()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    runtime = build_runtime(config)
    try:
        count = runtime.catalog.seed_categories(names)
    finally:
        runtime.close()
    click.echo(count)


@main.command("check-corpus")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.argument("corpus_file", type=click.Path())
def check_corpus(config_path: str, corpus_file: str) -> None:
    """Run every corpus fixture through the moderation pipeline and compare
    against its recorded expectations. Exit 0 only on full agreement."""
    config = _load(config_path)
    if config.blacklist_path is not None:
        blacklist = load_blacklist(config.blacklist_path)
    else:
        blacklist = BlacklistConfig(terms=frozenset())
    try:
        lines = Path(corpus_file).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        click.echo(f"cannot read {corpus_file}: {exc}", err=True)
        sys.exit(1)

    fixtures = []
    responses: dict[str, str | list] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            fixture = {
                "id": entry["id"],
                "request": ComplianceRequest(
                    name=entry["name"],
                    description=entry.get("description", ""),
                    category_name=entry.get("category", ""),
                ),
                "expect_compliant": entry["expect_compliant"],
                "expect_reason_substring": entry.get("expect_reason_substring"),
                "expect_classifier_calls": entry.get("expect_classifier_calls"),
            }
        except (ValueError, KeyError, TypeError) as exc:
            click.echo(f"malformed corpus line {lineno}: {exc}", err=True)
            sys.exit(1)
        if entry.get("mock_response") is not None:
            responses[fingerprint_parts(build_parts(fixture["request"]))] = entry["mock_response"]
        fixtures.append(fixture)

    client = MockClassifierClient(responses=responses)
    prompt = default_system_prompt()
    failures = []
    for fixture in fixtures:
        verdict = check_compliance(fixture["request"], blacklist, client, prompt)
        problems = []
        if verdict.compliant != fixture["expect_compliant"]:
            problems.append(
                f"expected compliant={fixture['expect_compliant']}, got {verdict.compliant}"
            )
        want_reason = fixture["expect_reason_substring"]
        if want_reason is not None and want_reason not in (verdict.reason or ""):
            problems.append(f"reason {verdict.reason!r} does not contain {want_reason!r}")
        want_calls = fixture["expect_classifier_calls"]
        if want_calls is not None and verdict.classifier_calls != want_calls:
            problems.append(
                f"expected {want_calls} classifier call(s), got {verdict.classifier_calls}"
            )
        if problems:
            failures.append(
                {
                    "fixtureId": fixture["id"],
                    "expected": {
                        "compliant": fixture["expect_compliant"],
                        "reasonSubstring": want_reason,
                        "classifierCalls": want_calls,
                    },
                    "actual": {
                        "compliant": verdict.compliant,
                        "reason": verdict.reason,
                        "classifierCalls": verdict.classifier_calls,
                    },
                    "reason": "; ".join(problems),
                }
            )

    report = {
        "total": len(fixtures),
        "passed": len(fixtures) - len(failures),
        "failed": len(failures),
        "failures": failures,
    }
    click.echo(json.dumps(report, indent=2, sort_keys=True))
    sys.exit(0 if not failures else 1)


@main.command("promote-admin")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.argument("email")
def promote_admin(config_path: str, email: str) -> None:
    """Grant the admin role (1) to an existing account; idempotent."""
    config = _load(config_path)
    try:
        data_dir = config.require_data_dir()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    store = FileDocumentStore(data_dir)
    try:
        email = email.strip().lower()
        while True:
            docs = store.query("users", where=lambda b: b["email"] == email)
            if not docs:
                click.echo(f"no account for {email}", err=True)
                sys.exit(1)
            doc = docs[0]
            if doc.body.get("role") == 1:
                break
            body = dict(doc.body, role=1)
            try:
                store.compare_and_set("users", doc.id, doc.version, body)
            except VersionConflict:
                continue
            break
    finally:
        store.close()
    click.echo(f"promoted {email}", err=True)


if __name__ == "__main__":
    main()
