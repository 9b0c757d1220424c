"""Canonical JSON and date formatting shared by the store, cache, and exports."""

from __future__ import annotations

import json
from datetime import date, datetime, timezone
from typing import Any

DATE_FMT = "%Y-%m-%d"
TIMESTAMP_FMT = "%Y-%m-%dT%H:%M:%SZ"


def canonical_json(obj: Any) -> str:
    """Deterministic JSON: sorted keys, no whitespace, unicode kept verbatim."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def format_date(d: date | None) -> str | None:
    return None if d is None else d.strftime(DATE_FMT)


def parse_date(s: str | None) -> date | None:
    if s is None or s == "":
        return None
    return datetime.strptime(s[:10], DATE_FMT).date()


def format_timestamp(ts: datetime) -> str:
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    return ts.strftime(TIMESTAMP_FMT)


def parse_timestamp(s: str) -> datetime:
    return datetime.strptime(s, TIMESTAMP_FMT)


def utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(tzinfo=None, microsecond=0)
