"""Operation counters.

Crypto and protocol code reports what it does (scalar multiplications,
transmissions, encryptions) through :func:`record` and :func:`send`.  Any
number of :class:`Meter` objects may be active at once; each one sees every
report made while it is active, so a per-operation meter nested inside a
per-run meter does not steal counts from it.
"""

from __future__ import annotations

import contextvars
from collections import Counter
from contextlib import contextmanager
from typing import Iterator

_active: contextvars.ContextVar[tuple["Meter", ...]] = contextvars.ContextVar(
    "regionkey_meters", default=()
)


class Meter:
    """A bag of named counters.

    Well-known names: ``scalar_mults``, ``messages`` (logical transmissions,
    one per unicast or multicast), ``bytes`` (wire bytes per transmission),
    ``deliveries`` (one per receiving node), ``delivered_bytes``,
    ``encrypt``/``decrypt`` and their key-scoped variants ``kr_encrypt``,
    ``kg_decrypt`` and so on.
    """

    def __init__(self) -> None:
        self.counts: Counter[str] = Counter()

    def __getitem__(self, name: str) -> int:
        return self.counts[name]

    def __repr__(self) -> str:
        return f"Meter({dict(self.counts)})"

    def snapshot(self) -> dict[str, int]:
        return dict(self.counts)


def record(name: str, amount: int = 1) -> None:
    for meter in _active.get():
        meter.counts[name] += amount


def send(nbytes: int, recipients: int = 1) -> None:
    """Account for one transmission of ``nbytes`` reaching ``recipients`` nodes."""
    for meter in _active.get():
        c = meter.counts
        c["messages"] += 1
        c["bytes"] += nbytes
        c["deliveries"] += recipients
        c["delivered_bytes"] += nbytes * recipients


@contextmanager
def metered(meter: Meter | None = None) -> Iterator[Meter]:
    meter = meter if meter is not None else Meter()
    token = _active.set(_active.get() + (meter,))
    try:
        yield meter
    finally:
        _active.reset(token)
