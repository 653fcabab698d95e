"""Run counters shared by the engines and the CLI."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, fields

COUNTERS = (
    "iterations",
    "fresh_networks",
    "smf_updates",
    "pushes",
    "relabels",
    "label_repairs",
    "lp_count",
    "lp_max_constraints",
    "lp_pivots",
    "breakpoint_computations",
    "classify_calls",
    "branch_a",
    "branch_b",
    "branch_c",
    "interval_fallbacks",
)


@dataclass
class Stats:
    """Thread-safe counters plus an optional event log.

    Events are ``(iteration, kind, pair)`` tuples with kind one of
    ``"fresh"``, ``"update"`` or ``"removed"``; they are recorded only when
    ``record_events`` is set.
    """

    iterations: int = 0
    fresh_networks: int = 0
    smf_updates: int = 0
    pushes: int = 0
    relabels: int = 0
    label_repairs: int = 0
    lp_count: int = 0
    lp_max_constraints: int = 0
    lp_pivots: int = 0
    breakpoint_computations: int = 0
    classify_calls: int = 0
    branch_a: int = 0
    branch_b: int = 0
    branch_c: int = 0
    interval_fallbacks: int = 0
    record_events: bool = False
    events: list = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def bump(self, name: str, amount: int = 1) -> None:
        with self._lock:
            setattr(self, name, getattr(self, name) + amount)

    def raise_to(self, name: str, value: int) -> None:
        with self._lock:
            if value > getattr(self, name):
                setattr(self, name, value)

    def event(self, iteration: int, kind: str, pair) -> None:
        if self.record_events:
            with self._lock:
                self.events.append((iteration, kind, pair))

    def as_dict(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in COUNTERS}


assert set(COUNTERS) <= {f.name for f in fields(Stats)}
