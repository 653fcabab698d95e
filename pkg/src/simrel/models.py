"""Model types, the text format, and derived structure.

All numbers are exact ``Fraction`` values.  The auxiliary state that absorbs
the missing mass of a sub-distribution is never stored; it appears only in
networks and LPs under the index ``BOT``.
"""

from __future__ import annotations

import enum
import re
from collections import deque
from collections.abc import Iterable, Iterator, Mapping
from fractions import Fraction
from functools import cached_property

__all__ = [
    "BOT",
    "Distribution",
    "Kind",
    "Model",
    "ModelError",
    "RateFunction",
    "Relation",
    "embedded_dtmc",
    "induced_distribution",
    "label_equal_pairs",
    "parse_model",
    "serialize_model",
]

BOT = -1
"""Index of the auxiliary bottom state inside networks and LPs."""

ZERO = Fraction(0)
ONE = Fraction(1)


class ModelError(ValueError):
    """Raised for malformed model files and invalid model data."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class Kind(str, enum.Enum):
    FPS = "FPS"
    DTMC = "DTMC"
    CTMC = "CTMC"
    PA = "PA"
    CPA = "CPA"

    @property
    def is_automaton(self) -> bool:
        return self in (Kind.PA, Kind.CPA)

    @property
    def uses_rates(self) -> bool:
        return self in (Kind.CTMC, Kind.CPA)


class _Entries(Mapping):
    """Immutable state -> positive rational map, iterated in state order."""

    __slots__ = ("_data", "_total")

    def __init__(self, entries: Mapping[int, Fraction] | Iterable[tuple[int, Fraction]] = ()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        data: dict[int, Fraction] = {}
        for state, value in items:
            value = Fraction(value)
            if value <= 0:
                raise ModelError(f"non-positive entry {value} for state {state}")
            if state in data:
                raise ModelError(f"duplicate entry for state {state}")
            data[state] = value
        self._data = dict(sorted(data.items()))
        self._total = sum(self._data.values(), ZERO)

    def __getitem__(self, state: int) -> Fraction:
        return self._data[state]

    def __call__(self, state: int) -> Fraction:
        return self._data.get(state, ZERO)

    def __iter__(self) -> Iterator[int]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __hash__(self) -> int:
        return hash(tuple(self._data.items()))

    def __eq__(self, other: object) -> bool:
        if isinstance(other, _Entries):
            return type(self) is type(other) and self._data == other._data
        return NotImplemented

    def __repr__(self) -> str:
        body = ", ".join(f"{s}: {v}" for s, v in self._data.items())
        return f"{type(self).__name__}({{{body}}})"

    @property
    def support(self) -> frozenset[int]:
        return frozenset(self._data)


class Distribution(_Entries):
    """Sub-distribution over states: positive entries summing to at most one."""

    __slots__ = ()

    def __init__(self, entries=()):
        super().__init__(entries)
        if self._total > 1:
            raise ModelError(f"distribution mass {self._total} exceeds 1")

    @property
    def mass(self) -> Fraction:
        return self._total

    @property
    def deficit(self) -> Fraction:
        """Mass of the bottom state, 1 - mu(S)."""
        return ONE - self._total

    def with_bot(self) -> dict[int, Fraction]:
        """Support including BOT when the deficit is positive."""
        out = dict(self._data)
        if self._total < 1:
            out[BOT] = ONE - self._total
        return out


class RateFunction(_Entries):
    """Positive rates to successor states."""

    __slots__ = ()

    @property
    def exit_rate(self) -> Fraction:
        return self._total


def induced_distribution(r: RateFunction) -> Distribution:
    """Normalise a rate function; the zero function induces the empty distribution."""
    if r.exit_rate == 0:
        return Distribution()
    return Distribution({s: v / r.exit_rate for s, v in r.items()})


class Model:
    """Immutable labelled model of one of the five supported kinds.

    ``rows[s]`` holds the Distribution (FPS/DTMC) or RateFunction (CTMC) of
    ``s``.  For PA/CPA, ``steps[(s, action)]`` is the tuple of successor
    distributions or rate functions in file order.
    """

    def __init__(
        self,
        kind: Kind | str,
        n: int,
        labels: Iterable[Iterable[str]] | Mapping[int, Iterable[str]] = (),
        rows: Mapping[int, Mapping[int, Fraction]] | None = None,
        steps: Mapping[tuple[int, str], Iterable[Mapping[int, Fraction]]] | None = None,
        names: Iterable[str] | None = None,
    ):
        self.kind = Kind(kind)
        if n < 1:
            raise ModelError("a model needs at least one state")
        self.n = n
        if isinstance(labels, Mapping):
            lab = [frozenset()] * n
            for s, props in labels.items():
                self._check_state(s)
                lab[s] = frozenset(props)
        else:
            lab = [frozenset(p) for p in labels]
            lab += [frozenset()] * (n - len(lab))
            if len(lab) != n:
                raise ModelError("more label sets than states")
        self.labels: tuple[frozenset[str], ...] = tuple(lab)
        self.names: tuple[str, ...] | None = tuple(names) if names is not None else None
        if self.names is not None:
            if len(self.names) != n or len(set(self.names)) != n:
                raise ModelError("names must be unique and cover every state")

        entry_type = RateFunction if self.kind.uses_rates else Distribution
        if self.kind.is_automaton:
            if rows:
                raise ModelError(f"{self.kind.value} models take steps, not rows")
            built: dict[tuple[int, str], tuple] = {}
            for (s, action), group in sorted((steps or {}).items()):
                self._check_state(s)
                if not action:
                    raise ModelError("empty action name")
                group = tuple(entry_type(e) for e in group)
                for e in group:
                    for t in e:
                        self._check_state(t)
                if group:
                    built[(s, action)] = group
            self.steps: dict[tuple[int, str], tuple] = built
            self.rows: tuple = ()
        else:
            if steps:
                raise ModelError(f"{self.kind.value} models take rows, not steps")
            row_list = [entry_type()] * n
            for s, entries in (rows or {}).items():
                self._check_state(s)
                row = entry_type(entries)
                for t in row:
                    self._check_state(t)
                if self.kind is Kind.DTMC and len(row) and row.mass != 1:
                    raise ModelError(f"DTMC row {s} sums to {row.mass}, expected 1 or 0")
                row_list[s] = row
            self.rows = tuple(row_list)
            self.steps = {}

    def _check_state(self, s: int) -> None:
        if not isinstance(s, int) or not 0 <= s < self.n:
            raise ModelError(f"state {s} out of range [0, {self.n})")

    # -- accessors -----------------------------------------------------

    @property
    def P(self) -> tuple[Distribution, ...]:
        if self.kind not in (Kind.FPS, Kind.DTMC):
            raise AttributeError(f"{self.kind.value} model has no probability rows")
        return self.rows

    @property
    def R(self) -> tuple[RateFunction, ...]:
        if self.kind is not Kind.CTMC:
            raise AttributeError(f"{self.kind.value} model has no rate rows")
        return self.rows

    def name(self, s: int) -> str:
        return self.names[s] if self.names is not None else str(s)

    def state(self, token: str) -> int:
        """Resolve a display name or integer id."""
        if self.names is not None and token in self.names:
            return self.names.index(token)
        try:
            s = int(token)
        except ValueError:
            raise ModelError(f"unknown state {token!r}") from None
        self._check_state(s)
        return s

    @cached_property
    def actions(self) -> tuple[frozenset[str], ...]:
        acts: list[set[str]] = [set() for _ in range(self.n)]
        for s, action in self.steps:
            acts[s].add(action)
        return tuple(frozenset(a) for a in acts)

    def steps_of(self, s: int, action: str) -> tuple:
        return self.steps.get((s, action), ())

    @cached_property
    def _post(self) -> tuple[frozenset[int], ...]:
        succ: list[set[int]] = [set() for _ in range(self.n)]
        if self.kind.is_automaton:
            for (s, _), group in self.steps.items():
                for e in group:
                    succ[s].update(e)
        else:
            for s, row in enumerate(self.rows):
                succ[s].update(row)
        return tuple(frozenset(x) for x in succ)

    @cached_property
    def _pre(self) -> tuple[frozenset[int], ...]:
        pred: list[set[int]] = [set() for _ in range(self.n)]
        for s, succ in enumerate(self._post):
            for t in succ:
                pred[t].add(s)
        return tuple(frozenset(x) for x in pred)

    def post(self, s: int) -> frozenset[int]:
        return self._post[s]

    def pre(self, s: int) -> frozenset[int]:
        return self._pre[s]

    def reach(self, s: int) -> frozenset[int]:
        """States reachable in one or more steps; s itself only via a cycle."""
        seen: set[int] = set()
        queue = deque(self._post[s])
        seen.update(queue)
        while queue:
            for t in self._post[queue.popleft()]:
                if t not in seen:
                    seen.add(t)
                    queue.append(t)
        return frozenset(seen)

    @cached_property
    def m(self) -> int:
        """Number of stored transition entries."""
        if self.kind.is_automaton:
            return sum(len(e) for group in self.steps.values() for e in group)
        return sum(len(row) for row in self.rows)

    @cached_property
    def fanout(self) -> int:
        return max((len(p) for p in self._post), default=0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Model):
            return NotImplemented
        return (self.kind, self.n, self.labels, self.names, self.rows, self.steps) == (
            other.kind, other.n, other.labels, other.names, other.rows, other.steps)

    def __hash__(self) -> int:
        return hash((self.kind, self.n, self.labels, self.rows))

    def __repr__(self) -> str:
        return f"Model({self.kind.value}, n={self.n}, m={self.m})"


def embedded_dtmc(c: Model) -> Model:
    """Embedded DTMC of a CTMC: each non-absorbing row normalised by its exit rate."""
    if c.kind is not Kind.CTMC:
        raise ModelError(f"embedded DTMC needs a CTMC, got {c.kind.value}")
    rows = {s: induced_distribution(r) for s, r in enumerate(c.rows)}
    return Model(Kind.DTMC, c.n, c.labels, rows=rows, names=c.names)


class Relation:
    """Immutable set of state pairs with image and preimage indexes."""

    __slots__ = ("_image", "_pairs", "_preimage")

    def __init__(self, pairs: Iterable[tuple[int, int]] = ()):
        self._pairs = frozenset((int(a), int(b)) for a, b in pairs)
        image: dict[int, set[int]] = {}
        preimage: dict[int, set[int]] = {}
        for a, b in self._pairs:
            image.setdefault(a, set()).add(b)
            preimage.setdefault(b, set()).add(a)
        self._image = {a: frozenset(bs) for a, bs in image.items()}
        self._preimage = {b: frozenset(as_) for b, as_ in preimage.items()}

    def __contains__(self, pair: object) -> bool:
        return pair in self._pairs

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(sorted(self._pairs))

    def __len__(self) -> int:
        return len(self._pairs)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Relation):
            return self._pairs == other._pairs
        if isinstance(other, (set, frozenset)):
            return self._pairs == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._pairs)

    def __le__(self, other: Relation) -> bool:
        return self._pairs <= other._pairs

    def __repr__(self) -> str:
        return f"Relation({sorted(self._pairs)})"

    @property
    def pairs(self) -> frozenset[tuple[int, int]]:
        return self._pairs

    def image(self, s: int) -> frozenset[int]:
        """R(s) = {t | s R t}."""
        return self._image.get(s, frozenset())

    def preimage(self, t: int) -> frozenset[int]:
        """R^-1(t) = {s | s R t}."""
        return self._preimage.get(t, frozenset())

    def without(self, pairs: Iterable[tuple[int, int]]) -> Relation:
        return Relation(self._pairs.difference(pairs))


def label_equal_pairs(model: Model) -> Relation:
    by_label: dict[frozenset[str], list[int]] = {}
    for s, lab in enumerate(model.labels):
        by_label.setdefault(lab, []).append(s)
    return Relation((a, b) for group in by_label.values() for a in group for b in group)


# -- text format -------------------------------------------------------

_NUMBER = re.compile(r"^(\d+(\.\d*)?|\.\d+)(/\d+)?$")


def _number(token: str, line: int) -> Fraction:
    if token.startswith("-"):
        raise ModelError(f"negative value {token!r}", line)
    if not _NUMBER.match(token) or ("/" in token and "." in token):
        raise ModelError(f"malformed number {token!r}", line)
    try:
        value = Fraction(token)
    except (ValueError, ZeroDivisionError):
        raise ModelError(f"malformed number {token!r}", line) from None
    if value == 0:
        raise ModelError("zero-valued transition", line)
    return value


def _int(token: str, line: int, what: str) -> int:
    if not token.isdigit():
        raise ModelError(f"expected {what}, got {token!r}", line)
    return int(token)


def parse_model(text: str | bytes) -> Model:
    """Parse the line-oriented model format; errors carry line numbers."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = []
    for number, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].split()
        if body:
            lines.append((number, body))
    if not lines:
        raise ModelError("empty model file")

    it = iter(lines)
    number, body = next(it)
    if len(body) != 2 or body[0] != "MODEL":
        raise ModelError("expected 'MODEL <kind>'", number)
    try:
        kind = Kind(body[1])
    except ValueError:
        raise ModelError(f"unknown model kind {body[1]!r}", number) from None
    number, body = next(it, (number, None))
    if body is None or len(body) != 2 or body[0] != "STATES":
        raise ModelError("expected 'STATES <n>'", number)
    n = _int(body[1], number, "state count")
    if n < 1:
        raise ModelError("a model needs at least one state", number)

    def state(token: str, line: int) -> int:
        s = _int(token, line, "state index")
        if s >= n:
            raise ModelError(f"state {s} out of range [0, {n})", line)
        return s

    labels: dict[int, frozenset[str]] = {}
    names: dict[int, str] = {}
    flat: dict[int, dict[int, Fraction]] = {}
    grouped: dict[tuple[int, str], dict[str, dict[int, Fraction]]] = {}
    section = None
    seen_sections: set[str] = set()
    ended = False
    for number, body in it:
        if ended:
            raise ModelError("content after END", number)
        head = body[0]
        if head in ("LABELS", "TRANSITIONS", "NAMES") and len(body) == 1:
            if head in seen_sections:
                raise ModelError(f"duplicate {head} section", number)
            seen_sections.add(head)
            section = head
            continue
        if head == "END" and len(body) == 1:
            ended = True
            continue
        if section is None:
            raise ModelError(f"unexpected line outside a section: {' '.join(body)!r}", number)
        if section == "LABELS":
            s = state(head, number)
            if s in labels:
                raise ModelError(f"duplicate label line for state {s}", number)
            labels[s] = frozenset(body[1:])
        elif section == "NAMES":
            if len(body) != 2:
                raise ModelError("expected '<state> <name>'", number)
            s = state(head, number)
            if s in names:
                raise ModelError(f"duplicate name for state {s}", number)
            if body[1] in names.values():
                raise ModelError(f"name {body[1]!r} used twice", number)
            names[s] = body[1]
        elif not kind.is_automaton:
            if len(body) != 3:
                raise ModelError("expected '<src> <dst> <value>'", number)
            src, dst = state(body[0], number), state(body[1], number)
            row = flat.setdefault(src, {})
            if dst in row:
                raise ModelError(f"duplicate transition {src} -> {dst}", number)
            row[dst] = _number(body[2], number)
            if not kind.uses_rates and sum(row.values()) > 1:
                raise ModelError(f"outgoing probability of state {src} exceeds 1", number)
        else:
            if len(body) != 5:
                raise ModelError("expected '<src> <action> <dist-index> <dst> <value>'", number)
            src = state(body[0], number)
            index = str(_int(body[2], number, "distribution index"))
            dst = state(body[3], number)
            dist = grouped.setdefault((src, body[1]), {}).setdefault(index, {})
            if dst in dist:
                raise ModelError(f"duplicate transition {src} {body[1]} {index} -> {dst}", number)
            dist[dst] = _number(body[4], number)
            if not kind.uses_rates and sum(dist.values()) > 1:
                raise ModelError(f"distribution {src} {body[1]} {index} exceeds mass 1", number)
    if not ended:
        raise ModelError("missing END", lines[-1][0])
    if names and len(names) != n:
        raise ModelError("NAMES must name every state")

    if kind is Kind.DTMC:
        for src, row in flat.items():
            if sum(row.values()) != 1:
                raise ModelError(f"DTMC row {src} sums to {sum(row.values())}, expected 1 or 0")
    name_list = [names[s] for s in range(n)] if names else None
    if kind.is_automaton:
        steps = {key: [d for d in group.values()] for key, group in grouped.items()}
        return Model(kind, n, labels, steps=steps, names=name_list)
    return Model(kind, n, labels, rows=flat, names=name_list)


def serialize_model(model: Model) -> str:
    """Canonical text form; ``parse_model`` inverts it exactly."""
    out = [f"MODEL {model.kind.value}", f"STATES {model.n}"]
    if model.names is not None:
        out.append("NAMES")
        out += [f"{s} {name}" for s, name in enumerate(model.names)]
    out.append("LABELS")
    out += [
        " ".join([str(s), *sorted(lab)])
        for s, lab in enumerate(model.labels)
        if lab
    ]
    out.append("TRANSITIONS")
    if model.kind.is_automaton:
        for (s, action), group in sorted(model.steps.items()):
            for i, entries in enumerate(group):
                out += [f"{s} {action} {i} {t} {v}" for t, v in entries.items()]
    else:
        for s, row in enumerate(model.rows):
            out += [f"{s} {t} {v}" for t, v in row.items()]
    out.append("END")
    return "\n".join(out) + "\n"
