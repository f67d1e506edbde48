"""Canonical configurations, counters, and finite superpositions over them.

A configuration is the classical snapshot ⟨left, state, right, counter⟩:
the head reads the first symbol of ``right`` (blank when empty), ``left``
never starts with a blank, ``right`` never ends with one, and the counter
is zero unless the state is a source or a target.  Superpositions are
finite complex combinations of configurations with the inner product
conjugate-linear in the first argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .amplitudes import parse_amplitude
from .errors import (
    NonInitialTermError,
    NonZeroCounterError,
    NotNormalizedError,
    ParseError,
    UnknownStateError,
    UnknownSymbolError,
)
from .machine import BLANK, ONE, Machine

#: terms with amplitude magnitude below this are dropped after arithmetic
PRUNE_THRESHOLD = 1e-15

#: tolerance for "this superposition is normalized" checks
NORM_TOLERANCE = 1e-8

_MACRON = "̄"


def _strip_left(tape) -> tuple[str, ...]:
    tape = tuple(tape)
    i = 0
    while i < len(tape) and tape[i] == BLANK:
        i += 1
    return tape[i:]


def _strip_right(tape) -> tuple[str, ...]:
    tape = tuple(tape)
    j = len(tape)
    while j > 0 and tape[j - 1] == BLANK:
        j -= 1
    return tape[:j]


@dataclass(frozen=True)
class Configuration:
    """One basis configuration, kept in canonical (blank-trimmed) form.

    Equivalent raw tapes (padded with blanks on the outside) collapse to
    the same object, so dict keys and equality behave like the quotient.
    """

    left: tuple[str, ...]
    state: str
    right: tuple[str, ...]
    counter: int = 0

    def __post_init__(self):
        object.__setattr__(self, "left", _strip_left(self.left))
        object.__setattr__(self, "right", _strip_right(self.right))
        if self.counter < 0:
            raise ValueError(f"counter must be non-negative, got {self.counter}")

    def head_symbol(self) -> str:
        return self.right[0] if self.right else BLANK

    def with_counter(self, counter: int) -> "Configuration":
        return Configuration(self.left, self.state, self.right, counter)

    def sort_key(self):
        return (self.state, self.counter, self.left, self.right)

    def __str__(self):
        left = "".join(self.left) or "λ"
        right = "".join(self.right) or "λ"
        return f"⟨{left}, {self.state}, {right}, {self.counter}⟩"


def canonicalize(machine: Machine, left, state: str, right, counter: int = 0) -> Configuration:
    """Build a configuration for ``machine``, trimming blank padding.

    Raises on states or symbols the machine does not know, and on a
    positive counter at a state that is neither source nor target.
    """
    if state not in machine.states:
        raise UnknownStateError(f"unknown state {state!r}")
    symbols = set(machine.alphabet)
    for cell in tuple(left) + tuple(right):
        if cell not in symbols:
            raise UnknownSymbolError(f"unknown symbol {cell!r} on the tape")
    if counter != 0 and state not in machine.sources and state not in machine.targets:
        raise NonZeroCounterError(
            f"counter {counter} at plain state {state!r}; only sources and targets count")
    return Configuration(tuple(left), state, tuple(right), counter)


def tape_value(config: Configuration) -> int:
    """The numeric readout of a configuration: how many 1 cells the tape holds."""
    return sum(1 for cell in config.left if cell == ONE) + \
        sum(1 for cell in config.right if cell == ONE)


@dataclass(frozen=True)
class ConfigClass:
    source: bool
    target: bool
    initial: bool
    final: bool


def classify(machine: Machine, config: Configuration) -> ConfigClass:
    """Source/target/initial/final flags of a configuration's state."""
    q = config.state
    if q not in machine.states:
        raise UnknownStateError(f"unknown state {q!r}")
    return ConfigClass(
        source=q in machine.sources,
        target=q in machine.targets,
        initial=q == machine.initial,
        final=q == machine.final,
    )


class Superposition:
    """A finite complex combination of configurations.

    Immutable by convention: arithmetic returns new instances, and terms
    with magnitude below PRUNE_THRESHOLD are dropped on construction.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Configuration, complex] | Iterable = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        store: dict[Configuration, complex] = {}
        for config, amp in items:
            amp = complex(amp)
            if abs(amp) < PRUNE_THRESHOLD:
                continue
            store[config] = store.get(config, 0j) + amp
        self._terms = {c: a for c, a in store.items() if abs(a) >= PRUNE_THRESHOLD}

    @classmethod
    def basis(cls, config: Configuration) -> "Superposition":
        return cls({config: 1.0 + 0j})

    @property
    def terms(self) -> Mapping[Configuration, complex]:
        return self._terms

    def items(self) -> list[tuple[Configuration, complex]]:
        """Terms in the canonical (state, counter, tapes) order."""
        return sorted(self._terms.items(), key=lambda kv: kv[0].sort_key())

    def support(self) -> frozenset[Configuration]:
        return frozenset(self._terms)

    def __getitem__(self, config: Configuration) -> complex:
        return self._terms.get(config, 0j)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[Configuration]:
        return iter(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def inner(self, other: "Superposition") -> complex:
        """⟨self|other⟩, conjugate-linear in self."""
        mine, theirs = self._terms, other._terms
        if len(theirs) < len(mine):
            return sum(mine[c].conjugate() * a for c, a in theirs.items() if c in mine)
        return sum(a.conjugate() * theirs[c] for c, a in mine.items() if c in theirs)

    def __eq__(self, other):
        if not isinstance(other, Superposition):
            return NotImplemented
        return self._terms == other._terms

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self._terms.values()))

    def scaled(self, factor: complex) -> "Superposition":
        return Superposition({c: a * factor for c, a in self._terms.items()})

    def __add__(self, other: "Superposition") -> "Superposition":
        merged = dict(self._terms)
        for c, a in other._terms.items():
            merged[c] = merged.get(c, 0j) + a
        return Superposition(merged)

    def __sub__(self, other: "Superposition") -> "Superposition":
        return self + other.scaled(-1.0)

    def normalized(self) -> "Superposition":
        n = self.norm()
        if n == 0.0:
            raise NotNormalizedError("cannot normalize the zero superposition")
        return self.scaled(1.0 / n)

    def __repr__(self):
        inside = " + ".join(f"{a:.4g}·{c}" for c, a in self.items()[:4])
        more = "" if len(self) <= 4 else f" (+{len(self) - 4} terms)"
        return f"Superposition[{inside}{more}]"


def initial_config(machine: Machine, n: int) -> Configuration:
    """The start configuration on the unary numeral tape for ``n`` (n+1 ones)."""
    return canonicalize(machine, (), machine.initial, (ONE,) * (n + 1), 0)


def from_number_weights(machine: Machine, weights: Mapping[int, complex]) -> Superposition:
    """Lift a weighted set of naturals to the superposition of their numeral inputs."""
    return Superposition({initial_config(machine, n): amp for n, amp in weights.items()})


def check_initial(machine: Machine, phi: Superposition) -> None:
    """Require every term to sit in the machine's initial state."""
    for config in phi:
        if config.state != machine.initial:
            raise NonInitialTermError(
                f"term {config} is not an initial configuration "
                f"(state {machine.initial!r} expected)")


# -- the textual input grammar ----------------------------------------------

def _parse_tape(body: str, machine: Machine, line: int | None = None) -> tuple[str, ...]:
    symbols = set(machine.alphabet)
    tape: list[str] = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch.isspace():
            i += 1
            continue
        if body.startswith("nbar:", i):
            j = i + 5
            k = j
            while k < len(body) and body[k].isdigit():
                k += 1
            if k == j:
                raise ParseError("nbar: needs digits", line)
            tape.extend([ONE] * (int(body[j:k]) + 1))
            i = k
            continue
        if ch.isdigit():
            k = i
            while k < len(body) and body[k].isdigit():
                k += 1
            if k < len(body) and body[k] == _MACRON:
                tape.extend([ONE] * (int(body[i:k]) + 1))
                i = k + 1
                continue
        if ch not in symbols:
            raise UnknownSymbolError(f"unknown symbol {ch!r} in tape literal")
        tape.append(ch)
        i += 1
    return tuple(tape)


def parse_input(text: str, machine: Machine) -> Superposition:
    """Parse an input description like ``1/sqrt(2)|0̄⟩ + 1/sqrt(2)|2̄⟩``.

    Kets accept the bar numeral (``|3̄⟩`` or ASCII ``|nbar:3⟩``, meaning a
    tape of n+1 ones) and raw tape literals such as ``|$111⟩``.  Terms on
    the same ket add, every term starts in the initial state with counter
    zero, and the total squared amplitude must be 1 within 1e-9.
    """
    terms: dict[Configuration, complex] = {}
    pos = 0
    count = 0
    while True:
        bar = text.find("|", pos)
        if bar < 0:
            if text[pos:].strip():
                raise ParseError(f"trailing text {text[pos:].strip()!r} after last ket")
            break
        close_u = text.find("⟩", bar + 1)
        close_a = text.find(">", bar + 1)
        close = min(c for c in (close_u, close_a) if c >= 0) if max(close_u, close_a) >= 0 else -1
        if close < 0:
            raise ParseError("unclosed ket: missing ⟩")
        amp_text = text[pos:bar].strip()
        if count > 0:
            if amp_text.startswith("+"):
                amp_text = amp_text[1:].strip()
            elif amp_text.startswith("-"):
                pass  # the sign belongs to the amplitude expression
            elif amp_text == "":
                raise ParseError("ket terms must be joined with +")
        amp = parse_amplitude(amp_text) if amp_text else 1.0 + 0j
        tape = _parse_tape(text[bar + 1:close], machine)
        config = canonicalize(machine, (), machine.initial, tape, 0)
        terms[config] = terms.get(config, 0j) + amp
        pos = close + 1
        count += 1
    if count == 0:
        raise ParseError("input holds no ket")
    mass = sum(abs(a) ** 2 for a in terms.values())
    if abs(mass - 1.0) > 1e-9:
        raise NotNormalizedError(f"input mass {mass:.12g} is not 1")
    return Superposition(terms)
