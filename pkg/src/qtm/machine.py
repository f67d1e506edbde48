"""Machine tables with source/target state discipline and their validation.

A machine is a finite alphabet (always containing ``1`` and the blank),
a finite state set split into source states (no incoming rules, counter
may count down), target states (no outgoing rules, counter counts up),
and ordinary states, plus a sparse transition table ``delta0`` keyed by
(state, read symbol).  Unitarity of the induced evolution is equivalent
to three local conditions on the table, checked by
:func:`validate_local_conditions`.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import (
    DuplicateRuleError,
    MissingRowError,
    NonFiniteAmplitudeError,
    RowNormExceededError,
    RuleFromTargetError,
    SourceAsDestinationError,
    UnknownStateError,
    UnknownSymbolError,
)

BLANK = "_"
ONE = "1"
LEFT = "L"
RIGHT = "R"
DIRECTIONS = (LEFT, RIGHT)

#: default tolerance for the local unitarity residuals
UNITARITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Rule:
    """One transition table entry: (state, read) -> (to, write, direction) @ amplitude."""

    state: str
    read: str
    to: str
    write: str
    direction: str
    amplitude: complex
    line: int | None = None

    def key(self):
        return (self.state, self.read, self.to, self.write, self.direction)


@dataclass
class MachineDescription:
    """Raw machine data as read from a file or written out literally in code."""

    name: str
    alphabet: Sequence[str]
    states: Sequence[str]
    sources: Sequence[str]
    targets: Sequence[str]
    initial: str
    final: str
    rules: Sequence[Rule]
    bv: bool = False


class Machine:
    """Immutable machine table.  Construct through :func:`build_machine`."""

    def __init__(self, name, alphabet, states, sources, targets, initial, final, delta0):
        self.name = name
        self.alphabet = tuple(alphabet)
        self.states = tuple(states)
        self.sources = frozenset(sources)
        self.targets = frozenset(targets)
        self.initial = initial
        self.final = final
        # delta0: dict[(state, read)] -> dict[(to, write, direction)] -> amplitude
        self.delta0 = delta0
        self._report: ValidationReport | None = None

    def row(self, state: str, symbol: str) -> Mapping:
        try:
            return self.delta0[(state, symbol)]
        except KeyError:
            raise MissingRowError(f"no transition row for ({state}, {symbol})") from None

    def validation_report(self) -> "ValidationReport":
        """Local-conditions report at the default tolerance, computed once."""
        if self._report is None:
            self._report = validate_local_conditions(self)
        return self._report

    @property
    def is_valid(self) -> bool:
        return self.validation_report().valid

    def __eq__(self, other):
        if not isinstance(other, Machine):
            return NotImplemented
        return (
            self.name == other.name
            and self.alphabet == other.alphabet
            and self.states == other.states
            and self.sources == other.sources
            and self.targets == other.targets
            and self.initial == other.initial
            and self.final == other.final
            and self.delta0 == other.delta0
        )

    def __repr__(self):
        return (f"Machine({self.name!r}, states={len(self.states)}, "
                f"rows={len(self.delta0)})")


def build_machine(desc: MachineDescription) -> Machine:
    """Check a description structurally and freeze it into a Machine.

    Structural demands: the alphabet holds ``1`` and the blank; sources and
    targets are disjoint named states; the initial state is a source and the
    final state a target; no rule leaves a target or enters a source; the
    table has at least one entry for every (non-target state, symbol) pair;
    amplitudes are finite and no row carries more than unit mass.
    """
    alphabet = tuple(desc.alphabet)
    states = tuple(desc.states)
    _check_declarations(desc, alphabet, states)
    sources = frozenset(desc.sources)
    targets = frozenset(desc.targets)

    delta0: dict = {}
    seen_lines: dict = {}
    for rule in desc.rules:
        _check_rule(rule, alphabet, states, sources, targets)
        key = rule.key()
        if key in seen_lines:
            first = seen_lines[key]
            raise DuplicateRuleError(
                f"rule {key} declared twice (lines {first} and {rule.line})"
                if rule.line is not None and first is not None
                else f"rule {key} declared twice")
        seen_lines[key] = rule.line
        row = delta0.setdefault((rule.state, rule.read), {})
        if rule.amplitude != 0:
            row[(rule.to, rule.write, rule.direction)] = complex(rule.amplitude)

    for state in states:
        if state in targets:
            continue
        for symbol in alphabet:
            if (state, symbol) not in delta0:
                raise MissingRowError(f"no transition row for ({state}, {symbol})")

    for (state, symbol), row in delta0.items():
        mass = sum(abs(a) ** 2 for a in row.values())
        if mass > 1.0 + UNITARITY_TOLERANCE:
            raise RowNormExceededError(
                f"row ({state}, {symbol}) has squared norm {mass:.6g} > 1")

    return Machine(desc.name, alphabet, states, sources, targets,
                   desc.initial, desc.final, delta0)


def _check_declarations(desc, alphabet, states):
    if len(set(alphabet)) != len(alphabet):
        raise UnknownSymbolError("alphabet contains duplicate symbols")
    if ONE not in alphabet or BLANK not in alphabet:
        raise UnknownSymbolError(f"alphabet must contain {ONE!r} and the blank {BLANK!r}")
    if len(set(states)) != len(states):
        raise UnknownStateError("state list contains duplicates")
    state_set = set(states)
    for q in list(desc.sources) + list(desc.targets):
        if q not in state_set:
            raise UnknownStateError(f"declared source/target {q!r} is not a state")
    if set(desc.sources) & set(desc.targets):
        clash = sorted(set(desc.sources) & set(desc.targets))
        raise UnknownStateError(f"states {clash} declared both source and target")
    if desc.initial not in set(desc.sources):
        raise UnknownStateError(f"initial state {desc.initial!r} must be a source")
    if desc.final not in set(desc.targets):
        raise UnknownStateError(f"final state {desc.final!r} must be a target")


def _check_rule(rule: Rule, alphabet, states, sources, targets):
    at = f" (line {rule.line})" if rule.line is not None else ""
    if rule.state not in states:
        raise UnknownStateError(f"unknown state {rule.state!r}{at}")
    if rule.to not in states:
        raise UnknownStateError(f"unknown state {rule.to!r}{at}")
    if rule.read not in alphabet:
        raise UnknownSymbolError(f"unknown symbol {rule.read!r}{at}")
    if rule.write not in alphabet:
        raise UnknownSymbolError(f"unknown symbol {rule.write!r}{at}")
    if rule.direction not in DIRECTIONS:
        raise UnknownSymbolError(f"direction must be L or R, got {rule.direction!r}{at}")
    if rule.state in targets:
        raise RuleFromTargetError(f"rule leaves target state {rule.state!r}{at}")
    if rule.to in sources:
        raise SourceAsDestinationError(f"rule enters source state {rule.to!r}{at}")
    if not (cmath.isfinite(complex(rule.amplitude))):
        raise NonFiniteAmplitudeError(f"amplitude {rule.amplitude!r} is not finite{at}")


# -- local unitarity conditions --------------------------------------------

@dataclass(frozen=True)
class Violation:
    """One failed check: which condition, on which keys, and by how much."""

    condition: int
    keys: tuple
    residual: float

    def __str__(self):
        return f"condition {self.condition} at {self.keys}: residual {self.residual:.3e}"


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    violations: tuple[Violation, ...]
    max_residual: float
    tolerance: float

    def __str__(self):
        if self.valid:
            return f"3 conditions satisfied (max residual {self.max_residual:.3e})"
        lines = [f"{len(self.violations)} violation(s), max residual {self.max_residual:.3e}"]
        lines += [f"  {v}" for v in self.violations]
        return "\n".join(lines)


def validate_local_conditions(machine: Machine,
                              tolerance: float = UNITARITY_TOLERANCE) -> ValidationReport:
    """Check the three local conditions equivalent to unitary evolution.

    1. every row has squared norm one;
    2. distinct rows are orthogonal;
    3. for every pair of rows and written symbols, the left-moving part of
       one is orthogonal to the right-moving part of the other, summed over
       the destination state.

    Invalid tables produce a report listing every violation, never an
    exception, so negative tests and corrupted corpora can be inspected.
    """
    sym_index = {a: i for i, a in enumerate(machine.alphabet)}
    state_index = {q: i for i, q in enumerate(machine.states)}
    keys = sorted(machine.delta0, key=lambda k: (state_index[k[0]], sym_index[k[1]]))
    rows = [machine.delta0[k] for k in keys]

    violations = []
    max_residual = 0.0

    def note(condition, keynames, residual):
        nonlocal max_residual
        max_residual = max(max_residual, residual)
        if residual > tolerance:
            violations.append(Violation(condition, keynames, residual))

    for key, row in zip(keys, rows):
        mass = sum(abs(a) ** 2 for a in row.values())
        note(1, (key,), abs(mass - 1.0))

    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            shorter, longer = rows[i], rows[j]
            if len(longer) < len(shorter):
                shorter, longer = longer, shorter
            dot = sum(entry.conjugate() * longer[t]
                      for t, entry in shorter.items() if t in longer)
            note(2, (keys[i], keys[j]), abs(dot))

    # index each row by direction: state -> list of (written symbol, amplitude)
    split = []
    for row in rows:
        right_part: dict = {}
        left_part: dict = {}
        for (p, b, d), a in row.items():
            (right_part if d == RIGHT else left_part).setdefault(p, []).append((b, a))
        split.append((right_part, left_part))

    for i in range(len(keys)):          # row moving right
        right_part = split[i][0]
        if not right_part:
            continue
        for j in range(len(keys)):      # row moving left
            left_part = split[j][1]
            if not left_part:
                continue
            sums: dict = {}
            for p, r_entries in right_part.items():
                l_entries = left_part.get(p)
                if not l_entries:
                    continue
                for b, ra in r_entries:
                    for b2, la in l_entries:
                        pair = (b, b2)
                        sums[pair] = sums.get(pair, 0j) + la.conjugate() * ra
            for (b, b2), value in sorted(sums.items()):
                note(3, (keys[i] + (b,), keys[j] + (b2,)), abs(value))

    violations.sort(key=lambda v: (v.condition, repr(v.keys)))
    return ValidationReport(not violations, tuple(violations), max_residual, tolerance)
