"""Reference machines, back-loop machine conversion, and the two
counter-free encodings.

The reference machines are small counter machines used throughout the
tests: a predecessor machine and a machine whose output distribution
converges to a successor value only in the limit, plus deliberately
broken variants of each that the validator must reject.

A back-loop machine is an ordinary reversible machine whose final state
loops straight back to its initial state.  Such a machine converts into
a counter machine by promoting the initial state to a source, the final
state to a target, and dropping the final state's rows.

The encodings replace the counter by tape structure: either by marking
symbols near the head with a trailing ``^``, or by viewing the counter
as a dedicated second tape of stars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .configuration import (
    Configuration,
    Superposition,
    _strip_left,
    _strip_right,
    canonicalize,
)
from .errors import (
    AlphabetCollisionError,
    BadBackLoopError,
    DuplicateRuleError,
    MalformedCounterTapeError,
    MalformedMarkedConfigurationError,
    MissingRowError,
    NonFiniteAmplitudeError,
    NonZeroCounterError,
    RowNormExceededError,
    UnknownStateError,
    UnknownSymbolError,
)
from .machine import (
    BLANK,
    LEFT,
    ONE,
    RIGHT,
    Machine,
    MachineDescription,
    Rule,
    build_machine,
)

_R2 = 1.0 / math.sqrt(2.0)


def _rules(table):
    return tuple(Rule(q, a, p, b, d, amp) for (q, a, p, b, d, amp) in table)


def example_p() -> Machine:
    """Predecessor machine: computes n - 1, divergent on input 0."""
    return build_machine(MachineDescription(
        name="example-p",
        alphabet=("1", "_"),
        states=("q0", "q1", "q2", "qf", "p"),
        sources=("q0",),
        targets=("qf", "p"),
        initial="q0",
        final="qf",
        rules=_rules([
            ("q0", "1", "q1", "_", RIGHT, 1),
            ("q0", "_", "p", "_", RIGHT, 1),
            ("q1", "1", "qf", "_", RIGHT, 1),
            ("q1", "_", "q2", "_", RIGHT, 1),
            ("q2", "_", "q1", "1", RIGHT, 1),
            ("q2", "1", "p", "1", RIGHT, 1),
        ]),
    ))


def _example_s_table():
    return [
        ("q0", "$", "q1", "$", RIGHT, 1),
        ("q0", "1", "p", "1", RIGHT, 1),
        ("q0", "_", "p", "_", RIGHT, 1),
        ("q1", "$", "p", "$", RIGHT, 1),
        ("q1", "1", "q1", "1", RIGHT, _R2),
        ("q1", "1", "qf", "1", RIGHT, _R2),
        ("q1", "_", "q1", "_", RIGHT, _R2),
        ("q1", "_", "qf", "_", RIGHT, _R2),
        ("s", "$", "qf", "$", RIGHT, 1),
        ("s", "1", "q1", "1", RIGHT, _R2),
        ("s", "1", "qf", "1", RIGHT, -_R2),
        ("s", "_", "q1", "_", RIGHT, _R2),
        ("s", "_", "qf", "_", RIGHT, -_R2),
    ]


def _build_s(table, name="example-s") -> Machine:
    return build_machine(MachineDescription(
        name=name,
        alphabet=("$", "1", "_"),
        states=("q0", "s", "q1", "qf", "p"),
        sources=("q0", "s"),
        targets=("qf", "p"),
        initial="q0",
        final="qf",
        rules=_rules(table),
    ))


def example_s() -> Machine:
    """Successor-in-the-limit machine: on dollar-prefixed input n the
    output distribution tends to n + 1 but never reaches it."""
    return _build_s(_example_s_table())


def example_s_scaled_row() -> Machine:
    """Broken variant: one row scaled below unit mass."""
    table = [(q, a, p, b, d, 0.9 * amp) if (q, a) == ("q1", "1") else (q, a, p, b, d, amp)
             for (q, a, p, b, d, amp) in _example_s_table()]
    return _build_s(table, name="example-s-scaled-row")


def example_s_duplicate_row() -> Machine:
    """Broken variant: two rows made identical, so they cannot be orthogonal."""
    table = [t for t in _example_s_table() if (t[0], t[1]) != ("q1", "_")]
    table += [
        ("q1", "_", "q1", "1", RIGHT, _R2),
        ("q1", "_", "qf", "1", RIGHT, _R2),
    ]
    return _build_s(table, name="example-s-duplicate-row")


def example_p_lr_collision() -> Machine:
    """Broken variant: one rule turned leftward so two moves collide."""
    return build_machine(MachineDescription(
        name="example-p-lr-collision",
        alphabet=("1", "_"),
        states=("q0", "q1", "q2", "qf", "p"),
        sources=("q0",),
        targets=("qf", "p"),
        initial="q0",
        final="qf",
        rules=_rules([
            ("q0", "1", "q1", "_", RIGHT, 1),
            ("q0", "_", "p", "_", RIGHT, 1),
            ("q1", "1", "qf", "_", RIGHT, 1),
            ("q1", "_", "q2", "_", RIGHT, 1),
            ("q2", "_", "q1", "1", RIGHT, 1),
            ("q2", "1", "p", "1", LEFT, 1),
        ]),
    ))


def reference_machines() -> dict[str, Machine]:
    return {
        "example_p": example_p(),
        "example_s": example_s(),
        "invalid_scaled_row": example_s_scaled_row(),
        "invalid_duplicate_row": example_s_duplicate_row(),
        "invalid_direction_clash": example_p_lr_collision(),
    }


# -- back-loop machines -------------------------------------------------------

class BvMachine:
    """An ordinary reversible machine with a total transition table whose
    final state steps straight back to the initial state."""

    def __init__(self, name, alphabet, states, initial, final, delta):
        self.name = name
        self.alphabet = tuple(alphabet)
        self.states = tuple(states)
        self.initial = initial
        self.final = final
        # delta: dict[(state, read)] -> dict[(to, write, direction)] -> amplitude
        self.delta = delta

    def row(self, state: str, symbol: str):
        try:
            return self.delta[(state, symbol)]
        except KeyError:
            raise MissingRowError(f"no transition row for ({state}, {symbol})") from None

    def __repr__(self):
        return f"BvMachine({self.name!r}, states={len(self.states)}, rows={len(self.delta)})"


def build_bv_machine(desc: MachineDescription) -> BvMachine:
    if desc.sources or desc.targets:
        raise BadBackLoopError("a back-loop machine declares no sources or targets")
    alphabet = tuple(desc.alphabet)
    states = tuple(desc.states)
    if ONE not in alphabet or BLANK not in alphabet:
        raise UnknownSymbolError(f"alphabet must contain {ONE!r} and {BLANK!r}")
    if len(set(alphabet)) != len(alphabet) or len(set(states)) != len(states):
        raise DuplicateRuleError("alphabet and state list must not repeat entries")
    for name, value in (("initial", desc.initial), ("final", desc.final)):
        if value not in states:
            raise UnknownStateError(f"{name} state {value!r} is not declared")
    if desc.initial == desc.final:
        raise BadBackLoopError("initial and final state must differ")

    delta: dict = {}
    lines: dict = {}
    for rule in desc.rules:
        for state in (rule.state, rule.to):
            if state not in states:
                raise UnknownStateError(f"rule uses undeclared state {state!r}")
        for symbol in (rule.read, rule.write):
            if symbol not in alphabet:
                raise UnknownSymbolError(f"rule uses undeclared symbol {symbol!r}")
        amp = complex(rule.amplitude)
        if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
            raise NonFiniteAmplitudeError(f"rule {rule.key()} has amplitude {amp!r}")
        if rule.key() in lines:
            first = lines[rule.key()]
            where = f" (lines {first} and {rule.line})" if first and rule.line else ""
            raise DuplicateRuleError(f"rule {rule.key()} appears twice{where}")
        lines[rule.key()] = rule.line
        if amp != 0:
            delta.setdefault((rule.state, rule.read), {})[(rule.to, rule.write, rule.direction)] = amp
        else:
            delta.setdefault((rule.state, rule.read), {})

    for q in states:
        for a in alphabet:
            if (q, a) not in delta:
                raise MissingRowError(f"no transition row for ({q}, {a})")
            mass = sum(abs(w) ** 2 for w in delta[(q, a)].values())
            if mass > 1.0 + 1e-9:
                raise RowNormExceededError(f"row ({q}, {a}) has squared mass {mass:.12g}")

    # the final state must loop back to the initial state and nothing
    # else may enter the initial state
    for a in alphabet:
        row = delta[(desc.final, a)]
        expected = (desc.initial, a, RIGHT)
        if set(row) != {expected} or abs(row[expected] - 1.0) > 1e-12:
            raise BadBackLoopError(
                f"final row ({desc.final}, {a}) must map to ({desc.initial}, {a}, R) "
                f"with amplitude 1")
    for (q, a), row in delta.items():
        if q == desc.final:
            continue
        for (p, b, d) in row:
            if p == desc.initial:
                raise BadBackLoopError(
                    f"rule ({q}, {a}) -> ({p}, {b}, {d}) re-enters the initial state")

    return BvMachine(desc.name, alphabet, states, desc.initial, desc.final, delta)


def from_bv(bv: BvMachine) -> Machine:
    """Convert a back-loop machine into a counter machine.

    The initial state becomes the only source, the final state the only
    target, and the final state's rows are dropped; the counter then
    records how many times the back loop would have fired.
    """
    rules = []
    for (q, a), row in bv.delta.items():
        if q == bv.final:
            continue
        if row:
            for (p, b, d), amp in row.items():
                rules.append(Rule(q, a, p, b, d, amp))
        else:
            # zero row: keep the row declared without entries
            rules.append(Rule(q, a, q if q != bv.initial else bv.final, a, RIGHT, 0))
    return build_machine(MachineDescription(
        name=bv.name,
        alphabet=bv.alphabet,
        states=bv.states,
        sources=(bv.initial,),
        targets=(bv.final,),
        initial=bv.initial,
        final=bv.final,
        rules=tuple(rules),
    ))


def bv_predecessor() -> BvMachine:
    """Back-loop predecessor machine whose non-final rows match the
    predecessor reference machine."""
    return build_bv_machine(MachineDescription(
        name="bv-predecessor",
        alphabet=("1", "_"),
        states=("q0", "q1", "q2", "qf", "p"),
        sources=(),
        targets=(),
        initial="q0",
        final="qf",
        rules=_rules([
            ("q0", "1", "q1", "_", RIGHT, 1),
            ("q0", "_", "p", "_", RIGHT, 1),
            ("q1", "1", "qf", "_", RIGHT, 1),
            ("q1", "_", "q2", "_", RIGHT, 1),
            ("q2", "_", "q1", "1", RIGHT, 1),
            ("q2", "1", "p", "1", RIGHT, 1),
            ("qf", "1", "q0", "1", RIGHT, 1),
            ("qf", "_", "q0", "_", RIGHT, 1),
            # rows that keep the table total without touching the
            # predecessor behaviour reachable from numeral inputs
            ("p", "1", "q2", "1", RIGHT, 1),
            ("p", "_", "qf", "1", RIGHT, 1),
        ]),
        bv=True,
    ))


# -- marked-symbol encoding ---------------------------------------------------

HAT = "^"


def hat(symbol: str) -> str:
    return symbol + HAT


def is_hat(symbol: str) -> bool:
    return symbol.endswith(HAT)


def unhat(symbol: str) -> str:
    if not is_hat(symbol):
        raise MalformedMarkedConfigurationError(f"symbol {symbol!r} carries no mark")
    return symbol[:-1]


@dataclass(frozen=True)
class MarkedConfiguration:
    """A counter-free configuration over the marked alphabet."""

    left: tuple[str, ...]
    state: str
    right: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "left", _strip_left(self.left))
        object.__setattr__(self, "right", _strip_right(self.right))

    def head_symbol(self) -> str:
        return self.right[0] if self.right else BLANK

    def sort_key(self):
        return (self.state, self.left, self.right)

    def __str__(self):
        left = "".join(self.left) if self.left else "λ"
        right = "".join(self.right) if self.right else "λ"
        return f"⟨{left}, {self.state}, {right}⟩"


class MarkedMachine:
    """The marked-symbol encoding of a counter machine.

    The counter value n shows up as a block of n marked symbols: behind
    the head while the state is a target, ahead of the head while it is
    a source.  Stepping a target marks the head symbol and moves right;
    stepping a source on a marked symbol unmarks it and moves right;
    everything else follows the machine's own rules.
    """

    def __init__(self, base: Machine):
        for a in base.alphabet:
            if is_hat(a):
                raise AlphabetCollisionError(
                    f"alphabet symbol {a!r} already ends with the mark {HAT!r}")
            if hat(a) in base.alphabet:
                raise AlphabetCollisionError(
                    f"marked form of {a!r} collides with declared symbol {hat(a)!r}")
        self.base = base
        self.alphabet = base.alphabet + tuple(hat(a) for a in base.alphabet)

    # bijection with counter configurations

    def encode(self, config: Configuration) -> MarkedConfiguration:
        n = config.counter
        if n == 0:
            return MarkedConfiguration(config.left, config.state, config.right)
        if config.state in self.base.targets:
            ahead = config.right + (BLANK,) * max(0, n - len(config.right))
            marked = tuple(hat(a) for a in ahead[:n])
            return MarkedConfiguration(config.left + marked, config.state, config.right[n:])
        if config.state in self.base.sources:
            behind = (BLANK,) * max(0, n - len(config.left)) + config.left
            marked = tuple(hat(a) for a in behind[-n:])
            keep = len(config.left) - n
            return MarkedConfiguration(config.left[:keep] if keep > 0 else (),
                                       config.state, marked + config.right)
        raise NonZeroCounterError(
            f"state {config.state!r} cannot hold counter value {n}")

    def decode(self, config: MarkedConfiguration) -> Configuration:
        marks_left = sum(1 for a in config.left if is_hat(a))
        marks_right = sum(1 for a in config.right if is_hat(a))
        if config.state in self.base.targets:
            run = 0
            while run < len(config.left) and is_hat(config.left[-1 - run]):
                run += 1
            if marks_left != run or marks_right != 0:
                raise MalformedMarkedConfigurationError(
                    f"marks of {config} do not form one block behind the head")
            keep = len(config.left) - run
            plain = tuple(unhat(a) for a in config.left[keep:])
            return Configuration(config.left[:keep], config.state,
                                 plain + config.right, run)
        if config.state in self.base.sources:
            run = 0
            while run < len(config.right) and is_hat(config.right[run]):
                run += 1
            if marks_right != run or marks_left != 0:
                raise MalformedMarkedConfigurationError(
                    f"marks of {config} do not form one block at the head")
            plain = tuple(unhat(a) for a in config.right[:run])
            return Configuration(config.left + plain, config.state,
                                 config.right[run:], run)
        if marks_left or marks_right:
            raise MalformedMarkedConfigurationError(
                f"state {config.state!r} admits no marked symbols")
        return Configuration(config.left, config.state, config.right, 0)

    def encode_superposition(self, phi: Superposition) -> dict:
        return {self.encode(c): amp for c, amp in phi.terms.items()}

    def decode_superposition(self, terms: dict) -> Superposition:
        return Superposition({self.decode(c): amp for c, amp in terms.items()})

    # evolution over marked configurations

    def step_config(self, config: MarkedConfiguration) -> dict:
        state = config.state
        head = config.head_symbol()
        rest = config.right[1:]
        if state in self.base.targets:
            if is_hat(head):
                raise MalformedMarkedConfigurationError(
                    f"target state {state!r} reads marked symbol {head!r}")
            out = MarkedConfiguration(config.left + (hat(head),), state, rest)
            return {out: 1.0 + 0.0j}
        if state in self.base.sources and is_hat(head):
            out = MarkedConfiguration(config.left + (unhat(head),), state, rest)
            return {out: 1.0 + 0.0j}
        if is_hat(head):
            raise MalformedMarkedConfigurationError(
                f"state {state!r} reads marked symbol {head!r}")
        result: dict = {}
        for (p, b, d), amp in self.base.row(state, head).items():
            if d == RIGHT:
                image = MarkedConfiguration(config.left + (b,), p, rest)
            else:
                w = config.left[-1] if config.left else BLANK
                image = MarkedConfiguration(config.left[:-1], p, (w, b) + rest)
            result[image] = result.get(image, 0) + amp
        return result

    def step(self, terms: dict) -> dict:
        out: dict = {}
        for config, amp in terms.items():
            for image, weight in self.step_config(config).items():
                out[image] = out.get(image, 0) + amp * weight
        return {c: a for c, a in out.items() if abs(a) > 1e-15}

    def rule_table(self):
        """Defined transitions of the encoded machine, for export."""
        rows = []
        for q in self.base.states:
            if q in self.base.targets:
                for a in self.base.alphabet:
                    rows.append(Rule(q, a, q, hat(a), RIGHT, 1))
                continue
            for a in self.base.alphabet:
                for (p, b, d), amp in self.base.row(q, a).items():
                    rows.append(Rule(q, a, p, b, d, amp))
            if q in self.base.sources:
                for a in self.base.alphabet:
                    rows.append(Rule(q, hat(a), q, a, RIGHT, 1))
        return tuple(rows)


def encode_extra_symbols(machine: Machine) -> MarkedMachine:
    return MarkedMachine(machine)


# -- counter-tape view --------------------------------------------------------

STAR = "*"


@dataclass(frozen=True)
class CounterTapeConfiguration:
    """A configuration viewed with the counter as a second tape of stars.

    ``head`` indexes the star tape: a source rests on its rightmost star
    (or on the single empty cell when there is none), a target on the
    first blank cell right of the stars.
    """

    left: tuple[str, ...]
    state: str
    right: tuple[str, ...]
    tape: tuple[str, ...]
    head: int

    def __str__(self):
        left = "".join(self.left) if self.left else "λ"
        right = "".join(self.right) if self.right else "λ"
        cells = list(self.tape) + ["·"]
        cells[self.head] = f"[{cells[self.head]}]"
        return f"⟨{left}, {self.state}, {right} ∥ {''.join(cells)}⟩"


def counter_tape_view(machine: Machine, config: Configuration) -> CounterTapeConfiguration:
    n = config.counter
    stars = (STAR,) * n
    if config.state in machine.targets:
        head = n
    elif config.state in machine.sources:
        head = n - 1 if n > 0 else 0
    elif n == 0:
        head = 0
    else:
        raise NonZeroCounterError(
            f"state {config.state!r} cannot hold counter value {n}")
    return CounterTapeConfiguration(config.left, config.state, config.right, stars, head)


def from_counter_tape(machine: Machine, view: CounterTapeConfiguration) -> Configuration:
    if any(cell != STAR for cell in view.tape):
        raise MalformedCounterTapeError(f"counter tape {view.tape!r} holds a non-star cell")
    n = len(view.tape)
    state = view.state
    if state in machine.targets:
        expected = n
    elif state in machine.sources:
        expected = n - 1 if n > 0 else 0
    elif n == 0:
        expected = 0
    else:
        raise MalformedCounterTapeError(
            f"state {state!r} admits no stars, found {n}")
    if view.head != expected:
        raise MalformedCounterTapeError(
            f"head at {view.head} on {n} stars in state {state!r}, expected {expected}")
    return canonicalize(machine, view.left, state, view.right, n)
