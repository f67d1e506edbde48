"""The evolution operator, its adjoint, and an empirical isometry oracle.

One step acts on a basis configuration by exactly one of three cases:

1. counter zero, non-target state: apply the transition row for the state
   and the symbol under the head (write, move, blanks materialize on
   demand and canonicalization trims them back);
2. source state with a positive counter: decrement the counter;
3. target state: increment the counter.

The adjoint reverses those cases, reconstructing rule predecessors from
the conjugated table rather than via any matrix inverse.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from .configuration import Configuration, Superposition
from .errors import MissingRowError, NonZeroCounterError, UnvalidatedMachineError
from .machine import BLANK, LEFT, RIGHT, Machine


def case_of(machine: Machine, config: Configuration) -> int:
    """Which of the three step cases applies to a basis configuration."""
    if config.state in machine.targets:
        return 3
    if config.counter > 0:
        if config.state in machine.sources:
            return 2
        raise NonZeroCounterError(
            f"{config} carries a counter on a plain state")
    return 1


def _require_valid(machine: Machine, unchecked: bool):
    if unchecked:
        return
    report = machine.validation_report()
    if not report.valid:
        raise UnvalidatedMachineError(
            f"machine {machine.name!r} fails the local conditions "
            f"(max residual {report.max_residual:.3e}); pass unchecked=True to step anyway")


def step(machine: Machine, phi: Superposition, *, unchecked: bool = False) -> Superposition:
    """Apply the evolution operator once to a finite superposition."""
    _require_valid(machine, unchecked)
    out: dict[Configuration, complex] = {}
    for config, amp in phi.terms.items():
        case = case_of(machine, config)
        if case == 3:
            key = config.with_counter(config.counter + 1)
            out[key] = out.get(key, 0j) + amp
            continue
        if case == 2:
            key = config.with_counter(config.counter - 1)
            out[key] = out.get(key, 0j) + amp
            continue
        u = config.head_symbol()
        rest = config.right[1:] if config.right else ()
        left = config.left
        row = machine.delta0.get((config.state, u))
        if row is None:
            raise MissingRowError(f"no transition row for ({config.state}, {u})")
        for (p, v, d), weight in row.items():
            if d == RIGHT:
                key = Configuration(left + (v,), p, rest, 0)
            else:
                w = left[-1] if left else BLANK
                key = Configuration(left[:-1] if left else (), p, (w, v) + rest, 0)
            out[key] = out.get(key, 0j) + amp * weight
    return Superposition(out)


def step_backward(machine: Machine, phi: Superposition, *,
                  unchecked: bool = False) -> Superposition:
    """Apply the adjoint of the evolution operator once.

    Source configurations gain one on the counter, target configurations
    with a positive counter lose one, and every other basis configuration
    collects conjugated contributions from the rules that could have
    produced it.
    """
    _require_valid(machine, unchecked)
    reverse: dict[str, list] = {}
    for (q, u), row in machine.delta0.items():
        for (p, v, d), weight in row.items():
            reverse.setdefault(p, []).append((q, u, v, d, weight))

    out: dict[Configuration, complex] = {}
    for config, amp in phi.terms.items():
        q = config.state
        if q in machine.sources:
            key = config.with_counter(config.counter + 1)
            out[key] = out.get(key, 0j) + amp
            continue
        if q in machine.targets and config.counter > 0:
            key = config.with_counter(config.counter - 1)
            out[key] = out.get(key, 0j) + amp
            continue
        left, right = config.left, config.right
        for (q0, u, v, d, weight) in reverse.get(q, ()):
            if d == RIGHT:
                # forward wrote v and moved right: v must be the last cell on the left
                last = left[-1] if left else BLANK
                if last != v:
                    continue
                key = Configuration(left[:-1] if left else (), q0, (u,) + right, 0)
            else:
                # forward wrote v and moved left: the head cell holds the popped
                # symbol and v sits directly to its right
                w = right[0] if right else BLANK
                written = right[1] if len(right) > 1 else BLANK
                if written != v:
                    continue
                key = Configuration(left + (w,), q0, (u,) + right[2:], 0)
            out[key] = out.get(key, 0j) + weight.conjugate() * amp
    return Superposition(out)


def evolve(machine: Machine, phi: Superposition, steps: int, *,
           unchecked: bool = False) -> Superposition:
    """Apply ``steps`` forward steps."""
    for _ in range(steps):
        phi = step(machine, phi, unchecked=unchecked)
    return phi


def computation(machine: Machine, phi: Superposition, *,
                unchecked: bool = False) -> Iterator[Superposition]:
    """The lazy sequence phi, U phi, U² phi, ..."""
    while True:
        yield phi
        phi = step(machine, phi, unchecked=unchecked)


# -- empirical isometry oracle ----------------------------------------------

@dataclass(frozen=True)
class IsometryReport:
    """Maximum deviation of the image Gram matrix from the identity."""

    max_deviation: float
    configs_checked: int
    depth: int


def _tapes(alphabet, max_len):
    tapes = [()]
    frontier = [()]
    for _ in range(max_len):
        frontier = [t + (a,) for t in frontier for a in alphabet]
        tapes.extend(frontier)
    return tapes


def default_seeds(machine: Machine, left_len: int = 2, right_len: int = 3) -> list[Configuration]:
    """Basis configurations covering every row with enough tape context to
    expose write/move collisions, plus counter carriers for the source and
    target cases."""
    seeds = []
    lefts = _tapes(machine.alphabet, left_len)
    rights = _tapes(machine.alphabet, right_len)
    for q in machine.states:
        for left in lefts:
            for right in rights:
                seeds.append(Configuration(left, q, right, 0))
        if q in machine.sources or q in machine.targets:
            for counter in (1, 2):
                seeds.append(Configuration((), q, (), counter))
                for a in machine.alphabet:
                    seeds.append(Configuration((), q, (a,), counter))
    # canonicalization may alias padded tapes; dedupe preserving order
    seen = set()
    unique = []
    for c in seeds:
        if c not in seen:
            seen.add(c)
            unique.append(c)
    return unique


def isometry_check(machine: Machine, depth: int = 5,
                   seeds: Iterable[Configuration] | None = None,
                   max_configs: int = 30000) -> IsometryReport:
    """Brute-force check that one step preserves inner products.

    Collects the basis configurations reachable from the seed set within
    ``depth`` steps, images each under one step, and reports the largest
    deviation of the resulting Gram matrix from the identity.  Runs the
    table as-is, so it serves as an independent oracle for the validator
    on both valid and corrupted machines.
    """
    collected: list[Configuration] = []
    seen: set[Configuration] = set()

    def add(config):
        if config not in seen and len(collected) < max_configs:
            seen.add(config)
            collected.append(config)

    frontier = list(seeds) if seeds is not None else default_seeds(machine)
    for config in frontier:
        add(config)
    for _ in range(depth):
        next_frontier = []
        for config in frontier:
            image = step(machine, Superposition.basis(config), unchecked=True)
            for new in image:
                if new not in seen:
                    next_frontier.append(new)
                add(new)
        frontier = next_frontier
        if not frontier or len(collected) >= max_configs:
            break

    images = [step(machine, Superposition.basis(c), unchecked=True) for c in collected]
    deviation = 0.0
    buckets: dict[Configuration, list] = {}
    for i, image in enumerate(images):
        deviation = max(deviation, abs(sum(abs(a) ** 2 for a in image.terms.values()) - 1.0))
        for config, amp in image.terms.items():
            buckets.setdefault(config, []).append((i, amp))
    overlaps: dict[tuple[int, int], complex] = {}
    for entries in buckets.values():
        if len(entries) < 2:
            continue
        for x in range(len(entries)):
            i, ai = entries[x]
            for y in range(x + 1, len(entries)):
                j, aj = entries[y]
                pair = (i, j) if i < j else (j, i)
                first, second = (ai, aj) if i < j else (aj, ai)
                overlaps[pair] = overlaps.get(pair, 0j) + first.conjugate() * second
    for value in overlaps.values():
        deviation = max(deviation, abs(value))
    return IsometryReport(deviation, len(collected), depth)
