"""Shared helpers for the test suite: random machine generation,
controlled corruptions, and an independent stepper for back-loop
machines written against plain tape triples."""

from __future__ import annotations

import cmath

from qtm.compat import BvMachine
from qtm.machine import BLANK, LEFT, ONE, RIGHT, MachineDescription, Rule, build_machine


def random_basis_machine(rng, name="random"):
    """A random machine whose rows are distinct right-moving basis vectors
    scaled by unit phases.  Such tables always satisfy the three local
    conditions."""
    alphabet = (ONE, BLANK) + (("a",) if rng.random() < 0.5 else ())
    n_src = int(rng.integers(1, 3))
    n_plain = int(rng.integers(1, 4))
    n_tgt = n_src + int(rng.integers(0, 3))
    sources = tuple(f"s{i}" for i in range(n_src))
    plains = tuple(f"m{i}" for i in range(n_plain))
    targets = tuple(f"t{i}" for i in range(n_tgt))
    states = sources + plains + targets

    row_keys = [(q, a) for q in sources + plains for a in alphabet]
    slots = [(p, b) for p in plains + targets for b in alphabet]
    order = rng.permutation(len(slots))
    rules = []
    for key, pick in zip(row_keys, order):
        p, b = slots[int(pick)]
        phase = cmath.exp(2j * cmath.pi * rng.random())
        rules.append(Rule(key[0], key[1], p, b, RIGHT, phase))
    return build_machine(MachineDescription(
        name=name,
        alphabet=alphabet,
        states=states,
        sources=sources,
        targets=targets,
        initial=sources[0],
        final=targets[0],
        rules=tuple(rules),
    ))


def corrupted_variant(machine, kind, rng):
    """Break one of the three local conditions of a basis machine.

    ``scale`` shrinks one row, ``duplicate`` copies one row onto another,
    and ``lr`` turns one rule leftward while steering a second rule into
    the same destination state so the direction clash is real.
    """
    rules = []
    for (q, a), row in machine.delta0.items():
        for (p, b, d), amp in row.items():
            rules.append([q, a, p, b, d, amp])
    assert len(rules) >= 2

    if kind == "scale":
        idx = int(rng.integers(len(rules)))
        victim = (rules[idx][0], rules[idx][1])
        for r in rules:
            if (r[0], r[1]) == victim:
                r[5] *= 0.9
    elif kind == "duplicate":
        keys = list(machine.delta0)
        i, j = rng.choice(len(keys), size=2, replace=False)
        src, dst = keys[int(i)], keys[int(j)]
        rules = [r for r in rules if (r[0], r[1]) != dst]
        for (p, b, d), amp in machine.delta0[src].items():
            rules.append([dst[0], dst[1], p, b, d, amp])
    elif kind == "lr":
        i, j = rng.choice(len(rules), size=2, replace=False)
        flipped, steered = rules[int(i)], rules[int(j)]
        flipped[4] = LEFT
        steered[2] = flipped[2]
        steered[3] = machine.alphabet[0] if flipped[3] != machine.alphabet[0] \
            else machine.alphabet[1]
        steered[4] = RIGHT
    else:
        raise ValueError(kind)

    return build_machine(MachineDescription(
        name=f"{machine.name}-{kind}",
        alphabet=machine.alphabet,
        states=machine.states,
        sources=tuple(q for q in machine.states if q in machine.sources),
        targets=tuple(q for q in machine.states if q in machine.targets),
        initial=machine.initial,
        final=machine.final,
        rules=tuple(Rule(*r) for r in rules),
    ))


# -- independent stepper for back-loop machines ------------------------------
#
# Works on bare (left, state, right) triples with its own canonical form,
# sharing no code with the package's evolution module.

def canon_plain(left, state, right):
    left = tuple(left)
    right = tuple(right)
    while left and left[0] == BLANK:
        left = left[1:]
    while right and right[-1] == BLANK:
        right = right[:-1]
    return (left, state, right)


def bv_step(bv: BvMachine, terms: dict) -> dict:
    out: dict = {}
    for (left, state, right), amp in terms.items():
        head = right[0] if right else BLANK
        rest = right[1:]
        for (p, b, d), weight in bv.delta[(state, head)].items():
            if d == RIGHT:
                image = canon_plain(left + (b,), p, rest)
            else:
                w = left[-1] if left else BLANK
                image = canon_plain(left[:-1], p, (w, b) + rest)
            out[image] = out.get(image, 0j) + amp * weight
    return {c: a for c, a in out.items() if abs(a) > 1e-15}


def bv_initial(bv: BvMachine, n: int):
    """The numeral input triple: head on the first of n+1 ones."""
    return {((), bv.initial, (ONE,) * (n + 1)): 1.0 + 0j}


def bv_halted(terms: dict, final: str) -> bool:
    return bool(terms) and all(state == final for (_, state, _) in terms)
