import math

import numpy as np
import pytest

from qtm.compat import example_p, example_s, reference_machines
from qtm.configuration import Configuration, Superposition, from_number_weights, initial_config
from qtm.errors import NonZeroCounterError, UnvalidatedMachineError
from qtm.evolution import (
    case_of,
    computation,
    evolve,
    isometry_check,
    step,
    step_backward,
)
from qtm.machine import MachineDescription, Rule, build_machine

from corpus_util import corrupted_variant, random_basis_machine

P = example_p()
S = example_s()
R2 = 1 / math.sqrt(2)


def basis(left, state, right, counter=0):
    return Superposition.basis(Configuration(tuple(left), state, tuple(right), counter))


def reachable_basis_configs(machine, phi0, depth):
    seen = set(phi0.support())
    phi = phi0
    for _ in range(depth):
        phi = step(machine, phi)
        seen.update(phi.support())
    return sorted(seen, key=lambda c: c.sort_key())


# -- forward stepping, frozen by hand from the rule tables --------------------

def test_predecessor_of_two_step_by_step():
    phi = basis((), "q0", "111")
    phi = step(P, phi)
    assert phi == basis((), "q1", "11")
    phi = step(P, phi)
    assert phi == basis((), "qf", "1")
    phi = step(P, phi)
    assert phi == basis((), "qf", "1", 1)
    phi = step(P, phi)
    assert phi == basis((), "qf", "1", 2)


def test_predecessor_of_zero_loops_writing_ones():
    expect = [
        basis((), "q1", ""),
        basis((), "q2", ""),
        basis("1", "q1", ""),
        basis("1_", "q2", ""),
        basis("1_1", "q1", ""),
    ]
    phi = basis((), "q0", "1")
    for want in expect:
        phi = step(P, phi)
        assert phi == want


def test_split_step_amplitudes():
    phi = basis(("$",), "q1", "1")
    phi = step(S, phi)
    assert phi[Configuration(("$", "1"), "q1", ())] == pytest.approx(R2)
    assert phi[Configuration(("$", "1"), "qf", ())] == pytest.approx(R2)
    assert len(phi) == 2


def test_source_decrement_and_target_increment():
    src = basis((), "q0", "1", 2)
    assert step(P, src) == basis((), "q0", "1", 1)
    tgt = basis((), "p", "1", 5)
    assert step(P, tgt) == basis((), "p", "1", 6)


def left_mover():
    return build_machine(MachineDescription(
        name="leftward",
        alphabet=("1", "_"),
        states=("a", "m", "t"),
        sources=("a",),
        targets=("t",),
        initial="a",
        final="t",
        rules=(
            Rule("a", "1", "m", "1", "L", 1),
            Rule("a", "_", "m", "_", "L", 1),
            Rule("m", "1", "t", "1", "L", 1),
            Rule("m", "_", "t", "_", "L", 1),
        ),
    ))


def test_left_move_pulls_symbol_from_left_tape():
    m = left_mover()
    assert m.is_valid
    phi = basis(("1",), "a", "11")
    assert step(m, phi) == basis((), "m", "111")
    # moving left off the explicit tape reads a blank
    phi = basis((), "a", "1")
    assert step(m, phi) == basis((), "m", ("_", "1"))


def test_evolve_matches_iterated_step_and_computation():
    phi = from_number_weights(P, {0: R2, 2: R2})
    by_hand = phi
    for _ in range(6):
        by_hand = step(P, by_hand)
    assert evolve(P, phi, 6) == by_hand
    gen = computation(P, phi)
    seq = [next(gen) for _ in range(7)]
    assert seq[0] == phi and seq[6] == by_hand


def test_norm_preserved_for_fifty_steps():
    phi = Superposition.basis(Configuration((), "q0", ("$", "1", "1", "1"), 0))
    for _ in range(50):
        phi = step(S, phi)
        assert abs(phi.norm() - 1.0) < 1e-12


def test_final_configuration_only_ticks_its_counter():
    c = Configuration(("1",), "qf", ("1",), 0)
    phi = Superposition.basis(c)
    for k in range(1, 5):
        phi = step(P, phi)
        assert phi == Superposition.basis(c.with_counter(k))


# -- the adjoint ---------------------------------------------------------------

def test_backward_undoes_forward_on_reference_machines():
    for m, phi0 in ((P, from_number_weights(P, {0: R2, 2: R2})),
                    (S, Superposition.basis(Configuration((), "q0", ("$", "1"), 0)))):
        for c in reachable_basis_configs(m, phi0, 12):
            phi = Superposition.basis(c)
            assert (step_backward(m, step(m, phi)) - phi).norm() < 1e-12
            assert (step(m, step_backward(m, phi)) - phi).norm() < 1e-12


def test_backward_undoes_forward_on_random_machines():
    rng = np.random.default_rng(5150)
    for _ in range(10):
        m = random_basis_machine(rng)
        phi0 = Superposition.basis(initial_config(m, int(rng.integers(0, 4))))
        for c in reachable_basis_configs(m, phi0, 8):
            phi = Superposition.basis(c)
            assert (step_backward(m, step(m, phi)) - phi).norm() < 1e-12


def test_adjoint_identity_on_inner_products():
    rng = np.random.default_rng(31337)
    configs = reachable_basis_configs(
        S, Superposition.basis(Configuration((), "q0", ("$", "1", "1"), 0)), 10)
    for _ in range(20):
        weights = rng.normal(size=len(configs)) + 1j * rng.normal(size=len(configs))
        phi = Superposition(dict(zip(configs, weights))).normalized()
        weights = rng.normal(size=len(configs)) + 1j * rng.normal(size=len(configs))
        psi = Superposition(dict(zip(configs, weights))).normalized()
        lhs = psi.inner(step(S, phi))
        rhs = step_backward(S, psi).inner(phi)
        assert abs(lhs - rhs) < 1e-12


def test_backward_on_left_mover():
    m = left_mover()
    for c in (Configuration(("1", "1"), "m", ("1",)),
              Configuration((), "m", ("_", "1")),
              Configuration((), "t", ("1",), 2)):
        phi = Superposition.basis(c)
        assert (step(m, step_backward(m, phi)) - phi).norm() < 1e-12
        assert (step_backward(m, step(m, phi)) - phi).norm() < 1e-12


# -- guards and case analysis ---------------------------------------------------

def test_case_partition():
    assert case_of(P, Configuration((), "q0", ())) == 1       # source, counter 0
    assert case_of(P, Configuration((), "q0", (), 3)) == 2    # source, counter > 0
    assert case_of(P, Configuration((), "qf", ())) == 3       # target, any counter
    assert case_of(P, Configuration((), "qf", (), 7)) == 3
    assert case_of(P, Configuration((), "q1", ())) == 1
    with pytest.raises(NonZeroCounterError):
        case_of(P, Configuration((), "q1", (), 1))


def test_step_refuses_invalid_machine_unless_unchecked():
    bad = reference_machines()["invalid_scaled_row"]
    phi = Superposition.basis(initial_config(bad, 1))
    with pytest.raises(UnvalidatedMachineError):
        step(bad, phi)
    stepped = step(bad, phi, unchecked=True)
    assert stepped  # lossy but computable


# -- isometry spot check ---------------------------------------------------------

def test_isometry_check_accepts_references():
    for m in (P, S, left_mover()):
        report = isometry_check(m, depth=4)
        assert report.max_deviation < 1e-12
        assert report.configs_checked > 100


def test_isometry_check_flags_direction_clash():
    bad = reference_machines()["invalid_direction_clash"]
    report = isometry_check(bad, depth=4)
    assert report.max_deviation >= 1e-3


def test_isometry_check_flags_random_corruptions():
    rng = np.random.default_rng(777)
    for kind in ("scale", "duplicate", "lr"):
        m = corrupted_variant(random_basis_machine(rng), kind, rng)
        report = isometry_check(m, depth=4)
        assert report.max_deviation >= 1e-3, (kind, report)
