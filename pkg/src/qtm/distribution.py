"""Partial probability distributions and the computed-output report.

A partial probability distribution (PPD) assigns mass to naturals with
total at most one; the missing mass is the weight of the undefined
outcome ⊥.  Reading a superposition off gives mass |amplitude|² to the
readout of every final-state term.  Along a computation the PPD sequence
is pointwise non-decreasing, so the computed output is its limit; the
report tracks how far a finite run got toward it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .configuration import Superposition, check_initial, tape_value
from .errors import NonMonotoneSequenceError, NotNormalizedError
from .evolution import step
from .machine import Machine

LEQ_TOLERANCE = 1e-9


class Ppd:
    """Mass on naturals; whatever is missing from 1 weighs the ⊥ outcome."""

    __slots__ = ("_mass",)

    def __init__(self, mass: Mapping[int, float] = ()):
        items = mass.items() if isinstance(mass, Mapping) else mass
        store = {}
        for n, p in items:
            if n < 0:
                raise ValueError(f"outcome {n} is not a natural")
            if p < -1e-12 or p > 1.0 + 1e-9:
                raise ValueError(f"mass {p!r} for outcome {n} is out of range")
            if p > 0.0:
                store[int(n)] = float(p)
        total = sum(store.values())
        if total > 1.0 + 1e-9:
            raise ValueError(f"total mass {total:.12g} exceeds 1")
        self._mass = store

    def __call__(self, n: int) -> float:
        return self._mass.get(n, 0.0)

    @property
    def total(self) -> float:
        return sum(self._mass.values())

    @property
    def bottom(self) -> float:
        rest = 1.0 - self.total
        return 0.0 if -1e-9 <= rest < 0.0 else rest

    def support(self) -> list[int]:
        return sorted(self._mass)

    def items(self) -> list[tuple[int, float]]:
        return sorted(self._mass.items())

    def is_total(self, tol: float = LEQ_TOLERANCE) -> bool:
        return self.bottom <= tol

    def __eq__(self, other):
        if not isinstance(other, Ppd):
            return NotImplemented
        return self._mass == other._mass

    def __repr__(self):
        inside = ", ".join(f"{n}: {p:.6g}" for n, p in self.items())
        return f"Ppd({{{inside}}}, ⊥={self.bottom:.6g})"

    def serialize(self) -> str:
        """Tab-separated lines sorted by outcome, ending with the ⊥ mass."""
        lines = [f"{n}\t{p:.12f}" for n, p in self.items()]
        lines.append(f"⊥\t{self.bottom:.12f}")
        return "\n".join(lines)


def ppd_leq(p: Ppd, q: Ppd, tol: float = LEQ_TOLERANCE) -> bool:
    """Pointwise order on distributions, up to ``tol`` per outcome."""
    for n in set(p.support()) | set(q.support()):
        if p(n) > q(n) + tol:
            return False
    return True


def sup_ppds(sequence: Sequence[Ppd], tol: float = LEQ_TOLERANCE) -> Ppd:
    """Least upper bound of a monotone sequence: its pointwise limit.

    Raises NonMonotoneSequenceError when consecutive members are not
    pointwise non-decreasing within ``tol``.
    """
    seq = list(sequence)
    if not seq:
        return Ppd()
    for i in range(len(seq) - 1):
        if not ppd_leq(seq[i], seq[i + 1], tol):
            raise NonMonotoneSequenceError(
                f"members {i} and {i + 1} are not pointwise ordered")
    outcomes = set()
    for p in seq:
        outcomes.update(p.support())
    return Ppd({n: max(p(n) for p in seq) for n in outcomes})


def ppd_of(machine: Machine, phi: Superposition, tol: float = 1e-8) -> Ppd:
    """Read the output distribution off a normalized superposition."""
    norm = phi.norm()
    if abs(norm - 1.0) > tol:
        raise NotNormalizedError(f"superposition norm {norm:.12g} is not 1")
    mass: dict[int, float] = {}
    for config, amp in phi.terms.items():
        if config.state == machine.final:
            n = tape_value(config)
            mass[n] = mass.get(n, 0.0) + abs(amp) ** 2
    return Ppd(mass)


def entirely_final(machine: Machine, phi: Superposition) -> bool:
    return bool(phi) and all(c.state == machine.final for c in phi)


@dataclass(frozen=True)
class OutputPolicy:
    """When to stop watching a computation.

    ``eps_conv=None`` disables the convergence stop, leaving the horizon
    as the only cutoff for non-finitary runs.
    """

    eps_conv: float | None = 1e-6
    window: int = 8
    horizon: int = 10_000


@dataclass(frozen=True)
class OutputStatus:
    kind: str            # "finitary" | "converged" | "horizon-reached"
    step: int
    epsilon: float | None = None

    def __str__(self):
        if self.kind == "converged":
            return f"converged(eps={self.epsilon:g}, step={self.step})"
        return f"{self.kind}({self.step})"


@dataclass(frozen=True)
class OutputReport:
    ppd: Ppd
    status: OutputStatus
    history: tuple[float, ...]   # total defined mass after each step


def compute_output(machine: Machine, phi0: Superposition,
                   policy: OutputPolicy | None = None) -> OutputReport:
    """Run a computation far enough to report its output distribution.

    Stops as ``finitary(k)`` the first time the whole superposition is
    final (the distribution is then total and frozen), as ``converged``
    when the defined mass gained over the policy window drops below
    ``eps_conv``, and as ``horizon-reached`` otherwise.  A finite horizon
    under-approximates the limit; the report never claims divergence.
    """
    policy = policy or OutputPolicy()
    check_initial(machine, phi0)
    phi = phi0
    history: list[float] = []
    k = 0
    while True:
        current = ppd_of(machine, phi)
        history.append(current.total)
        if entirely_final(machine, phi):
            return OutputReport(current, OutputStatus("finitary", k), tuple(history))
        if (policy.eps_conv is not None and k >= policy.window
                and history[k] - history[k - policy.window] < policy.eps_conv):
            return OutputReport(current, OutputStatus("converged", k, policy.eps_conv),
                                tuple(history))
        if k >= policy.horizon:
            return OutputReport(current, OutputStatus("horizon-reached", k), tuple(history))
        phi = step(machine, phi)
        k += 1
