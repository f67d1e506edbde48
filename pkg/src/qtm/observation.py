"""Output observation, observed runs, and their sampling and enumeration.

Observing the output of a superposition is a two-stage measurement:
first whether the configuration is final, then (if it is) which final
basis configuration it is.  The outcome is a numeral with the collapsed
basis term, or ⊥ with the normalized non-final remainder.

A schedule picks the steps after which a computation is observed; each
observed step applies one evolution step and then measures the result.
Runs can be sampled with a seeded generator or enumerated exhaustively
into a weighted tree.  Once a run reports a numeral it keeps reporting
the same numeral forever, which the sampler exploits to stop simulating
a run that has collapsed onto a single final configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .configuration import Superposition, check_initial, tape_value
from .distribution import Ppd
from .errors import BudgetExceededError, NoOutcomeError, NotNormalizedError, ParseError
from .evolution import step
from .machine import Machine

NORM_TOLERANCE = 1e-8

#: non-final remainders lighter than this are dropped from enumeration
REMAINDER_CUTOFF = 1e-18


@dataclass(frozen=True)
class TauSchedule:
    """A strictly increasing observation schedule.

    ``base`` is an explicit increasing prefix and ``stride`` extends it
    beyond the last explicit entry.
    """

    base: tuple[int, ...]
    stride: int

    def __post_init__(self):
        if not self.base:
            raise ValueError("schedule needs at least one entry")
        if any(t < 0 for t in self.base):
            raise ValueError("schedule entries must be non-negative")
        if any(b >= a for b, a in zip(self.base, self.base[1:])):
            raise ValueError(f"schedule {self.base} is not strictly increasing")
        if self.stride < 1:
            raise ValueError("stride must be at least 1")

    @classmethod
    def every(cls, stride: int, offset: int = 0) -> "TauSchedule":
        """tau(i) = offset + stride * i."""
        return cls((offset,), stride)

    @classmethod
    def explicit(cls, times: Sequence[int]) -> "TauSchedule":
        """An explicit list, extended past its end by its last stride."""
        times = tuple(times)
        stride = times[-1] - times[-2] if len(times) >= 2 else 1
        return cls(times, max(stride, 1))

    @classmethod
    def from_text(cls, text: str) -> "TauSchedule":
        """Parse ``every:K``, ``every:K,offset:O``, or ``list:a,b,c``."""
        text = text.strip()
        if text.startswith("every:"):
            parts = text[6:].split(",")
            try:
                stride = int(parts[0])
            except ValueError:
                raise ParseError(f"bad stride in schedule {text!r}") from None
            offset = 0
            for extra in parts[1:]:
                if extra.startswith("offset:"):
                    offset = int(extra[7:])
                else:
                    raise ParseError(f"bad schedule option {extra!r}")
            return cls.every(stride, offset)
        if text.startswith("list:"):
            try:
                times = [int(t) for t in text[5:].split(",") if t.strip() != ""]
            except ValueError:
                raise ParseError(f"bad schedule list {text!r}") from None
            if not times:
                raise ParseError("schedule list is empty")
            return cls.explicit(times)
        raise ParseError(f"schedule must start with every: or list:, got {text!r}")

    def __call__(self, i: int) -> int:
        if i < len(self.base):
            return self.base[i]
        return self.base[-1] + self.stride * (i - len(self.base) + 1)

    def times_below(self, horizon: int) -> list[int]:
        """All observation steps h with h < horizon."""
        times = []
        i = 0
        while True:
            t = self(i)
            if t >= horizon:
                return times
            times.append(t)
            i += 1


@dataclass(frozen=True)
class OutputObservation:
    """One measurement outcome: the observed value, the collapsed state,
    and the overall probability of this branch."""

    measured: Superposition
    x: int | None                 # None encodes ⊥
    collapsed: Superposition
    probability: float


def _split_final(machine: Machine, phi: Superposition):
    final = {}
    rest = {}
    for config, amp in phi.terms.items():
        (final if config.state == machine.final else rest)[config] = amp
    return final, rest


def possible_observations(machine: Machine, phi: Superposition,
                          min_mass: float = REMAINDER_CUTOFF) -> list[OutputObservation]:
    """Every outcome an output observation of ``phi`` can produce.

    One branch per final basis term (value, unit-phase collapse, mass of
    the term) plus a ⊥ branch carrying the normalized non-final
    remainder, in deterministic order.
    """
    if not phi:
        raise NoOutcomeError("cannot observe the zero superposition")
    final, rest = _split_final(machine, phi)
    outcomes = []
    for config, amp in sorted(final.items(), key=lambda kv: kv[0].sort_key()):
        collapsed = Superposition({config: amp / abs(amp)})
        outcomes.append(OutputObservation(phi, tape_value(config), collapsed, abs(amp) ** 2))
    rest_mass = sum(abs(a) ** 2 for a in rest.values())
    if rest_mass > min_mass:
        scale = 1.0 / math.sqrt(rest_mass)
        collapsed = Superposition({c: a * scale for c, a in rest.items()})
        outcomes.append(OutputObservation(phi, None, collapsed, rest_mass))
    if not outcomes:
        raise NoOutcomeError("superposition has no mass to observe")
    return outcomes


def measure_output(machine: Machine, phi: Superposition,
                   rng: np.random.Generator) -> OutputObservation:
    """Sample one output observation of a normalized superposition."""
    if not phi:
        raise NoOutcomeError("cannot observe the zero superposition")
    norm = phi.norm()
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise NotNormalizedError(f"superposition norm {norm:.12g} is not 1")
    final, rest = _split_final(machine, phi)
    p_final = sum(abs(a) ** 2 for a in final.values())
    # a superposition with no non-final part is measured final outright,
    # so rounding in p_final cannot leak onto a zero-mass branch
    if final and (not rest or rng.random() < p_final):
        if len(final) == 1:
            (config, amp), = final.items()
        else:
            # second stage: which final basis configuration
            draw = rng.random() * p_final
            acc = 0.0
            chosen = None
            for config, amp in sorted(final.items(), key=lambda kv: kv[0].sort_key()):
                acc += abs(amp) ** 2
                chosen = (config, amp)
                if draw < acc:
                    break
            config, amp = chosen
        collapsed = Superposition({config: amp / abs(amp)})
        return OutputObservation(phi, tape_value(config), collapsed, abs(amp) ** 2)
    rest_mass = sum(abs(a) ** 2 for a in rest.values())
    if rest_mass <= 0.0:
        raise NoOutcomeError("no non-final mass to collapse onto")
    scale = 1.0 / math.sqrt(rest_mass)
    collapsed = Superposition({c: a * scale for c, a in rest.items()})
    return OutputObservation(phi, None, collapsed, rest_mass)


@dataclass(frozen=True)
class TraceEvent:
    step: int
    event: str              # "init" | "step" | "measure"
    x: int | None           # only meaningful on measure events
    probability: float


@dataclass(frozen=True)
class RunRecord:
    """One observed run prefix of a fixed length.

    ``outputs`` lists the observation results in schedule order,
    ``observed`` is the first numeral among them (None meaning ⊥ so far),
    and ``probability`` is the run's accumulated weight.  States and the
    step trace are kept only on request; ``seed`` records the generator
    seed the run was drawn under, when there was one.
    """

    outputs: tuple
    observed: int | None
    probability: float
    length: int
    states: tuple[Superposition, ...] | None = None
    trace: tuple[TraceEvent, ...] | None = None
    seed: int | None = None


def format_run_trace(record: RunRecord) -> str:
    """One line per step: ``k | event | x | Pr``."""
    if record.trace is None:
        raise ValueError("run was sampled without keep_trace=True")
    lines = []
    for ev in record.trace:
        if ev.event == "measure":
            shown = "⊥" if ev.x is None else str(ev.x)
        else:
            shown = "-"
        lines.append(f"{ev.step} | {ev.event} | {shown} | {ev.probability:.12g}")
    return "\n".join(lines)


def sample_run(machine: Machine, phi0: Superposition, tau: TauSchedule,
               horizon: int, rng: np.random.Generator, *,
               keep_states: bool = False, keep_trace: bool = False,
               seed: int | None = None) -> RunRecord:
    """Sample one observed run of ``horizon`` steps.

    After a run collapses onto a single final basis configuration every
    later observation repeats the same numeral with probability one, so
    unless states or a trace were requested the remaining steps are
    filled in without simulating them.
    """
    if horizon < tau(0) + 1:
        raise ValueError(f"horizon {horizon} ends before the first observation "
                         f"at step {tau(0) + 1}")
    check_initial(machine, phi0)
    times = set(tau.times_below(horizon))
    phi = phi0
    probability = 1.0
    outputs: list[int | None] = []
    observed: int | None = None
    states = [phi0] if keep_states else None
    trace = [TraceEvent(0, "init", None, 1.0)] if keep_trace else None
    h = 0
    while h < horizon:
        if observed is not None and not keep_states and not keep_trace:
            outputs.extend(observed for t in sorted(times) if t >= h)
            break
        phi = step(machine, phi)
        if h in times:
            obs = measure_output(machine, phi, rng)
            phi = obs.collapsed
            probability *= obs.probability
            outputs.append(obs.x)
            if observed is None and obs.x is not None:
                observed = obs.x
            if keep_trace:
                trace.append(TraceEvent(h + 1, "measure", obs.x, probability))
        elif keep_trace:
            trace.append(TraceEvent(h + 1, "step", None, probability))
        if keep_states:
            states.append(phi)
        h += 1
    return RunRecord(tuple(outputs), observed, probability, horizon,
                     tuple(states) if states is not None else None,
                     tuple(trace) if trace is not None else None, seed)


def sample_runs(machine: Machine, phi0: Superposition, tau: TauSchedule,
                horizon: int, count: int, seed: int, *,
                keep_states: bool = False, keep_trace: bool = False) -> list[RunRecord]:
    """Draw ``count`` independent runs.

    Each run gets its own child generator spawned from the seed, so run i
    sees the same draws no matter how many draws its predecessors used.
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [sample_run(machine, phi0, tau, horizon, np.random.default_rng(child),
                       keep_states=keep_states, keep_trace=keep_trace, seed=seed)
            for child in children]


# -- exhaustive enumeration ---------------------------------------------------

@dataclass
class RunNode:
    """One node of the weighted run tree.

    ``x`` is the observation made on the edge into this node (None for ⊥
    or for unmeasured edges, disambiguated by ``measured``);
    ``first_output`` is the run-so-far observed output.
    """

    depth: int
    state: Superposition
    probability: float
    x: int | None
    measured: bool
    first_output: int | None
    children: list = field(default_factory=list)


class RunTree:
    """All observed runs of a fixed horizon, with their probabilities."""

    def __init__(self, root: RunNode, tau: TauSchedule, horizon: int,
                 levels: list[list[RunNode]]):
        self.root = root
        self.tau = tau
        self.horizon = horizon
        self.levels = levels

    def nodes_at(self, depth: int) -> list[RunNode]:
        return self.levels[depth]

    def mass_at(self, depth: int) -> float:
        return sum(node.probability for node in self.levels[depth])

    def observed_output_distribution(self, depth: int) -> dict:
        """Probability of each observed output over the runs cut at ``depth``."""
        dist: dict = {}
        for node in self.levels[depth]:
            key = node.first_output
            dist[key] = dist.get(key, 0.0) + node.probability
        return dist

    def reconstructed(self, depth: int) -> Superposition:
        """Mix the collapsed run states back: sum of sqrt(Pr) * state."""
        total = Superposition()
        for node in self.levels[depth]:
            total = total + node.state.scaled(math.sqrt(node.probability))
        return total

    def records(self) -> list[RunRecord]:
        """Leaf runs with their output sequences and probabilities."""
        out: list[RunRecord] = []

        def walk(node: RunNode, outputs: tuple):
            if node.measured:
                outputs = outputs + (node.x,)
            if not node.children:
                out.append(RunRecord(outputs, node.first_output, node.probability,
                                     node.depth))
                return
            for child in node.children:
                walk(child, outputs)

        walk(self.root, ())
        return out

    def to_text(self, max_terms: int = 3) -> str:
        """Indented rendering, one line per node."""
        lines: list[str] = []

        def describe(node: RunNode) -> str:
            terms = node.state.items()
            shown = ", ".join(f"{a:.6g}·{c}" for c, a in terms[:max_terms])
            if len(terms) > max_terms:
                shown += f", ... ({len(terms)} terms)"
            if node.depth == 0:
                head = "start"
            elif node.measured:
                head = f"measure x={'⊥' if node.x is None else node.x}"
            else:
                head = "step"
            return (f"k={node.depth} {head} Pr={node.probability:.12g} "
                    f"[{shown}]")

        def walk(node: RunNode):
            lines.append("  " * node.depth + describe(node))
            for child in node.children:
                walk(child)

        walk(self.root)
        return "\n".join(lines)


def enumerate_runs(machine: Machine, phi0: Superposition, tau: TauSchedule,
                   horizon: int, node_budget: int = 10 ** 6) -> RunTree:
    """Expand every observed run of ``horizon`` steps into a weighted tree."""
    if horizon < tau(0) + 1:
        raise ValueError(f"horizon {horizon} ends before the first observation "
                         f"at step {tau(0) + 1}")
    check_initial(machine, phi0)
    times = set(tau.times_below(horizon))
    root = RunNode(0, phi0, 1.0, None, False, None)
    levels = [[root]]
    count = 1
    for h in range(horizon):
        current = levels[h]
        nxt: list[RunNode] = []
        for node in current:
            stepped = step(machine, node.state)
            if h in times:
                for obs in possible_observations(machine, stepped):
                    first = node.first_output
                    if first is None and obs.x is not None:
                        first = obs.x
                    child = RunNode(h + 1, obs.collapsed,
                                    node.probability * obs.probability,
                                    obs.x, True, first)
                    node.children.append(child)
            else:
                node.children.append(RunNode(h + 1, stepped, node.probability,
                                             None, False, node.first_output))
            count += len(node.children)
            if count > node_budget:
                raise BudgetExceededError(
                    f"run tree exceeded {node_budget} nodes at depth {h + 1}")
            nxt.extend(node.children)
        levels.append(nxt)
    return RunTree(root, tau, horizon, levels)


@dataclass(frozen=True)
class EmpiricalPpd:
    """Observed-output frequencies with a one-sigma binomial radius per outcome."""

    ppd: Ppd
    sigma: dict
    runs: int
    seed: int | None = None


def empirical_ppd(records: Sequence[RunRecord], seed: int | None = None) -> EmpiricalPpd:
    """Frequencies of the observed outputs over a batch of runs."""
    if not records:
        raise ValueError("no runs to summarize")
    counts: dict = {}
    for record in records:
        counts[record.observed] = counts.get(record.observed, 0) + 1
    n = len(records)
    sigma = {}
    mass = {}
    for outcome, c in counts.items():
        p_hat = c / n
        sigma[outcome] = math.sqrt(p_hat * (1.0 - p_hat) / n)
        if outcome is not None:
            mass[outcome] = p_hat
    if seed is None:
        seeds = {r.seed for r in records if r.seed is not None}
        seed = seeds.pop() if len(seeds) == 1 else None
    return EmpiricalPpd(Ppd(mass), sigma, n, seed)
