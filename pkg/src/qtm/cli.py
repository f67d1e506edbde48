"""Machine file parsing, serialization, and the command line interface.

A machine file is line oriented.  Comments start with ``#``, blank lines
are skipped.  The first payload line names the kind of machine::

    machine predecessor        an ordinary counter machine
    bv loop-predecessor        a back-loop machine (no sources/targets)

Header lines (``alphabet``, ``states``, ``sources``, ``targets``,
``initial``, ``final``) may come in any order; rule lines follow::

    q0 , 1 -> q1 , _ , R : 1
    q1 , 1 -> q1 , 1 , R : 1/sqrt(2)

Files whose first payload line starts with ``encoded`` are export-only
renderings of an encoding and are rejected by the parser.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .amplitudes import format_amplitude, parse_amplitude, serialize_amplitude
from .compat import BvMachine, build_bv_machine, encode_extra_symbols, from_bv, counter_tape_view
from .configuration import Superposition, parse_input
from .distribution import OutputPolicy, compute_output, ppd_of
from .errors import ParseError, QtmError
from .evolution import evolve, isometry_check
from .machine import DIRECTIONS, Machine, MachineDescription, Rule, build_machine
from .observation import TauSchedule, empirical_ppd, enumerate_runs, sample_runs

_HEADERS = ("alphabet", "states", "sources", "targets", "initial", "final")


def _payload_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_machine(text: str) -> Machine | BvMachine:
    """Parse a machine file into a built machine."""
    lines = list(_payload_lines(text))
    if not lines:
        raise ParseError("machine file has no content")
    lineno, head = lines[0]
    kind, _, name = head.partition(" ")
    if kind == "encoded":
        raise ParseError("this file is an export-only encoding and cannot be loaded",
                         line=lineno)
    if kind not in ("machine", "bv"):
        raise ParseError(f"expected 'machine NAME' or 'bv NAME', got {head!r}",
                         line=lineno)
    name = name.strip()
    if not name:
        raise ParseError(f"missing machine name after {kind!r}", line=lineno)

    headers: dict[str, tuple] = {}
    rules: list[Rule] = []
    for lineno, line in lines[1:]:
        if "->" in line:
            rules.append(_parse_rule(line, lineno))
            continue
        word, _, rest = line.partition(" ")
        if word not in _HEADERS:
            raise ParseError(f"unknown header {word!r}", line=lineno)
        if word in headers:
            raise ParseError(f"header {word!r} given twice", line=lineno)
        if kind == "bv" and word in ("sources", "targets"):
            raise ParseError("a back-loop machine file declares no sources or targets",
                             line=lineno)
        values = tuple(rest.split())
        if word in ("initial", "final"):
            if len(values) != 1:
                raise ParseError(f"header {word!r} needs exactly one state", line=lineno)
            headers[word] = values[0]
        else:
            headers[word] = values

    required = ["alphabet", "states", "initial", "final"]
    if kind == "machine":
        required += ["sources", "targets"]
    for word in required:
        if word not in headers:
            raise ParseError(f"missing header {word!r}")

    desc = MachineDescription(
        name=name,
        alphabet=headers["alphabet"],
        states=headers["states"],
        sources=headers.get("sources", ()),
        targets=headers.get("targets", ()),
        initial=headers["initial"],
        final=headers["final"],
        rules=tuple(rules),
        bv=(kind == "bv"),
    )
    return build_bv_machine(desc) if kind == "bv" else build_machine(desc)


def _parse_rule(line: str, lineno: int) -> Rule:
    before, _, after = line.partition("->")
    source = [part.strip() for part in before.split(",")]
    if len(source) != 2 or not all(source):
        raise ParseError(f"left side of rule must be 'state , symbol', got {before.strip()!r}",
                         line=lineno)
    body, sep, amp_text = after.rpartition(":")
    if not sep:
        raise ParseError("rule is missing its ': amplitude' part", line=lineno)
    dest = [part.strip() for part in body.split(",")]
    if len(dest) != 3 or not all(dest):
        raise ParseError(
            f"right side of rule must be 'state , symbol , direction', got {body.strip()!r}",
            line=lineno)
    if dest[2] not in DIRECTIONS:
        raise ParseError(f"direction must be L or R, got {dest[2]!r}", line=lineno)
    amplitude = parse_amplitude(amp_text.strip(), line=lineno)
    return Rule(source[0], source[1], dest[0], dest[1], dest[2], amplitude, line=lineno)


def _rule_lines(states, alphabet, table) -> list[str]:
    state_pos = {q: i for i, q in enumerate(states)}
    symbol_pos = {a: i for i, a in enumerate(alphabet)}
    lines = []
    for q in states:
        for a in alphabet:
            row = table.get((q, a))
            if not row:
                continue
            entries = sorted(row.items(),
                             key=lambda kv: (state_pos[kv[0][0]], symbol_pos[kv[0][1]], kv[0][2]))
            for (p, b, d), amp in entries:
                lines.append(f"{q} , {a} -> {p} , {b} , {d} : {serialize_amplitude(amp)}")
    return lines


def machine_to_text(m: Machine | BvMachine) -> str:
    """Render a machine back into file form; parsing it again rebuilds
    an equal machine."""
    lines = []
    if isinstance(m, BvMachine):
        lines.append(f"bv {m.name}")
        table = m.delta
    else:
        lines.append(f"machine {m.name}")
        table = m.delta0
    lines.append("alphabet " + " ".join(m.alphabet))
    lines.append("states " + " ".join(m.states))
    if not isinstance(m, BvMachine):
        lines.append("sources " + " ".join(q for q in m.states if q in m.sources))
        lines.append("targets " + " ".join(q for q in m.states if q in m.targets))
    lines.append(f"initial {m.initial}")
    lines.append(f"final {m.final}")
    lines.extend(_rule_lines(m.states, m.alphabet, table))
    return "\n".join(lines) + "\n"


def marked_machine_to_text(encoded) -> str:
    """Render a marked-symbol encoding for export.  The result is not a
    loadable machine file."""
    base = encoded.base
    table: dict = {}
    for rule in encoded.rule_table():
        table.setdefault((rule.state, rule.read), {})[
            (rule.to, rule.write, rule.direction)] = rule.amplitude
    lines = [
        "encoded extra-symbols",
        f"machine {base.name}-marked",
        "alphabet " + " ".join(encoded.alphabet),
        "states " + " ".join(base.states),
        f"initial {base.initial}",
        f"final {base.final}",
    ]
    lines.extend(_rule_lines(base.states, encoded.alphabet, table))
    return "\n".join(lines) + "\n"


# -- subcommands ---------------------------------------------------------------

def _load_machine(path: str) -> Machine | BvMachine:
    with open(path, encoding="utf-8") as handle:
        return parse_machine(handle.read())


def _plain_machine(path: str) -> Machine:
    m = _load_machine(path)
    if isinstance(m, BvMachine):
        raise ParseError("this command needs a counter machine, not a back-loop machine")
    return m


def _load_input(text: str, machine: Machine) -> Superposition:
    if "|" not in text:
        text = f"|{text}⟩"
    return parse_input(text, machine)


def _emit(text: str, output: str | None):
    if output:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _cmd_validate(args) -> int:
    m = _load_machine(args.machine)
    if isinstance(m, BvMachine):
        print(f"back-loop machine {m.name}: shape accepted "
              f"({len(m.delta)} rows, {len(m.states)} states)")
        return 0
    report = m.validation_report()
    print(report)
    if args.isometry and report.valid:
        iso = isometry_check(m, depth=args.isometry)
        print(f"isometry spot check: depth {iso.depth}, {iso.configs_checked} configurations, "
              f"max deviation {iso.max_deviation:.3e}")
    return 0 if report.valid else 1


def _cmd_run(args) -> int:
    m = _plain_machine(args.machine)
    phi = evolve(m, _load_input(args.input, m), args.steps)
    for config, amp in phi.items():
        print(f"{format_amplitude(amp)}\t{config}")
    return 0


def _cmd_ppd(args) -> int:
    m = _plain_machine(args.machine)
    phi = _load_input(args.input, m)
    if args.steps is not None:
        ppd = ppd_of(m, evolve(m, phi, args.steps))
        print(ppd.serialize())
        print(f"# after {args.steps} steps")
        return 0
    policy = OutputPolicy(eps_conv=args.epsilon, window=args.window, horizon=args.horizon)
    report = compute_output(m, phi, policy)
    print(report.ppd.serialize())
    print(f"# status: {report.status}")
    return 0


def _cmd_sample(args) -> int:
    m = _plain_machine(args.machine)
    phi = _load_input(args.input, m)
    tau = TauSchedule.from_text(args.tau)
    seed = args.seed
    if seed is None:
        env = os.environ.get("QTM_SEED")
        seed = int(env) if env else int(np.random.SeedSequence().entropy) % 2 ** 63
    records = sample_runs(m, phi, tau, args.horizon, args.runs, seed)
    summary = empirical_ppd(records)
    print(f"# seed: {seed}")
    print(f"# runs: {summary.runs}")
    outcomes = sorted((x for x in summary.sigma if x is not None))
    for x in outcomes:
        print(f"{x}\t{summary.ppd(x):.6f}\t±{3 * summary.sigma[x]:.6f}")
    bottom = 1.0 - sum(summary.ppd(x) for x in outcomes)
    print(f"⊥\t{bottom:.6f}\t±{3 * summary.sigma.get(None, 0.0):.6f}")
    return 0


def _cmd_enumerate(args) -> int:
    m = _plain_machine(args.machine)
    phi = _load_input(args.input, m)
    tau = TauSchedule.from_text(args.tau)
    tree = enumerate_runs(m, phi, tau, args.horizon, node_budget=args.budget)
    print(tree.to_text())
    residual = 0.0
    for t in tau.times_below(args.horizon):
        depth = t + 1
        dist = tree.observed_output_distribution(depth)
        ppd = ppd_of(m, evolve(m, phi, depth))
        for n in set(dist) | set(ppd.support()):
            if n is None:
                continue
            residual = max(residual, abs(dist.get(n, 0.0) - ppd(n)))
        residual = max(residual, abs(dist.get(None, 0.0) - ppd.bottom))
    print(f"# consistency residual: {residual:.3e}")
    return 0


def _cmd_convert_bv(args) -> int:
    m = _load_machine(args.machine)
    if not isinstance(m, BvMachine):
        raise ParseError("convert-bv needs a back-loop machine file")
    _emit(machine_to_text(from_bv(m)), args.output)
    return 0


def _cmd_encode(args) -> int:
    m = _plain_machine(args.machine)
    if args.mode == "extra-symbols":
        _emit(marked_machine_to_text(encode_extra_symbols(m)), args.output)
        return 0
    if not args.input:
        raise ParseError("counter-tape mode needs --input")
    phi = _load_input(args.input, m)
    lines = [f"{format_amplitude(amp)}\t{counter_tape_view(m, config)}"
             for config, amp in phi.items()]
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtm",
        description="simulate, validate, and observe counter machines with "
                    "quantum transition tables")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, input_needed=True):
        p.add_argument("--machine", required=True, help="machine file to load")
        if input_needed:
            p.add_argument("--input", required=True,
                           help="input superposition, e.g. '1/sqrt(2)|nbar:0> + 1/sqrt(2)|nbar:2>'")

    p = sub.add_parser("validate", help="check the three local well-formedness conditions")
    common(p, input_needed=False)
    p.add_argument("--isometry", type=int, default=0, metavar="DEPTH",
                   help="also run an isometry spot check to this depth")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("run", help="evolve an input and print the resulting superposition")
    common(p)
    p.add_argument("--steps", type=int, required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("ppd", help="compute the output distribution of an input")
    common(p)
    p.add_argument("--steps", type=int, default=None,
                   help="report the distribution after exactly this many steps")
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--epsilon", type=float, default=None,
                   help="stop once the distribution gains less than this mass "
                        "over a window of steps")
    p.add_argument("--window", type=int, default=8)
    p.set_defaults(func=_cmd_ppd)

    p = sub.add_parser("sample", help="sample observed runs and print outcome frequencies")
    common(p)
    p.add_argument("--tau", required=True,
                   help="observation schedule, 'every:K[,offset:O]' or 'list:a,b,c'")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None,
                   help="generator seed (falls back to QTM_SEED, then entropy)")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("enumerate", help="expand the full observed-run tree")
    common(p)
    p.add_argument("--tau", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--budget", type=int, default=10 ** 6)
    p.set_defaults(func=_cmd_enumerate)

    p = sub.add_parser("convert-bv", help="convert a back-loop machine to a counter machine")
    common(p, input_needed=False)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_convert_bv)

    p = sub.add_parser("encode", help="render a counter-free encoding")
    common(p, input_needed=False)
    p.add_argument("--mode", choices=("extra-symbols", "counter-tape"), required=True)
    p.add_argument("--input", default=None,
                   help="input superposition (counter-tape mode)")
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_encode)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QtmError as exc:
        kind = type(exc).__name__.removesuffix("Error")
        print(f"{kind}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"IO: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
