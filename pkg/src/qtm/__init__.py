"""Simulator, validator, and observation harness for counter machines
with quantum transition tables."""

from .amplitudes import format_amplitude, parse_amplitude, serialize_amplitude
from .compat import (
    BvMachine,
    CounterTapeConfiguration,
    MarkedConfiguration,
    MarkedMachine,
    build_bv_machine,
    bv_predecessor,
    counter_tape_view,
    encode_extra_symbols,
    example_p,
    example_s,
    from_bv,
    from_counter_tape,
    reference_machines,
)
from .configuration import (
    Configuration,
    Superposition,
    canonicalize,
    check_initial,
    from_number_weights,
    initial_config,
    parse_input,
    tape_value,
)
from .distribution import (
    OutputPolicy,
    OutputReport,
    OutputStatus,
    Ppd,
    compute_output,
    entirely_final,
    ppd_leq,
    ppd_of,
    sup_ppds,
)
from .errors import *  # noqa: F401,F403  (QtmError and its subclasses)
from .evolution import (
    IsometryReport,
    case_of,
    computation,
    evolve,
    isometry_check,
    step,
    step_backward,
)
from .machine import (
    BLANK,
    ONE,
    Machine,
    MachineDescription,
    Rule,
    ValidationReport,
    build_machine,
    validate_local_conditions,
)
from .observation import (
    EmpiricalPpd,
    OutputObservation,
    RunRecord,
    RunTree,
    TauSchedule,
    empirical_ppd,
    enumerate_runs,
    measure_output,
    possible_observations,
    sample_run,
    sample_runs,
)
from .cli import machine_to_text, parse_machine

__version__ = "0.1.0"
