"""Domain errors shared across the package.

Every error the library raises on bad input derives from QtmError, so the
command line can map any of them onto exit code 1 while syntax problems
keep their line/column context.
"""

from __future__ import annotations


class QtmError(Exception):
    """Base class for all domain errors raised by this package."""


class ParseError(QtmError):
    """Syntax error in a machine file, input description, or amplitude expression."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = ""
        if line is not None and col is not None:
            where = f"({line}:{col}) "
        elif line is not None:
            where = f"(line {line}) "
        super().__init__(f"{where}{message}")


# -- machine construction -------------------------------------------------

class MissingRowError(QtmError):
    """A (state, symbol) pair that must carry a transition row has none."""


class DuplicateRuleError(QtmError):
    """The same (state, read, to, write, direction) key was declared twice."""


class SourceAsDestinationError(QtmError):
    """A rule writes into a source state; source states accept no incoming rules."""


class RuleFromTargetError(QtmError):
    """A rule leaves a target state; target states only tick their counter."""


class UnknownSymbolError(QtmError):
    """A symbol that is not part of the declared alphabet."""


class UnknownStateError(QtmError):
    """A state that is not part of the declared state list."""


class NonFiniteAmplitudeError(QtmError):
    """An amplitude is NaN or infinite."""


class RowNormExceededError(QtmError):
    """A transition row carries more than unit probability mass."""


# -- configurations and superpositions ------------------------------------

class NonZeroCounterError(QtmError):
    """A positive counter on a state that is neither source nor target."""


class NotNormalizedError(QtmError):
    """A superposition whose squared amplitudes do not sum to one."""


class NonInitialTermError(QtmError):
    """A term of an input superposition is not an initial configuration."""


# -- evolution -------------------------------------------------------------

class UnvalidatedMachineError(QtmError):
    """Stepping was requested on a machine that fails the local conditions."""


# -- distributions ---------------------------------------------------------

class NonMonotoneSequenceError(QtmError):
    """A distribution sequence that should be pointwise non-decreasing is not."""


# -- observation -----------------------------------------------------------

class NoOutcomeError(QtmError):
    """Measurement of an empty superposition has no outcome to report."""


class BudgetExceededError(QtmError):
    """Run-tree enumeration grew past the configured node budget."""


# -- conversions and encodings ---------------------------------------------

class BadBackLoopError(QtmError):
    """A machine in final-back-loop form violates the loop shape."""


class AlphabetCollisionError(QtmError):
    """The marked alphabet extension collides with existing symbols."""


class MalformedCounterTapeError(QtmError):
    """A counter-tape view whose star tape or head placement is inconsistent."""


class MalformedMarkedConfigurationError(QtmError):
    """A marked-symbol configuration outside the three legal shapes."""
