"""Exception types raised across the package.

Every error that callers are expected to catch derives from OpfkitError,
so CLI and runner code can map any modeling/parsing failure to a single
exit path while letting genuine bugs (TypeError etc.) propagate.
"""


class OpfkitError(Exception):
    """Base class for all errors raised by this package."""


# --- case file parsing ---

class MissingSection(OpfkitError):
    """A required mpc section (bus/gen/branch/gencost/baseMVA) is absent."""


class MalformedRow(OpfkitError):
    """A matrix row could not be parsed as numbers."""


class ShortRow(OpfkitError):
    """A matrix row has fewer columns than the format requires."""


class UnsupportedCostModel(OpfkitError):
    """gencost row uses a cost model other than polynomial (model != 2)."""


# --- network model ---

class NoReferenceBus(OpfkitError):
    """The case has no type-3 bus."""


class DanglingReference(OpfkitError):
    """A generator or branch references a bus id that does not exist."""


class ZeroImpedance(OpfkitError):
    """An in-service branch has r == x == 0."""


class UnknownElement(OpfkitError):
    """A referenced generator or branch cannot be resolved."""


class UnknownOutage(UnknownElement):
    """A contingency targets an element that does not exist or is off."""


class IslandingDetected(OpfkitError):
    """Applying an outage would split the network into islands."""


class TargetOnNonWind(OpfkitError):
    """A scenario assigns a wind target to a non-wind generator."""


class UnknownBus(OpfkitError):
    """A load profile column names a bus absent from the case."""


class IndexOutOfRange(OpfkitError):
    """A time-step index is outside the profile horizon."""


class Disconnected(OpfkitError):
    """The network is not a single connected component."""


# --- text input parsing ---

class MalformedLine(OpfkitError):
    """A contingency file line does not have the expected shape."""


class BadKind(OpfkitError):
    """A contingency line names an unknown outage kind."""


class DuplicateOutage(OpfkitError):
    """The same element is outaged twice within one contingency."""


class ContingencyIdGap(OpfkitError):
    """Contingency ids are not dense starting from 1."""


class MalformedHeader(OpfkitError):
    """A CSV header does not match the required schema."""


class NegativeWeight(OpfkitError):
    """A scenario weight is negative."""


class NonNumericCell(OpfkitError):
    """A CSV data cell could not be parsed as a number."""


class EmptyScenarioSet(OpfkitError):
    """A scenario file contains no scenarios."""


class TimeMismatch(OpfkitError):
    """P and Q load profiles carry different time columns."""


class UnknownHeader(OpfkitError):
    """A load profile header is not time_min followed by bus ids."""


class EmptyProfile(OpfkitError):
    """A load profile contains no data rows."""


# --- composition / solving ---

class TopologyMismatch(OpfkitError):
    """Per-period cases do not share the same network topology."""


class DimensionMismatch(OpfkitError):
    """A vector's length does not match the problem it is used with."""


class InvalidPlan(OpfkitError):
    """A run plan combines options that do not go together."""


class IoError(OpfkitError):
    """Reading an input or writing the output tree failed."""
