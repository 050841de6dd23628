"""Exception hierarchy for the expansion pipeline.

Three base categories mirror the CLI's exit-code contract: bad input data
(INPUT, exit 2), requests exceeding combinatorial capacity (CAPACITY,
exit 3), and filesystem failures (IO, exit 4).
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all errors raised by this package."""

    category = "INPUT"
    exit_code = 2


class InputError(PipelineError):
    """Malformed, inconsistent, or missing input data."""

    category = "INPUT"
    exit_code = 2


class CapacityError(PipelineError):
    """A request exceeds what the input can combinatorially supply."""

    category = "CAPACITY"
    exit_code = 3


class IoFailure(PipelineError):
    """A filesystem operation failed; carries the offending path."""

    category = "IO"
    exit_code = 4

    def __init__(self, path, message):
        super().__init__(f"{message}: {path}")
        self.path = str(path)


# -- vector-space primitives -------------------------------------------------

class ZeroVector(InputError):
    """Vector norm below threshold; cannot be normalized."""


class DimensionMismatch(InputError):
    """Two vectors (or a vector and its set) disagree on dimension."""


class AntipodalPair(InputError):
    """Interpolation endpoints are (near-)antipodal; the arc is not unique."""


class GenderMismatch(InputError):
    """Attempt to interpolate across gender groups."""


class IdenticalParents(InputError):
    """Both interpolation parents carry the same identity id."""


# -- collections and planning ------------------------------------------------

class DuplicateIdentity(InputError):
    """An identity id occurs more than once within one set."""


class UnknownIdentity(InputError):
    """A referenced identity id is absent from the embedding set."""


class GroupTooSmall(InputError):
    """A gender group (or utterance group) has too few members."""


class TargetExceedsCapacity(CapacityError):
    """Requested pair count exceeds C(n, 2) for the group."""


# -- manifests ----------------------------------------------------------------

class EmptyPool(InputError):
    """Transcript filtering left zero usable entries."""


class PoolTooSmall(CapacityError):
    """Transcript pool smaller than the per-identity utterance count."""


# -- diagnostics and simulation ------------------------------------------------

class DegenerateCovariance(InputError):
    """Real points are affinely dependent below rank 2; no projection plane."""


class InvalidSpec(InputError):
    """A population spec fails validation."""
