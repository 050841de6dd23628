"""Unit-hypersphere primitives and the identity types built on them.

Everything downstream reduces to three operations on unit vectors:
normalization, cosine distance, and spherical linear interpolation along
the great-circle arc. All arithmetic is 64-bit float; 32-bit appears only
at file boundaries.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    AntipodalPair,
    DimensionMismatch,
    GenderMismatch,
    IdenticalParents,
    ZeroVector,
)

# Norm below this signals corrupt data rather than a direction.
ZERO_NORM_THRESHOLD = 1e-12
# Below this angle the sin(theta) denominator is unusable; fall back to
# chord interpolation plus renormalization, which converges to the arc.
SMALL_ANGLE_THRESHOLD = 1e-6
# Above pi minus this the arc between the endpoints is not unique.
ANTIPODAL_THRESHOLD = 1e-6


class Gender(str, enum.Enum):
    """Closed two-value gender label set.

    Extension point: additional labels would need a wider bank-format
    gender byte and planner support; the pipeline currently recognizes
    exactly these two.
    """

    MALE = "male"
    FEMALE = "female"

    def __str__(self) -> str:  # pragma: no cover - repr convenience
        return self.value


#: Canonical iteration order for anything keyed by gender.
GENDERS = tuple(Gender)


@dataclass(frozen=True)
class SpeakerEmbedding:
    """A real speaker identity: unique id, gender label, unit vector."""

    id: str
    gender: Gender
    vector: np.ndarray

    @classmethod
    def from_raw(cls, id: str, gender: Gender | str, vector) -> "SpeakerEmbedding":
        """Build from an arbitrary-norm vector, normalizing on ingestion.

        Vectors already unit-length within 1e-6 are kept bit-for-bit so
        that file round-trips stay exact; anything else is rescaled.
        """
        if not id:
            raise ValueError("identity id must be non-empty")
        arr = np.asarray(vector, dtype=np.float64)
        return cls(id=id, gender=Gender(gender), vector=ensure_unit(arr))


@dataclass(frozen=True)
class SyntheticIdentity:
    """An interpolated identity: unit vector plus full provenance."""

    id: str
    parent_a: str
    parent_b: str
    alpha: float
    gender: Gender
    vector: np.ndarray


def normalize(vector) -> np.ndarray:
    """Rescale a vector to unit L2 norm, preserving direction.

    Raises ZeroVector when the norm is below 1e-12 (corrupt input) and
    ValueError for vectors shorter than 2 components.
    """
    arr = np.asarray(vector, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise ValueError(f"expected a 1-D vector of length >= 2, got shape {arr.shape}")
    norm = float(np.linalg.norm(arr))
    if norm < ZERO_NORM_THRESHOLD:
        raise ZeroVector(f"vector norm {norm:.3e} below {ZERO_NORM_THRESHOLD:.0e}")
    return arr / norm


def ensure_unit(vector: np.ndarray, tolerance: float = 1e-6) -> np.ndarray:
    """Normalize unless the vector is already unit within tolerance.

    Keeping in-tolerance vectors untouched makes write->read->write of the
    float32 bank format bit-exact while still guaranteeing the unit-norm
    invariant for arbitrary inputs.
    """
    arr = np.asarray(vector, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise ValueError(f"expected a 1-D vector of length >= 2, got shape {arr.shape}")
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) <= tolerance:
        return arr
    if norm < ZERO_NORM_THRESHOLD:
        raise ZeroVector(f"vector norm {norm:.3e} below {ZERO_NORM_THRESHOLD:.0e}")
    return arr / norm


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cos(angle) between two unit vectors; symmetric, in [0, 2]."""
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector lengths differ: {a.shape} vs {b.shape}")
    cos = min(1.0, max(-1.0, float(np.dot(a, b))))
    return 1.0 - cos


def slerp(e_i: np.ndarray, e_j: np.ndarray, alpha: float) -> np.ndarray:
    """Interpolate along the great-circle arc from e_i to e_j.

    theta = arccos(e_i . e_j); the result is
    sin((1-alpha) theta)/sin(theta) * e_i + sin(alpha theta)/sin(theta) * e_j,
    renormalized to absorb floating-point drift. alpha=0 and alpha=1 return
    the endpoints bitwise. Near-parallel pairs (theta < 1e-6) use chord
    interpolation plus renormalization; near-antipodal pairs are an error
    because the arc is not unique.
    """
    if e_i.shape != e_j.shape:
        raise DimensionMismatch(f"vector lengths differ: {e_i.shape} vs {e_j.shape}")
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return e_i.copy()
    if alpha == 1.0:
        return e_j.copy()

    cos = min(1.0, max(-1.0, float(np.dot(e_i, e_j))))
    theta = float(np.arccos(cos))
    if theta > np.pi - ANTIPODAL_THRESHOLD:
        raise AntipodalPair(f"angle {theta:.9f} rad too close to pi for a unique arc")
    if theta < SMALL_ANGLE_THRESHOLD:
        return normalize((1.0 - alpha) * e_i + alpha * e_j)
    sin_theta = np.sin(theta)
    out = (np.sin((1.0 - alpha) * theta) / sin_theta) * e_i
    out += (np.sin(alpha * theta) / sin_theta) * e_j
    return normalize(out)


def angle_between(a: np.ndarray, b: np.ndarray) -> float:
    """Angle in radians between two unit vectors (clamped arccos)."""
    return float(np.arccos(min(1.0, max(-1.0, float(np.dot(a, b))))))


def interpolate_identity(
    a: SpeakerEmbedding,
    b: SpeakerEmbedding,
    alpha: float,
    id_generator: Callable[[], str],
) -> SyntheticIdentity:
    """Blend two same-gender identities into a new synthetic one."""
    if a.id == b.id:
        raise IdenticalParents(f"cannot interpolate {a.id!r} with itself")
    if a.gender != b.gender:
        raise GenderMismatch(
            f"parents {a.id!r} ({a.gender.value}) and {b.id!r} ({b.gender.value}) "
            "must share a gender"
        )
    vector = slerp(a.vector, b.vector, alpha)
    return SyntheticIdentity(
        id=id_generator(),
        parent_a=a.id,
        parent_b=b.id,
        alpha=float(alpha),
        gender=a.gender,
        vector=vector,
    )
