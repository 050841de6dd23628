"""Diagnostic views over real and synthetic identity banks.

Three read-only computations: an exact principal-plane 2-D projection of
real vs. synthetic identities, within-identity cosine-similarity
histograms, and a probe-based coverage report quantifying how much the
synthetic identities shrink the distance from reachable space to the
nearest identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import Gender, SyntheticIdentity, slerp
from .errors import AntipodalPair, DegenerateCovariance, GroupTooSmall
from .planner import EmbeddingSet

DEFAULT_BINS = 50
DEFAULT_MAX_PAIRS_PER_IDENTITY = 200

PROJECTION_HEADER = "id\tkind\tx\ty"
HISTOGRAM_HEADER = "bin_lo\tbin_hi\tcount"


@dataclass(frozen=True)
class ProjectedPoint:
    id: str
    kind: str  # "real" | "synthetic"
    x: float
    y: float


@dataclass
class ProjectionResult:
    basis: tuple[np.ndarray, np.ndarray]
    points: list[ProjectedPoint]


@dataclass
class SimilarityHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    sample_count: int


@dataclass(frozen=True)
class CoverageReport:
    probe_count: int
    before_mean: float
    after_mean: float

    @property
    def gain(self) -> float:
        return self.before_mean - self.after_mean


def project_2d(
    real: EmbeddingSet,
    synthetic: Sequence[SyntheticIdentity],
    seed: int = 0,
) -> ProjectionResult:
    """Project everything onto the real points' top two principal axes.

    The basis is exact (eigendecomposition of the mean-centered covariance
    of the real vectors) and sign-fixed, so the result is deterministic;
    the seed parameter is accepted for interface stability but unused.
    Points carry raw dot products with the basis, not centered ones.
    """
    del seed
    matrix = real.matrix
    if matrix.shape[0] < 2:
        raise DegenerateCovariance(
            f"need at least 2 real points for a projection plane, got {matrix.shape[0]}"
        )
    centered = matrix - matrix.mean(axis=0)
    cov = centered.T @ centered
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    scale = max(float(eigenvalues[-1]), 0.0)
    if scale <= 0.0 or float(eigenvalues[-2]) <= 1e-10 * scale:
        raise DegenerateCovariance(
            "real points are affinely dependent below rank 2; no projection plane"
        )
    basis = []
    for column in (-1, -2):
        vec = eigenvectors[:, column].copy()
        peak = int(np.argmax(np.abs(vec)))
        if vec[peak] < 0:
            vec = -vec
        basis.append(vec)
    b1, b2 = basis
    points = [
        ProjectedPoint(rec.id, "real", float(rec.vector @ b1), float(rec.vector @ b2))
        for rec in real.records
    ]
    points += [
        ProjectedPoint(s.id, "synthetic", float(s.vector @ b1), float(s.vector @ b2))
        for s in synthetic
    ]
    return ProjectionResult(basis=(b1, b2), points=points)


def intra_class_scores(
    utterance_groups: Mapping[str, np.ndarray],
    max_pairs_per_identity: int = DEFAULT_MAX_PAIRS_PER_IDENTITY,
    seed: int = 0,
) -> np.ndarray:
    """Within-identity pairwise cosine similarities, pooled over identities.

    Each identity contributes up to max_pairs_per_identity distinct pairs,
    sampled without replacement when it has more; identities are processed
    in sorted id order under one seeded generator.
    """
    too_small = sorted(k for k, v in utterance_groups.items() if np.asarray(v).shape[0] < 2)
    if too_small:
        raise GroupTooSmall(f"identities with fewer than 2 utterances: {too_small}")
    rng = np.random.default_rng(seed)
    scores: list[np.ndarray] = []
    for identity in sorted(utterance_groups):
        vectors = np.asarray(utterance_groups[identity], dtype=np.float64)
        k = vectors.shape[0]
        capacity = k * (k - 1) // 2
        if capacity <= max_pairs_per_identity:
            rows, cols = np.triu_indices(k, 1)
        else:
            chosen = rng.choice(capacity, size=max_pairs_per_identity, replace=False)
            rows, cols = _unrank(chosen, k)
        sims = np.einsum("ij,ij->i", vectors[rows], vectors[cols])
        scores.append(np.clip(sims, -1.0, 1.0))
    return np.concatenate(scores) if scores else np.empty(0)


def _unrank(linear: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    firsts = np.arange(k, dtype=np.int64)
    starts = np.concatenate(([0], np.cumsum(k - 1 - firsts[:-1])))
    i = np.searchsorted(starts, linear, side="right") - 1
    j = linear - starts[i] + i + 1
    return i, j


def intra_class_similarity(
    utterance_groups: Mapping[str, np.ndarray],
    max_pairs_per_identity: int = DEFAULT_MAX_PAIRS_PER_IDENTITY,
    seed: int = 0,
    bins: int = DEFAULT_BINS,
) -> SimilarityHistogram:
    """Histogram of within-identity similarities over uniform bins on [-1, 1]."""
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    scores = intra_class_scores(utterance_groups, max_pairs_per_identity, seed)
    edges = np.linspace(-1.0, 1.0, bins + 1)
    counts, _ = np.histogram(scores, bins=edges)
    return SimilarityHistogram(bin_edges=edges, counts=counts, sample_count=scores.shape[0])


def coverage_gain(
    real: EmbeddingSet,
    synthetic: Sequence[SyntheticIdentity],
    probe_count: int = 128,
    seed: int = 0,
) -> CoverageReport:
    """Mean probe-to-nearest-identity distance, before vs. after expansion.

    Probes sample the reachable region per gender group: arcs between
    random same-gender real pairs at uniform coefficients. The after value
    can never exceed the before value (minimum over a superset).
    """
    if probe_count < 1:
        raise ValueError("probe_count must be >= 1")
    eligible = [g for g in Gender if len(real.gender_positions(g)) >= 2]
    if not eligible:
        raise GroupTooSmall("no gender group with >= 2 members to draw probes from")
    rng = np.random.default_rng(seed)
    allocation = _allocate(probe_count, {g: len(real.gender_positions(g)) for g in eligible})
    probes: list[np.ndarray] = []
    for gender in eligible:
        positions = list(real.gender_positions(gender))
        group = real.matrix[positions]
        for _ in range(allocation[gender]):
            probes.append(_draw_probe(rng, group))
    probe_matrix = np.stack(probes)
    before = _nearest_distances(probe_matrix, real.matrix)
    if synthetic:
        synthetic_matrix = np.stack([s.vector for s in synthetic])
        after = np.minimum(before, _nearest_distances(probe_matrix, synthetic_matrix))
    else:
        after = before
    return CoverageReport(
        probe_count=probe_count,
        before_mean=float(before.mean()),
        after_mean=float(after.mean()),
    )


def _allocate(total: int, sizes: Mapping[Gender, int]) -> dict[Gender, int]:
    genders = [g for g in Gender if g in sizes]
    weight = sum(sizes[g] for g in genders)
    shares = {g: total * sizes[g] / weight for g in genders}
    result = {g: int(shares[g]) for g in genders}
    remainder = total - sum(result.values())
    for g in sorted(genders, key=lambda g: shares[g] - result[g], reverse=True)[:remainder]:
        result[g] += 1
    return result


def _draw_probe(rng: np.random.Generator, group: np.ndarray, attempts: int = 1000) -> np.ndarray:
    for _ in range(attempts):
        i, j = rng.choice(group.shape[0], size=2, replace=False)
        alpha = float(rng.uniform())
        try:
            return slerp(group[int(i)], group[int(j)], alpha)
        except AntipodalPair:
            continue  # pathological draw; redraw deterministically
    raise AntipodalPair(f"could not draw a probe in {attempts} attempts")


def _nearest_distances(probes: np.ndarray, bank: np.ndarray) -> np.ndarray:
    distances = (1.0 - probes @ bank.T).min(axis=1)
    # below double-precision resolution of 1 - dot: the probe hit a bank
    # vector exactly, report 0 rather than rounding residue
    distances[distances < 1e-12] = 0.0
    return distances


# -- plot-data serialization ----------------------------------------------------

def format_projection(result: ProjectionResult) -> str:
    lines = [PROJECTION_HEADER]
    for point in result.points:
        lines.append(f"{point.id}\t{point.kind}\t{point.x:.17g}\t{point.y:.17g}")
    return "\n".join(lines) + "\n"


def format_histogram(histogram: SimilarityHistogram) -> str:
    lines = [HISTOGRAM_HEADER]
    for lo, hi, count in zip(histogram.bin_edges[:-1], histogram.bin_edges[1:], histogram.counts):
        lines.append(f"{lo:.17g}\t{hi:.17g}\t{int(count)}")
    return "\n".join(lines) + "\n"


def format_coverage(report: CoverageReport) -> str:
    return (
        f"probe_count = {report.probe_count}\n"
        f"before_mean = {report.before_mean:.17g}\n"
        f"after_mean = {report.after_mean:.17g}\n"
        f"gain = {report.gain:.17g}\n"
    )
