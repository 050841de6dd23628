"""Pair planning: which identity pairs get interpolated.

Two strategies produce a PairPlan deterministically under a seed. Random
planning draws unordered same-gender pairs uniformly without replacement.
Nearest-neighbor planning expands each identity's neighborhood level by
level: level n admits, for every anchor, its rank-n neighbor as a
candidate pair; new unique pairs accumulate until the target is met, and
an overshooting final level is down-sampled uniformly.

Determinism contract (shared with the verification oracle in the test
suite): neighbor ranks order by (cosine distance, id); candidate pairs at
a level are collected over anchors in ascending id order and oriented
id_a < id_b; each gender group uses its own generator seeded by
``seeds.gender_group_seed``; an overshooting final level is down-sampled
via ``rng.choice(len(candidates), needed, replace=False)`` over that
canonical candidate order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import Gender, SpeakerEmbedding, SyntheticIdentity, interpolate_identity
from .errors import (
    DimensionMismatch,
    DuplicateIdentity,
    GroupTooSmall,
    InputError,
    TargetExceedsCapacity,
    UnknownIdentity,
)
from .seeds import gender_group_seed

DEFAULT_ALPHA = 0.5

Strategy = str  # "random" | "nearest_neighbor"
STRATEGIES = ("random", "nearest_neighbor")


class EmbeddingSet:
    """An indexed, gender-partitioned collection of speaker embeddings.

    Records keep their insertion order; ids are unique; all vectors share
    one dimension. The stacked float64 matrix view is built lazily and
    shared read-only by the planners and diagnostics.
    """

    def __init__(self, records: Iterable[SpeakerEmbedding], dimension: int | None = None):
        self.records: tuple[SpeakerEmbedding, ...] = tuple(records)
        if not self.records:
            if dimension is None:
                raise ValueError("an empty EmbeddingSet needs an explicit dimension")
            self.dimension = int(dimension)
        else:
            self.dimension = int(dimension) if dimension is not None else self.records[0].vector.shape[0]
        self._positions: dict[str, int] = {}
        gender_index: dict[Gender, list[int]] = {}
        for pos, rec in enumerate(self.records):
            if rec.vector.shape[0] != self.dimension:
                raise DimensionMismatch(
                    f"record {rec.id!r} has dimension {rec.vector.shape[0]}, set declares {self.dimension}"
                )
            if rec.id in self._positions:
                raise DuplicateIdentity(f"duplicate identity id {rec.id!r}")
            self._positions[rec.id] = pos
            gender_index.setdefault(rec.gender, []).append(pos)
        self.gender_index: dict[Gender, tuple[int, ...]] = {
            g: tuple(v) for g, v in gender_index.items()
        }
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __contains__(self, identity_id: str) -> bool:
        return identity_id in self._positions

    def position(self, identity_id: str) -> int:
        try:
            return self._positions[identity_id]
        except KeyError:
            raise UnknownIdentity(f"identity {identity_id!r} not in set") from None

    def get(self, identity_id: str) -> SpeakerEmbedding:
        return self.records[self.position(identity_id)]

    @property
    def matrix(self) -> np.ndarray:
        """(n, dimension) float64 matrix of all record vectors."""
        if self._matrix is None:
            if self.records:
                self._matrix = np.ascontiguousarray(
                    np.stack([r.vector for r in self.records]), dtype=np.float64
                )
            else:
                self._matrix = np.empty((0, self.dimension), dtype=np.float64)
        return self._matrix

    def gender_positions(self, gender: Gender) -> tuple[int, ...]:
        return self.gender_index.get(gender, ())

    def gender_counts(self) -> dict[Gender, int]:
        return {g: len(self.gender_index.get(g, ())) for g in Gender}


@dataclass(frozen=True)
class NeighborTable:
    """Per-anchor ranked same-gender neighbors, nearest first."""

    owner_id: str
    ranked_neighbors: tuple[tuple[str, float], ...]


class PlannedPair(tuple):
    """(id_a, id_b, alpha) with id_a < id_b lexicographically."""

    __slots__ = ()

    def __new__(cls, id_a: str, id_b: str, alpha: float):
        return super().__new__(cls, (id_a, id_b, float(alpha)))

    @property
    def id_a(self) -> str:
        return self[0]

    @property
    def id_b(self) -> str:
        return self[1]

    @property
    def alpha(self) -> float:
        return self[2]


@dataclass
class PairPlan:
    """Ordered interpolation work list plus the provenance to rebuild it."""

    strategy: Strategy
    seed: int
    pairs: list[PlannedPair]
    target_count: int
    max_level_reached: int = 0

    def unordered_keys(self) -> set[tuple[str, str]]:
        return {(p.id_a, p.id_b) for p in self.pairs}


def pair_capacity(group_size: int) -> int:
    """C(n, 2): number of unordered pairs a group can supply."""
    return group_size * (group_size - 1) // 2


def _canonical(id_x: str, id_y: str) -> tuple[str, str]:
    return (id_x, id_y) if id_x < id_y else (id_y, id_x)


def _sorted_genders(targets: Mapping[Gender, int]) -> list[Gender]:
    # Canonical gender order keeps multi-gender plans stable regardless of
    # the mapping's insertion order.
    known = [g for g in Gender if g in targets]
    extras = [g for g in targets if g not in Gender]
    if extras:
        raise InputError(f"unsupported gender labels in targets: {extras!r}")
    return known


def _group_ids_and_matrix(set_: EmbeddingSet, gender: Gender) -> tuple[list[str], np.ndarray]:
    positions = set_.gender_positions(gender)
    ids = [set_.records[p].id for p in positions]
    matrix = set_.matrix[list(positions)] if positions else np.empty((0, set_.dimension))
    return ids, matrix


def _ranked_neighbor_positions(matrix: np.ndarray, ids: Sequence[str], max_rank: int,
                               block: int = 1024) -> np.ndarray:
    """(m, max_rank) int32: within-group neighbor positions, rank 1..max_rank.

    Exact blocked dense evaluation; rows order by (cosine distance, id) so
    ties resolve identically everywhere.
    """
    m = matrix.shape[0]
    id_rank = np.empty(m, dtype=np.int64)
    id_rank[np.argsort(np.asarray(ids, dtype=object), kind="stable")] = np.arange(m)
    out = np.empty((m, max_rank), dtype=np.int32)
    for start in range(0, m, block):
        stop = min(start + block, m)
        dist = 1.0 - matrix[start:stop] @ matrix.T
        dist[np.arange(stop - start), np.arange(start, stop)] = np.inf  # exclude self
        keys_secondary = np.broadcast_to(id_rank, dist.shape)
        order = np.lexsort((keys_secondary, dist), axis=-1)
        out[start:stop] = order[:, :max_rank].astype(np.int32)
    return out


def build_neighbor_tables(set_: EmbeddingSet, gender: Gender, max_rank: int) -> list[NeighborTable]:
    """Ranked same-gender neighbor lists, one table per group member."""
    ids, matrix = _group_ids_and_matrix(set_, gender)
    m = len(ids)
    if m < 2:
        raise GroupTooSmall(f"gender group {gender.value!r} has {m} member(s), need >= 2")
    if not 1 <= max_rank <= m - 1:
        raise ValueError(f"max_rank must lie in [1, {m - 1}], got {max_rank}")
    ranked = _ranked_neighbor_positions(matrix, ids, max_rank)
    tables = []
    for pos, owner in enumerate(ids):
        neighbors = tuple(
            (ids[j], 1.0 - float(np.dot(matrix[pos], matrix[j]))) for j in ranked[pos]
        )
        tables.append(NeighborTable(owner_id=owner, ranked_neighbors=neighbors))
    return tables


def plan_pairs_random(
    set_: EmbeddingSet,
    per_gender_targets: Mapping[Gender, int],
    seed: int,
    alpha: float = DEFAULT_ALPHA,
) -> PairPlan:
    """Uniform same-gender pairs without replacement, per gender group."""
    pairs: list[PlannedPair] = []
    for gender in _sorted_genders(per_gender_targets):
        target = int(per_gender_targets[gender])
        if target == 0:
            continue
        ids, _ = _group_ids_and_matrix(set_, gender)
        m = len(ids)
        capacity = pair_capacity(m)
        if target > capacity:
            raise TargetExceedsCapacity(
                f"gender {gender.value!r}: requested {target} pairs, "
                f"group of {m} supplies at most {capacity}"
            )
        rng = np.random.default_rng(gender_group_seed(seed, gender.value))
        chosen = rng.choice(capacity, size=target, replace=False)
        for i, j in zip(*_unrank_pairs(chosen, m)):
            a, b = _canonical(ids[int(i)], ids[int(j)])
            pairs.append(PlannedPair(a, b, alpha))
    return PairPlan(
        strategy="random",
        seed=int(seed),
        pairs=pairs,
        target_count=len(pairs),
        max_level_reached=0,
    )


def _unrank_pairs(linear: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Decode linear indices in [0, C(m,2)) to (i, j) with i < j."""
    # starts[i] = number of pairs whose first element precedes i
    firsts = np.arange(m, dtype=np.int64)
    starts = np.concatenate(([0], np.cumsum(m - 1 - firsts[:-1])))
    i = np.searchsorted(starts, linear, side="right") - 1
    j = linear - starts[i] + i + 1
    return i, j


def plan_pairs_nearest_neighbor(
    set_: EmbeddingSet,
    per_gender_targets: Mapping[Gender, int],
    seed: int,
    alpha: float = DEFAULT_ALPHA,
) -> PairPlan:
    """Layered neighborhood traversal with a uniqueness constraint.

    Level n contributes, for each anchor, the unordered pair with its
    rank-n neighbor; levels grow until the per-gender target is met, and
    an overshooting final level is down-sampled uniformly under the
    group's seeded generator.
    """
    pairs: list[PlannedPair] = []
    max_level = 0
    for gender in _sorted_genders(per_gender_targets):
        target = int(per_gender_targets[gender])
        if target == 0:
            continue
        ids, matrix = _group_ids_and_matrix(set_, gender)
        m = len(ids)
        if m < 2:
            raise GroupTooSmall(f"gender group {gender.value!r} has {m} member(s), need >= 2")
        capacity = pair_capacity(m)
        if target > capacity:
            raise TargetExceedsCapacity(
                f"gender {gender.value!r}: requested {target} pairs, "
                f"group of {m} supplies at most {capacity}"
            )
        group_pairs, level = _traverse_group(ids, matrix, target, gender_group_seed(seed, gender.value), alpha)
        pairs.extend(group_pairs)
        max_level = max(max_level, level)
    return PairPlan(
        strategy="nearest_neighbor",
        seed=int(seed),
        pairs=pairs,
        target_count=len(pairs),
        max_level_reached=max_level,
    )


def _traverse_group(
    ids: Sequence[str],
    matrix: np.ndarray,
    target: int,
    group_seed: int,
    alpha: float,
) -> tuple[list[PlannedPair], int]:
    m = len(ids)
    anchor_order = sorted(range(m), key=lambda p: ids[p])
    rng = np.random.default_rng(group_seed)

    # Neighbor ranks materialize lazily: start shallow, double on demand.
    max_rank = min(m - 1, 4)
    ranked = _ranked_neighbor_positions(matrix, ids, max_rank)

    selected: set[tuple[str, str]] = set()
    out: list[PlannedPair] = []
    level = 0
    while len(out) < target:
        level += 1
        if level > max_rank:
            max_rank = min(m - 1, max_rank * 2)
            ranked = _ranked_neighbor_positions(matrix, ids, max_rank)
        new: list[tuple[str, str]] = []
        for pos in anchor_order:
            key = _canonical(ids[pos], ids[int(ranked[pos, level - 1])])
            if key not in selected:
                selected.add(key)
                new.append(key)
        needed = target - len(out)
        if len(new) > needed:
            # Final level overshoots: down-sample the remainder uniformly.
            chosen = rng.choice(len(new), size=needed, replace=False)
            new = [new[int(k)] for k in chosen]
        out.extend(PlannedPair(a, b, alpha) for a, b in new)
    return out, level


def execute_plan(
    set_: EmbeddingSet,
    plan: PairPlan,
    alpha_policy: float | None = None,
) -> list[SyntheticIdentity]:
    """Interpolate every planned pair, in plan order.

    ``alpha_policy`` overrides the per-pair coefficients when given;
    otherwise each pair's stored alpha applies.
    """
    namer = SyntheticIdGenerator(plan.strategy)
    out: list[SyntheticIdentity] = []
    for pair in plan.pairs:
        a = set_.get(pair.id_a)
        b = set_.get(pair.id_b)
        alpha = pair.alpha if alpha_policy is None else float(alpha_policy)
        out.append(interpolate_identity(a, b, alpha, lambda: namer.next_id(a.gender)))
    return out


class SyntheticIdGenerator:
    """``syn-<strategy>-<gender>-<seq>`` ids; zero-padded per-gender sequence.

    The ``syn-`` prefix keeps generated ids disjoint from any real corpus.
    """

    def __init__(self, strategy: Strategy):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}")
        self.strategy = strategy
        self._counters: dict[Gender, int] = {}

    def next_id(self, gender: Gender) -> str:
        seq = self._counters.get(gender, 0)
        self._counters[gender] = seq + 1
        return f"syn-{self.strategy}-{gender.value}-{seq:06d}"


def split_total(
    total: int,
    gender_counts: Mapping[Gender, int],
    policy: str = "proportional",
) -> dict[Gender, int]:
    """Split one total target into per-gender targets.

    ``proportional`` mirrors the real per-gender identity counts;
    ``even`` divides equally. Remainders go to genders with the largest
    fractional share, ties in canonical gender order.
    """
    if total < 0:
        raise ValueError("total must be non-negative")
    genders = [g for g in Gender if gender_counts.get(g, 0) > 0]
    if not genders:
        raise GroupTooSmall("no non-empty gender groups to allocate targets across")
    if policy == "proportional":
        weights = {g: gender_counts[g] for g in genders}
    elif policy == "even":
        weights = {g: 1 for g in genders}
    else:
        raise ValueError(f"unknown split policy {policy!r}")
    weight_sum = sum(weights.values())
    shares = {g: total * weights[g] / weight_sum for g in genders}
    result = {g: math.floor(shares[g]) for g in genders}
    remainder = total - sum(result.values())
    by_fraction = sorted(genders, key=lambda g: shares[g] - result[g], reverse=True)
    for g in by_fraction[:remainder]:
        result[g] += 1
    return result


# -- plan file format ---------------------------------------------------------

PLAN_HEADER_PREFIX = "#pairplan v1"


def format_pair_plan(plan: PairPlan, dimension: int) -> str:
    """Line-delimited plan text; alpha keeps 17 significant digits."""
    lines = [f"{PLAN_HEADER_PREFIX} strategy={plan.strategy} seed={plan.seed} dim={dimension}"]
    for pair in plan.pairs:
        lines.append(f"{pair.id_a}\t{pair.id_b}\t{pair.alpha:.17g}")
    return "\n".join(lines) + "\n"


def write_pair_plan(path, plan: PairPlan, dimension: int) -> None:
    from .bank import _write_text  # local import avoids a cycle

    _write_text(path, format_pair_plan(plan, dimension))


def parse_pair_plan(text: str) -> tuple[PairPlan, int]:
    """Inverse of format_pair_plan; returns (plan, dimension).

    The header does not carry max_level_reached, so it reads back as 0.
    """
    lines = text.splitlines()
    if not lines or not lines[0].startswith(PLAN_HEADER_PREFIX):
        raise InputError("not a pair-plan file: missing '#pairplan v1' header")
    header = lines[0][len(PLAN_HEADER_PREFIX):].split()
    fields = dict(item.split("=", 1) for item in header if "=" in item)
    try:
        strategy = fields["strategy"]
        seed = int(fields["seed"])
        dimension = int(fields["dim"])
    except (KeyError, ValueError) as exc:
        raise InputError(f"malformed pair-plan header: {lines[0]!r}") from exc
    if strategy not in STRATEGIES:
        raise InputError(f"unknown plan strategy {strategy!r}")
    pairs: list[PlannedPair] = []
    seen: set[tuple[str, str]] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise InputError(f"pair-plan line {lineno}: expected 3 tab-separated fields")
        id_a, id_b, alpha_text = parts
        if not id_a < id_b:
            raise InputError(f"pair-plan line {lineno}: pair not canonically oriented")
        if (id_a, id_b) in seen:
            raise InputError(f"pair-plan line {lineno}: duplicate pair {id_a!r}, {id_b!r}")
        seen.add((id_a, id_b))
        try:
            alpha = float(alpha_text)
        except ValueError as exc:
            raise InputError(f"pair-plan line {lineno}: bad alpha {alpha_text!r}") from exc
        if not 0.0 <= alpha <= 1.0:
            raise InputError(f"pair-plan line {lineno}: alpha {alpha} outside [0, 1]")
        pairs.append(PlannedPair(id_a, id_b, alpha))
    plan = PairPlan(
        strategy=strategy,
        seed=seed,
        pairs=pairs,
        target_count=len(pairs),
        max_level_reached=0,
    )
    return plan, dimension


def read_pair_plan(path) -> tuple[PairPlan, int]:
    from .bank import _read_text

    return parse_pair_plan(_read_text(path))
