"""Pair planning: neighbor tables against brute force, both strategies
against their invariants, and the layered traversal against the naive
set-theoretic reference."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from naive_planner import naive_nn_pair_set, naive_ranked_neighbors
from voxpand.core import Gender, SpeakerEmbedding
from voxpand.errors import (
    GroupTooSmall,
    InputError,
    TargetExceedsCapacity,
    UnknownIdentity,
)
from voxpand.planner import (
    EmbeddingSet,
    build_neighbor_tables,
    execute_plan,
    pair_capacity,
    parse_pair_plan,
    format_pair_plan,
    plan_pairs_nearest_neighbor,
    plan_pairs_random,
    split_total,
)


def make_set(vectors, gender=Gender.MALE, prefix="spk"):
    records = [
        SpeakerEmbedding.from_raw(f"{prefix}{i:03d}", gender, v)
        for i, v in enumerate(vectors)
    ]
    return EmbeddingSet(records)


def random_set(rng, count, dim, gender=Gender.MALE, prefix="spk"):
    vectors = rng.standard_normal((count, dim))
    return make_set(vectors, gender=gender, prefix=prefix)


def circle_points(degrees):
    return [
        [math.cos(math.radians(d)), math.sin(math.radians(d))] for d in degrees
    ]


class TestEmbeddingSet:
    def test_gender_index_partitions(self):
        records = [
            SpeakerEmbedding.from_raw("m0", Gender.MALE, [1.0, 0.0]),
            SpeakerEmbedding.from_raw("f0", Gender.FEMALE, [0.0, 1.0]),
            SpeakerEmbedding.from_raw("m1", Gender.MALE, [1.0, 1.0]),
        ]
        s = EmbeddingSet(records)
        assert s.gender_positions(Gender.MALE) == (0, 2)
        assert s.gender_positions(Gender.FEMALE) == (1,)
        assert s.dimension == 2

    def test_duplicate_id_rejected(self):
        records = [
            SpeakerEmbedding.from_raw("a", Gender.MALE, [1.0, 0.0]),
            SpeakerEmbedding.from_raw("a", Gender.MALE, [0.0, 1.0]),
        ]
        with pytest.raises(InputError):
            EmbeddingSet(records)

    def test_unknown_identity(self):
        s = make_set([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(UnknownIdentity):
            s.get("nope")


class TestNeighborTables:
    def test_three_distinct_vectors(self):
        # Positions on a quarter arc; brute-force distance ordering.
        s = make_set(circle_points([0, 30, 80]))
        tables = {t.owner_id: t for t in build_neighbor_tables(s, Gender.MALE, 2)}
        assert [n for n, _ in tables["spk000"].ranked_neighbors] == ["spk001", "spk002"]
        assert [n for n, _ in tables["spk001"].ranked_neighbors] == ["spk000", "spk002"]
        assert [n for n, _ in tables["spk002"].ranked_neighbors] == ["spk001", "spk000"]
        for table in tables.values():
            distances = [d for _, d in table.ranked_neighbors]
            assert distances == sorted(distances)

    def test_group_too_small(self):
        s = make_set([[1.0, 0.0]])
        with pytest.raises(GroupTooSmall):
            build_neighbor_tables(s, Gender.MALE, 1)

    def test_max_rank_out_of_range(self):
        s = make_set(circle_points([0, 10, 20]))
        with pytest.raises(ValueError):
            build_neighbor_tables(s, Gender.MALE, 3)

    def test_tie_break_by_id(self):
        # Two neighbors at identical distance: lexicographically smaller id wins.
        s = make_set(circle_points([0, 15, -15]))
        tables = {t.owner_id: t for t in build_neighbor_tables(s, Gender.MALE, 2)}
        assert [n for n, _ in tables["spk000"].ranked_neighbors] == ["spk001", "spk002"]

    def test_matches_brute_force_512(self):
        rng = np.random.default_rng(42)
        s = random_set(rng, 512, 8)
        tables = build_neighbor_tables(s, Gender.MALE, 10)
        ids = [r.id for r in s.records]
        vectors = [r.vector for r in s.records]
        oracle = naive_ranked_neighbors(ids, vectors)
        for table in tables:
            expected = [n for n, _ in oracle[table.owner_id][:10]]
            assert [n for n, _ in table.ranked_neighbors] == expected


class TestRandomPlan:
    def test_exhaustive_three(self):
        s = make_set(circle_points([0, 40, 90]))
        plan = plan_pairs_random(s, {Gender.MALE: 3}, seed=5)
        assert plan.unordered_keys() == {
            ("spk000", "spk001"),
            ("spk000", "spk002"),
            ("spk001", "spk002"),
        }
        assert plan.target_count == 3
        assert plan.max_level_reached == 0

    def test_capacity_exceeded(self):
        s = make_set(circle_points([0, 40]))
        with pytest.raises(TargetExceedsCapacity):
            plan_pairs_random(s, {Gender.MALE: 2}, seed=5)

    def test_deterministic_and_seed_sensitive(self):
        rng = np.random.default_rng(0)
        s = random_set(rng, 40, 6)
        plans = [plan_pairs_random(s, {Gender.MALE: 30}, seed=9) for _ in range(3)]
        assert plans[0].pairs == plans[1].pairs == plans[2].pairs
        other = plan_pairs_random(s, {Gender.MALE: 30}, seed=10)
        assert other.pairs != plans[0].pairs

    def test_uniqueness_and_orientation(self):
        rng = np.random.default_rng(1)
        s = random_set(rng, 60, 5)
        plan = plan_pairs_random(s, {Gender.MALE: pair_capacity(60) // 2}, seed=3)
        keys = plan.unordered_keys()
        assert len(keys) == len(plan.pairs)
        assert all(p.id_a < p.id_b for p in plan.pairs)

    def test_gender_isolation(self):
        # Adding a female group must not perturb the male plan.
        rng = np.random.default_rng(2)
        males = [
            SpeakerEmbedding.from_raw(f"m{i}", Gender.MALE, v)
            for i, v in enumerate(rng.standard_normal((20, 4)))
        ]
        females = [
            SpeakerEmbedding.from_raw(f"f{i}", Gender.FEMALE, v)
            for i, v in enumerate(rng.standard_normal((10, 4)))
        ]
        male_only = plan_pairs_random(EmbeddingSet(males), {Gender.MALE: 15}, seed=8)
        both = plan_pairs_random(
            EmbeddingSet(males + females), {Gender.MALE: 15, Gender.FEMALE: 5}, seed=8
        )
        male_pairs_in_both = [p for p in both.pairs if p.id_a.startswith("m")]
        assert male_pairs_in_both == male_only.pairs


class TestNearestNeighborPlan:
    def test_two_tight_clusters_on_circle(self):
        # 0 and 10 degrees are mutual nearest neighbors, as are 180 and 190;
        # level 1 supplies exactly the two pairs, no expansion needed.
        s = make_set(circle_points([0, 10, 180, 190]))
        plan = plan_pairs_nearest_neighbor(s, {Gender.MALE: 2}, seed=0)
        assert plan.unordered_keys() == {
            ("spk000", "spk001"),
            ("spk002", "spk003"),
        }
        assert plan.max_level_reached == 1

    def test_exhaustive_reaches_last_level(self):
        rng = np.random.default_rng(4)
        n = 12
        s = random_set(rng, n, 4)
        plan = plan_pairs_nearest_neighbor(s, {Gender.MALE: pair_capacity(n)}, seed=1)
        assert len(plan.pairs) == pair_capacity(n)
        assert len(plan.unordered_keys()) == pair_capacity(n)
        assert plan.max_level_reached == n - 1

    def test_capacity_and_group_size_errors(self):
        s = make_set(circle_points([0, 40, 80]))
        with pytest.raises(TargetExceedsCapacity):
            plan_pairs_nearest_neighbor(s, {Gender.MALE: 4}, seed=0)
        lone = make_set([[1.0, 0.0]])
        with pytest.raises(GroupTooSmall):
            plan_pairs_nearest_neighbor(lone, {Gender.MALE: 1}, seed=0)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        s = random_set(rng, 64, 8)
        plans = [plan_pairs_nearest_neighbor(s, {Gender.MALE: 90}, seed=17) for _ in range(3)]
        assert plans[0].pairs == plans[1].pairs == plans[2].pairs

    def test_level_monotonicity(self):
        # Every admitted pair is rank <= final level for at least one
        # orientation, and every pair of strictly lower min-rank than the
        # final level is admitted (lower levels are never skipped).
        rng = np.random.default_rng(6)
        s = random_set(rng, 48, 6)
        target = 100
        plan = plan_pairs_nearest_neighbor(s, {Gender.MALE: target}, seed=2)
        ids = [r.id for r in s.records]
        vectors = [r.vector for r in s.records]
        ranked = naive_ranked_neighbors(ids, vectors)
        rank_of = {
            anchor: {other: r + 1 for r, (other, _) in enumerate(neighbors)}
            for anchor, neighbors in ranked.items()
        }
        keys = plan.unordered_keys()
        k = plan.max_level_reached
        for a, b in keys:
            assert min(rank_of[a][b], rank_of[b][a]) <= k
        for a in ids:
            for b in ids:
                if a < b and min(rank_of[a][b], rank_of[b][a]) <= k - 1:
                    assert (a, b) in keys

    @pytest.mark.parametrize("case", range(12))
    def test_matches_naive_oracle(self, case):
        rng = np.random.default_rng(100 + case)
        size = int(rng.integers(4, 120))
        dim = int(rng.integers(3, 24))
        capacity = pair_capacity(size)
        target = int(rng.integers(1, capacity + 1))
        seed = int(rng.integers(0, 2**32))
        s = random_set(rng, size, dim)
        plan = plan_pairs_nearest_neighbor(s, {Gender.MALE: target}, seed=seed)
        ids = [r.id for r in s.records]
        vectors = [r.vector for r in s.records]
        expected, level = naive_nn_pair_set(ids, vectors, target, seed, Gender.MALE.value)
        assert plan.unordered_keys() == expected
        assert plan.max_level_reached == level

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_invariants_property(self, seed):
        rng = np.random.default_rng(seed)
        size = int(rng.integers(4, 40))
        target = int(rng.integers(1, pair_capacity(size) + 1))
        s = random_set(rng, size, 4)
        plan = plan_pairs_nearest_neighbor(s, {Gender.MALE: target}, seed=seed)
        assert len(plan.pairs) == target
        assert len(plan.unordered_keys()) == target
        assert all(p.id_a < p.id_b for p in plan.pairs)


class TestCapacityLaw:
    @pytest.mark.parametrize("strategy", [plan_pairs_random, plan_pairs_nearest_neighbor])
    def test_exact_capacity_succeeds_plus_one_fails(self, strategy):
        rng = np.random.default_rng(12)
        n = 9
        s = random_set(rng, n, 3)
        capacity = pair_capacity(n)
        plan = strategy(s, {Gender.MALE: capacity}, seed=0)
        assert len(plan.pairs) == capacity
        with pytest.raises(TargetExceedsCapacity):
            strategy(s, {Gender.MALE: capacity + 1}, seed=0)


class TestExecutePlan:
    def test_empty_plan(self):
        s = make_set(circle_points([0, 10]))
        plan = plan_pairs_random(s, {Gender.MALE: 0}, seed=0)
        assert execute_plan(s, plan) == []

    def test_midpoint_angles(self):
        s = make_set(circle_points([0, 60]))
        plan = plan_pairs_random(s, {Gender.MALE: 1}, seed=0)
        [syn] = execute_plan(s, plan)
        theta = math.radians(60)
        for parent in ("spk000", "spk001"):
            cos = float(np.dot(syn.vector, s.get(parent).vector))
            assert math.acos(cos) == pytest.approx(theta / 2, abs=1e-9)
        assert syn.id == "syn-random-male-000000"
        assert syn.alpha == 0.5

    def test_alpha_override(self):
        s = make_set(circle_points([0, 90]))
        plan = plan_pairs_random(s, {Gender.MALE: 1}, seed=0)
        [syn] = execute_plan(s, plan, alpha_policy=0.0)
        a, b = sorted([plan.pairs[0].id_a, plan.pairs[0].id_b])
        np.testing.assert_array_equal(syn.vector, s.get(a).vector)

    def test_unknown_identity(self):
        s = make_set(circle_points([0, 10, 20]))
        plan = plan_pairs_random(s, {Gender.MALE: 1}, seed=0)
        smaller = make_set(circle_points([0, 10]))
        plan.pairs[0] = type(plan.pairs[0])("spk000", "spk999", 0.5)
        with pytest.raises(UnknownIdentity):
            execute_plan(smaller, plan)

    def test_order_matches_plan(self):
        rng = np.random.default_rng(13)
        s = random_set(rng, 10, 4)
        plan = plan_pairs_nearest_neighbor(s, {Gender.MALE: 6}, seed=4)
        out = execute_plan(s, plan)
        assert [(o.parent_a, o.parent_b) for o in out] == [
            (p.id_a, p.id_b) for p in plan.pairs
        ]
        assert [o.id for o in out] == [f"syn-nearest_neighbor-male-{i:06d}" for i in range(6)]


class TestSplitTotal:
    def test_proportional_table_counts(self):
        out = split_total(5994, {Gender.MALE: 3682, Gender.FEMALE: 2312}, "proportional")
        assert out == {Gender.MALE: 3682, Gender.FEMALE: 2312}

    def test_even(self):
        out = split_total(40000, {Gender.MALE: 3682, Gender.FEMALE: 2312}, "even")
        assert out == {Gender.MALE: 20000, Gender.FEMALE: 20000}

    def test_remainder_goes_to_largest_share(self):
        out = split_total(5, {Gender.MALE: 2, Gender.FEMALE: 1}, "proportional")
        assert out[Gender.MALE] + out[Gender.FEMALE] == 5
        assert out[Gender.MALE] == 3


class TestPlanFile:
    def roundtrip(self, plan, dim):
        text = format_pair_plan(plan, dim)
        parsed, parsed_dim = parse_pair_plan(text)
        assert parsed_dim == dim
        return parsed, format_pair_plan(parsed, parsed_dim), text

    def test_roundtrip_bit_exact(self):
        rng = np.random.default_rng(21)
        s = random_set(rng, 30, 7)
        plan = plan_pairs_nearest_neighbor(s, {Gender.MALE: 40}, seed=99)
        # exercise a full-precision alpha
        plan.pairs[0] = type(plan.pairs[0])(plan.pairs[0].id_a, plan.pairs[0].id_b, 0.1)
        parsed, second, first = self.roundtrip(plan, 7)
        assert second == first
        assert parsed.pairs == plan.pairs
        assert parsed.strategy == plan.strategy
        assert parsed.seed == plan.seed

    def test_rejects_garbage(self):
        with pytest.raises(InputError):
            parse_pair_plan("not a plan\n")
        with pytest.raises(InputError):
            parse_pair_plan("#pairplan v1 strategy=bogus seed=1 dim=2\n")
        with pytest.raises(InputError):
            parse_pair_plan("#pairplan v1 strategy=random seed=1 dim=2\nb\ta\t0.5\n")
