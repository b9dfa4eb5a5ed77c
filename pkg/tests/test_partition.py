import numpy as np
import pytest

from sstp import (
    ContractError,
    DataFormatError,
    FeatureRecord,
    FeatureSet,
    Provenance,
    SelectionResult,
    assemble,
    dynamic_budget,
    partition,
    read_selection,
    select_baseline,
    select_sstp,
    total_budget,
    write_selection,
)
from sstp.partitioning import PartitionPlan, Bucket, partition_pairs


def feature_set(densities, dim=2, seed=0):
    rng = np.random.default_rng(seed)
    records = tuple(
        FeatureRecord(f"s{i:04d}", d, rng.normal(size=dim)) for i, d in enumerate(densities)
    )
    return FeatureSet(records, dim)


def plan_from_sizes(sizes, tau=1):
    """PartitionPlan with the given bucket sizes and synthetic ids."""
    buckets = []
    for k, size in enumerate(sizes, start=1):
        ids = tuple(f"b{k}m{i}" for i in range(size))
        buckets.append(Bucket(k, k, k + tau, ids))
    return PartitionPlan(tau, 1, tuple(buckets))


class TestPartition:
    def test_single_bucket(self):
        plan = partition(feature_set([3, 3, 3]), tau=5)
        assert plan.num_buckets == 1
        assert plan.buckets[0].size == 3

    def test_three_densities_three_buckets(self):
        plan = partition(feature_set([2, 7, 12]), tau=5)
        assert plan.rho_min == 2
        assert [(b.lo, b.hi) for b in plan.buckets] == [(2, 7), (7, 12), (12, 17)]
        assert [b.size for b in plan.buckets] == [1, 1, 1]

    def test_wide_interval_degenerates_to_one_bucket(self):
        plan = partition(feature_set([4, 9, 14]), tau=11)
        assert plan.num_buckets == 1

    def test_empty_buckets_retained(self):
        plan = partition(feature_set([1, 1, 30]), tau=5)
        assert plan.num_buckets == 6
        assert [b.size for b in plan.buckets] == [2, 0, 0, 0, 0, 1]

    def test_empty_features_rejected(self):
        with pytest.raises(ContractError):
            partition(FeatureSet((), 2), tau=5)

    def test_bad_tau(self):
        with pytest.raises(ContractError):
            partition(feature_set([1]), tau=0)

    def test_partition_property_random(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            densities = rng.integers(1, 120, size=int(rng.integers(1, 60))).tolist()
            tau = int(rng.choice([5, 10, 20]))
            plan = partition_pairs([(f"i{i}", d) for i, d in enumerate(densities)], tau)
            # disjoint + covering
            assert plan.total == len(densities)
            seen = set()
            for b in plan.buckets:
                assert b.lo == plan.rho_min + (b.k - 1) * tau
                assert b.hi == b.lo + tau
                for m in b.member_ids:
                    assert m not in seen
                    seen.add(m)
                    d = densities[int(m[1:])]
                    assert b.lo <= d < b.hi
            assert len(seen) == len(densities)


class TestDynamicBudget:
    def test_full_retention_at_alpha_one(self):
        plan = plan_from_sizes([60, 40])  # top-heavy on purpose
        budgets = dynamic_budget(plan, 1.0)
        assert [n for _, n in budgets.per_bucket] == [60, 40]

    def test_hand_trace_budget_100(self):
        plan = plan_from_sizes([100, 50, 10])
        budgets = dynamic_budget(plan, 0.625)  # B = floor(0.625 * 160) = 100
        assert budgets.total_budget == 100
        assert dict(budgets.per_bucket) == {3: 10, 2: 45, 1: 45}

    def test_hand_trace_budget_10(self):
        plan = plan_from_sizes([1000, 1000, 1000])
        budgets = dynamic_budget(plan, 0.00334)  # B = floor(0.00334 * 3000) = 10
        assert budgets.total_budget == 10
        assert dict(budgets.per_bucket) == {3: 3, 2: 3, 1: 4}

    def test_floor_uses_exact_decimal_arithmetic(self):
        assert total_budget(0.3, 10) == 3
        assert total_budget(0.1, 30) == 3

    def test_alpha_bounds(self):
        plan = plan_from_sizes([5])
        for alpha in (0.0, -0.1, 1.5):
            with pytest.raises(ContractError):
                dynamic_budget(plan, alpha)

    def test_budget_safety_property(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            sizes = rng.integers(0, 200, size=int(rng.integers(1, 8))).tolist()
            if sum(sizes) == 0:
                sizes[0] = 1
            alpha = float(rng.uniform(0.01, 1.0))
            plan = plan_from_sizes(sizes)
            budgets = dynamic_budget(plan, alpha)
            total = sum(n for _, n in budgets.per_bucket)
            assert total <= budgets.total_budget or budgets.total_budget >= plan.total
            for k, n in budgets.per_bucket:
                assert 0 <= n <= sizes[k - 1]
            if sizes[0] >= budgets.total_budget:
                assert total == budgets.total_budget


class TestAssemble:
    def make(self):
        plan = plan_from_sizes([3, 2])
        budgets = dynamic_budget(plan, 0.6)  # B = 3
        return plan, budgets

    def test_assembles_in_reverse_bucket_order(self):
        plan, budgets = self.make()
        quotas = dict(budgets.per_bucket)
        sel = {
            2: list(plan.buckets[1].member_ids[: quotas[2]]),
            1: list(plan.buckets[0].member_ids[: quotas[1]]),
        }
        result = assemble(plan, budgets, sel, Provenance("sstp", 0.6, 1, 0))
        assert list(result.ids) == sel[2] + sel[1]

    def test_quota_violation(self):
        plan, budgets = self.make()
        sel = {2: list(plan.buckets[1].member_ids), 1: []}
        sel[1] = list(plan.buckets[0].member_ids)  # too many for bucket 1
        with pytest.raises(ContractError, match="budget"):
            assemble(plan, budgets, sel, Provenance("sstp", 0.6, 1, 0))

    def test_membership_violation(self):
        plan, budgets = self.make()
        quotas = dict(budgets.per_bucket)
        sel = {
            2: ["intruder"] * quotas[2] if quotas[2] else [],
            1: list(plan.buckets[0].member_ids[: quotas[1]]),
        }
        if quotas[2]:
            with pytest.raises(ContractError, match="not in bucket"):
                assemble(plan, budgets, sel, Provenance("sstp", 0.6, 1, 0))

    def test_full_retention_includes_everything(self):
        plan = plan_from_sizes([2, 2])
        budgets = dynamic_budget(plan, 1.0)
        sel = {k: list(plan.buckets[k - 1].member_ids) for k in (1, 2)}
        result = assemble(plan, budgets, sel, Provenance("sstp", 1.0, 1, 0))
        assert sorted(result.ids) == sorted(plan.buckets[0].member_ids + plan.buckets[1].member_ids)


class TestSelectionPipeline:
    def test_alpha_one_identity_every_method(self):
        fs = feature_set([2, 2, 7, 7, 12, 40, 41], seed=5)
        for method in ("sstp", "random", "kmeans", "herding"):
            if method == "sstp":
                result = select_sstp(fs, 1.0, 10)
            else:
                result = select_baseline(fs, method, 1.0, 10, seed=1)
            assert sorted(result.ids) == sorted(fs.scene_ids())

    def test_rebalances_toward_high_density(self):
        densities = [2] * 90 + [50] * 10
        fs = feature_set(densities, dim=4, seed=9)
        result = select_sstp(fs, 0.5, 10)
        dens = {r.scene_id: r.density for r in fs.records}
        high = sum(1 for i in result.ids if dens[i] >= 40)
        assert len(result.ids) == 50
        assert high / len(result.ids) >= 10 / 100

    def test_per_bucket_baseline_matches_sstp_sizes(self):
        densities = [2] * 40 + [30] * 10
        fs = feature_set(densities, dim=3, seed=2)
        a = select_sstp(fs, 0.5, 10)
        b = select_baseline(fs, "herding", 0.5, 10, per_bucket=True)
        sizes_a = {k: len(ids) for k, ids in a.per_bucket}
        sizes_b = {k: len(ids) for k, ids in b.per_bucket}
        assert sizes_a == sizes_b

    def test_sstp_deterministic(self):
        fs = feature_set([2] * 20 + [15] * 5, dim=3, seed=4)
        assert select_sstp(fs, 0.4, 5).ids == select_sstp(fs, 0.4, 5).ids


class TestSelectionFile:
    def test_round_trip(self, tmp_path):
        prov = Provenance("sstp", 0.5, 10, 7, "sha256:abc", "unknown")
        result = SelectionResult(("a", "b", "c"), prov)
        p = tmp_path / "sel.txt"
        write_selection(result, p)
        loaded = read_selection(p)
        assert loaded.ids == result.ids
        assert loaded.provenance == prov

    def test_header_carries_provenance(self, tmp_path):
        prov = Provenance("random", 0.25, 5, 3)
        p = tmp_path / "sel.txt"
        write_selection(SelectionResult(("x",), prov), p)
        header = p.read_text().splitlines()[0]
        for token in ("method=random", "alpha=0.25", "tau=5", "seed=3"):
            assert token in header

    def test_missing_header_rejected(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("a\nb\n")
        with pytest.raises(DataFormatError):
            read_selection(p)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ContractError):
            SelectionResult(("a", "a"), Provenance("sstp", 0.5, 10, 0))
