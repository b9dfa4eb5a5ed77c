import numpy as np
import pytest

from sstp import BaselineConfig, ContractError, select_herding, select_kmeans, select_random


def ids_for(n):
    return [f"s{i}" for i in range(n)]


class TestRandom:
    def test_full_budget_returns_everything(self):
        ids = ids_for(6)
        assert sorted(select_random(ids, 6, seed=0)) == sorted(ids)

    def test_deterministic(self):
        ids = ids_for(20)
        assert select_random(ids, 7, seed=3) == select_random(ids, 7, seed=3)

    def test_budget_overflow(self):
        with pytest.raises(ContractError):
            select_random(ids_for(3), 4, seed=0)

    def test_uniform_inclusion_frequency(self):
        ids = ids_for(10)
        counts = {i: 0 for i in ids}
        trials = 1000
        for seed in range(trials):
            for picked in select_random(ids, 5, seed=seed):
                counts[picked] += 1
        for i in ids:
            assert abs(counts[i] / trials - 0.5) <= 0.05


class TestKmeans:
    def test_two_separated_clouds_one_rep_each(self):
        rng = np.random.default_rng(0)
        cloud_a = rng.normal(0, 1, size=(20, 2))
        cloud_b = rng.normal(0, 1, size=(20, 2)) + np.array([100.0, 0.0])
        feats = np.vstack([cloud_a, cloud_b])
        ids = ids_for(40)
        picked = select_kmeans(feats, ids, 2, BaselineConfig(method="kmeans", seed=1))
        indices = [int(p[1:]) for p in picked]
        assert sum(i < 20 for i in indices) == 1
        assert sum(i >= 20 for i in indices) == 1

    def test_full_budget_returns_everything(self):
        feats = np.random.default_rng(1).normal(size=(5, 3))
        assert select_kmeans(feats, ids_for(5), 5, BaselineConfig(method="kmeans")) == ids_for(5)

    def test_duplicated_points_get_distinct_representatives(self):
        base = np.array([[0.0, 0.0], [50.0, 0.0], [0.0, 50.0]])
        feats = np.repeat(base, 2, axis=0)  # every vector twice
        ids = ids_for(6)
        picked = select_kmeans(feats, ids, 3, BaselineConfig(method="kmeans", seed=2))
        vectors = {tuple(feats[int(p[1:])]) for p in picked}
        assert len(vectors) == 3

    def test_deterministic(self):
        feats = np.random.default_rng(5).normal(size=(30, 4))
        cfg = BaselineConfig(method="kmeans", seed=9)
        assert select_kmeans(feats, ids_for(30), 10, cfg) == select_kmeans(feats, ids_for(30), 10, cfg)

    def test_budget_overflow(self):
        with pytest.raises(ContractError):
            select_kmeans(np.zeros((2, 2)), ids_for(2), 3, BaselineConfig(method="kmeans"))


class TestHerding:
    def test_picks_the_mean_point(self):
        feats = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 0.0]])
        assert select_herding(feats, ids_for(3), 1) == ["s2"]

    def test_full_budget_returns_everything(self):
        feats = np.random.default_rng(2).normal(size=(4, 2))
        assert sorted(select_herding(feats, ids_for(4), 4)) == ids_for(4)

    def test_total_tie_takes_lowest_indices_in_order(self):
        feats = np.ones((5, 3))
        assert select_herding(feats, ids_for(5), 3) == ["s0", "s1", "s2"]

    def test_tracks_the_full_mean(self):
        rng = np.random.default_rng(7)
        feats = rng.normal(size=(50, 4))
        picked = select_herding(feats, ids_for(50), 25)
        chosen = feats[[int(p[1:]) for p in picked]]
        full_mean = feats.mean(axis=0)
        random_mean_err = np.linalg.norm(feats[:25].mean(axis=0) - full_mean)
        assert np.linalg.norm(chosen.mean(axis=0) - full_mean) <= random_mean_err

    def test_budget_overflow(self):
        with pytest.raises(ContractError):
            select_herding(np.zeros((2, 2)), ids_for(2), 5)


class TestContracts:
    def test_exactly_budget_unique_ids(self):
        rng = np.random.default_rng(11)
        feats = rng.normal(size=(25, 3))
        ids = ids_for(25)
        for picked in (
            select_random(ids, 10, seed=4),
            select_kmeans(feats, ids, 10, BaselineConfig(method="kmeans", seed=4)),
            select_herding(feats, ids, 10),
        ):
            assert len(picked) == 10
            assert len(set(picked)) == 10
            assert set(picked) <= set(ids)

    def test_bad_method_rejected(self):
        with pytest.raises(ContractError):
            BaselineConfig(method="magic").validate()
