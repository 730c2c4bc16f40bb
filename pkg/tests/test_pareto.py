import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from contract_bo.core import DesignPoint, design_lattice, no_idle_tax
from contract_bo.pareto import (
    EvaluationError,
    NSGA2Config,
    ParetoFront,
    ScoredDesign,
    crowding_distance,
    dominance_matrix,
    exhaustive_front,
    non_dominated_sort,
    nsga2,
    pareto_mask,
)
from oracles import brute_force_front

objective_sets = arrays(np.float64, st.tuples(st.integers(1, 25), st.integers(1, 4)),
                        elements=st.floats(-3, 3).map(lambda v: round(v, 1)))


def bumpy(d: DesignPoint):
    a, n = d.alpha, d.n_added
    return (np.sin(7 * a) + 0.3 * n, np.cos(5 * a) - 0.2 * n, a * (1 - a) + 0.05 * (n % 2))


class TestSort:
    def test_single(self):
        assert non_dominated_sort(np.array([[1.0, 2.0]])) == [[0]]

    def test_two_chain(self):
        assert non_dominated_sort(np.array([[0.0, 0.0], [1.0, 1.0]])) == [[1], [0]]

    def test_equal_points_share_front(self):
        assert non_dominated_sort(np.array([[1.0, 1.0], [1.0, 1.0]])) == [[0, 1]]

    def test_accepts_scored_designs(self):
        pop = [ScoredDesign(DesignPoint(0.1, 0), (1, 0)), ScoredDesign(DesignPoint(0.2, 0), (0, 1))]
        assert non_dominated_sort(pop) == [[0, 1]]

    @given(objective_sets)
    def test_partition_and_ranks(self, F):
        fronts = non_dominated_sort(F)
        flat = sorted(i for f in fronts for i in f)
        assert flat == list(range(len(F)))
        assert sorted(fronts[0]) == brute_force_front(F)
        D = dominance_matrix(F)
        rank = {i: r for r, f in enumerate(fronts) for i in f}
        for i in range(len(F)):
            for j in range(len(F)):
                if D[i, j]:
                    assert rank[i] < rank[j]

    def test_fifty_random_points(self, rng):
        for _ in range(20):
            F = rng.normal(size=(50, 3))
            assert sorted(non_dominated_sort(F)[0]) == brute_force_front(F)
            assert np.flatnonzero(pareto_mask(F)).tolist() == brute_force_front(F)


class TestCrowding:
    def test_small_fronts_infinite(self):
        assert np.all(np.isinf(crowding_distance(np.array([[1.0, 2.0], [2.0, 1.0]]))))
        assert np.all(np.isinf(crowding_distance(np.array([[1.0, 2.0]]))))

    def test_collinear_middle(self):
        F = np.array([[0.0, 5.0], [0.5, 5.0], [1.0, 5.0]])
        d = crowding_distance(F)
        assert np.isinf(d[0]) and np.isinf(d[2])
        assert d[1] == pytest.approx(1.0)

    @given(objective_sets, st.randoms())
    def test_permutation_invariant(self, F, rnd):
        perm = list(range(len(F)))
        rnd.shuffle(perm)
        a = crowding_distance(F)
        b = crowding_distance(F[perm])
        np.testing.assert_array_equal(a[perm], b)


class TestFront:
    def test_rejects_non_finite(self):
        with pytest.raises(EvaluationError):
            ScoredDesign(DesignPoint(0.0, 0), (np.nan, 1.0))

    def test_csv(self, tmp_path):
        f = ParetoFront((ScoredDesign(DesignPoint(0.25, 1), (1.0, 2.0, 3.0)),))
        p = tmp_path / "front.csv"
        f.to_csv(p)
        f.to_csv(p, iteration=2)
        lines = p.read_text().splitlines()
        assert lines[0] == "iteration,alpha,n_added,obj0,obj1,obj2"
        assert lines[1] == "0,0.25,1,1.0,2.0,3.0"
        assert lines[2].startswith("2,0.25,1")


class TestNSGA2:
    def test_single_point_space(self):
        front = nsga2(lambda d: (d.alpha, -d.alpha), NSGA2Config(population_size=4, generations=3,
                                                                 max_added=0, alpha_grid_size=2, seed=1,
                                                                 repair=lambda d: DesignPoint(0.0, 0)))
        assert front.designs == [DesignPoint(0.0, 0)]

    def test_dominating_point_found(self):
        target = DesignPoint(0.37, 2)

        def f(d):
            dist = abs(d.alpha - target.alpha) + 0.3 * abs(d.n_added - target.n_added)
            return (-dist, -dist ** 2)

        front = nsga2(f, NSGA2Config(generations=20, seed=4))
        assert front.designs == [target]

    def test_reproducible(self):
        cfg = NSGA2Config(population_size=20, generations=10, seed=9)
        a, b = nsga2(bumpy, cfg), nsga2(bumpy, cfg)
        assert a == b

    def test_subset_of_true_front(self):
        def tradeoff(d):
            return (-(d.alpha - 0.3) ** 2 - d.n_added, -(d.alpha - 0.6) ** 2 - 0.5 * d.n_added)

        lattice = design_lattice(101, 3)
        true = set(exhaustive_front(tradeoff, lattice).designs)
        assert len(true) == 31
        for seed in range(3):
            got = nsga2(tradeoff, NSGA2Config(seed=seed))
            assert pareto_mask(got.objective_matrix()).all()
            assert set(got.designs) <= true
            assert len(set(got.designs) & true) >= 0.9 * len(true)

    def test_members_sorted_unique(self):
        got = nsga2(bumpy, NSGA2Config(population_size=30, generations=5, seed=2))
        assert got.designs == sorted(set(got.designs))

    def test_non_finite_propagates(self):
        with pytest.raises(EvaluationError):
            nsga2(lambda d: (np.inf, 0.0), NSGA2Config(population_size=4, generations=1))

    def test_exhaustive_flag(self):
        cfg = NSGA2Config(exhaustive=True, alpha_grid_size=11)
        assert nsga2(bumpy, cfg) == exhaustive_front(bumpy, design_lattice(11, 3))

    def test_repair_keeps_space(self):
        seen = []

        def f(d):
            seen.append(d)
            return bumpy(d)

        nsga2(f, NSGA2Config(population_size=20, generations=5, seed=0, repair=no_idle_tax))
        assert all(not (d.n_added == 0 and d.alpha > 0) for d in seen)

    def test_space_smaller_than_population(self):
        # 2 x 2 lattice with 8 slots: duplicates must not stall or crowd the front
        cfg = NSGA2Config(population_size=8, generations=3, max_added=1, alpha_grid_size=2, seed=5)
        assert nsga2(bumpy, cfg) == exhaustive_front(bumpy, design_lattice(2, 1))

    def test_continuous_alpha(self):
        got = nsga2(bumpy, NSGA2Config(population_size=20, generations=5, seed=0, alpha_grid_size=None))
        assert len(got) > 0
        assert pareto_mask(got.objective_matrix()).all()
