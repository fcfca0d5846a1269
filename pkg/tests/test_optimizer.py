import numpy as np
import pytest

from mmwshare import SimConfig
from mmwshare.coordination import validate_feasible
from mmwshare.optimizer import (
    FeasibilitySampler,
    InfeasibleError,
    InstanceTooLargeError,
    MonteCarloRateEvaluator,
    ObjectiveSpec,
    bcd_optimize,
    brute_force_oracle,
    closest_bs_baseline,
    serving_candidates,
    solve_A_step,
    solve_C_step,
    strongest_bs_association,
)
from mmwshare.rate_model import SurrogateRateEvaluator
from mmwshare.scenarios import toy_scenario
from mmwshare.topology import _assemble


def random_instance(seed, n_bs=2, n_ue=4, config=None):
    """Single-operator instance small enough for the exhaustive oracle."""
    config = config or SimConfig(num_realizations=10, max_budget=40.0)
    rng = np.random.default_rng(seed)
    bs_pos = rng.uniform(0, 140, (n_bs, 2))
    ue_pos = rng.uniform(0, 140, (n_ue, 2))
    topo = _assemble(
        1,
        bs_pos,
        np.ones(n_bs, dtype=int),
        ue_pos,
        np.ones(n_ue, dtype=int),
        config,
    )
    return topo, config


@pytest.fixture
def toy_spec(toy, config):
    return ObjectiveSpec(toy, config, SurrogateRateEvaluator(toy, config))


class TestAssociationHelpers:
    def test_closest_bs_toy(self, toy, config):
        A, C = closest_bs_baseline(toy, config)
        assert A[2, 5] == 1  # UE 6 goes to BS 3 despite BS 1 being closer
        assert np.array_equal(A, C)
        assert validate_feasible(A, C, toy, config) == []

    def test_closest_deterministic(self, toy, config):
        a1, _ = closest_bs_baseline(toy, config)
        a2, _ = closest_bs_baseline(toy, config)
        assert np.array_equal(a1, a2)

    def test_forced_single_bs(self):
        topo, config = random_instance(0, n_bs=1, n_ue=3)
        A, C = closest_bs_baseline(topo, config)
        assert np.all(A == 1)

    def test_strongest_feasible(self, toy, config):
        A = strongest_bs_association(toy, config)
        assert validate_feasible(A, A, toy, config) == []

    def test_capacity_overflow_respected(self):
        cfg = SimConfig(n_bs_antennas=2, num_realizations=5)
        topo, _ = random_instance(3, n_bs=2, n_ue=4, config=cfg)
        A, _ = closest_bs_baseline(topo, cfg)
        assert np.all(A.sum(axis=1) <= 2)
        assert np.all(A.sum(axis=0) == 1)

    def test_candidates_respect_operator(self, toy, config):
        cands = serving_candidates(toy, config)
        for u, allowed in enumerate(cands):
            for b in allowed:
                assert toy.bs_operators[b] == toy.ue_operators[u]


class TestSteps:
    def test_a_step_monotone(self, toy_spec, toy, config):
        A0 = strongest_bs_association(toy, config)
        before = toy_spec.utility(A0, A0)
        A1, C1, obj = solve_A_step(A0, A0.copy(), toy_spec)
        assert obj >= before - 1e-12

    def test_a_step_forced(self):
        topo, config = random_instance(1, n_bs=1, n_ue=3)
        spec = ObjectiveSpec(topo, config, SurrogateRateEvaluator(topo, config))
        A0 = strongest_bs_association(topo, config)
        A1, _, _ = solve_A_step(A0, A0.copy(), spec)
        assert np.all(A1 == 1)

    def test_c_step_monotone_and_budget(self, toy_spec, toy, config):
        A = strongest_bs_association(toy, config)
        before = toy_spec.utility(A, A)
        C, obj = solve_C_step(A, A.copy(), toy_spec)
        assert obj >= before - 1e-12
        assert np.all(toy_spec.costs(A, C) <= toy_spec.budget + 1e-9)
        assert np.all(C >= A)

    def test_c_step_zero_extra_budget(self, toy, config):
        cfg = SimConfig(num_realizations=5, max_budget=5.0)
        spec = ObjectiveSpec(toy, cfg, SurrogateRateEvaluator(toy, cfg))
        A = strongest_bs_association(toy, cfg)
        C, _ = solve_C_step(A, A.copy(), spec)
        assert np.array_equal(C, A)  # serving already exhausts the budget

    def test_budget_admits_one_inter_operator_bit(self, toy, config):
        # budget 120 = 5 serving + one 100-penalty cross bit + one 10 intra
        spec = ObjectiveSpec(toy, config, SurrogateRateEvaluator(toy, config))
        A = strongest_bs_association(toy, config)
        C, _ = solve_C_step(A, A.copy(), spec)
        p = spec.p0.copy()
        inter = (toy.bs_operators[:, None] != toy.ue_operators[None, :]) & (C == 1)
        per_op = [
            int(inter[:, list(toy.ue_of_operator(z))].sum()) for z in (1, 2)
        ]
        assert max(per_op) <= 1


class TestBcd:
    def test_monotone_traces(self, toy, config):
        for seed in range(5):
            cfg = SimConfig(num_realizations=5, seed=seed)
            spec = ObjectiveSpec(toy, cfg, SurrogateRateEvaluator(toy, cfg))
            sampler = FeasibilitySampler(toy, cfg)
            A0, C0 = sampler.sample(np.random.default_rng(seed))
            _, _, trace = bcd_optimize(A0, C0, spec)
            objs = trace.objectives
            assert all(b >= a - 1e-12 for a, b in zip(objs, objs[1:]))

    def test_fixed_point_single_iteration(self, toy, config):
        spec = ObjectiveSpec(toy, config, SurrogateRateEvaluator(toy, config))
        A0 = strongest_bs_association(toy, config)
        A, C, _ = bcd_optimize(A0, A0.copy(), spec)
        A2, C2, trace2 = bcd_optimize(A, C, spec)
        assert np.array_equal(A, A2) and np.array_equal(C, C2)
        assert len(trace2.iterations) == 2  # start plus one confirming sweep

    def test_infeasible_start_rejected(self, toy, config):
        spec = ObjectiveSpec(toy, config, SurrogateRateEvaluator(toy, config))
        A0 = strongest_bs_association(toy, config)
        A0[:, 0] = 0
        with pytest.raises(InfeasibleError):
            bcd_optimize(A0, A0.copy(), spec)

    def test_result_feasible(self, toy, config):
        spec = ObjectiveSpec(toy, config, SurrogateRateEvaluator(toy, config))
        A0 = strongest_bs_association(toy, config)
        A, C, _ = bcd_optimize(A0, A0.copy(), spec)
        assert validate_feasible(A, C, toy, config) == []

    def test_trace_csv(self, toy, config, tmp_path):
        spec = ObjectiveSpec(toy, config, SurrogateRateEvaluator(toy, config))
        A0 = strongest_bs_association(toy, config)
        _, _, trace = bcd_optimize(A0, A0.copy(), spec)
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "iteration,objective,changed_bits"
        assert len(lines) == len(trace.iterations) + 1


class TestOracle:
    def test_never_beaten_by_bcd(self):
        for seed in range(5):
            topo, config = random_instance(seed)
            evaluator = MonteCarloRateEvaluator(topo, config, seed=seed,
                                                num_realizations=8)
            spec = ObjectiveSpec(topo, config, evaluator)
            _, _, best = brute_force_oracle(spec)
            A0 = strongest_bs_association(topo, config)
            _, _, trace = bcd_optimize(A0, A0.copy(), spec)
            assert trace.objectives[-1] <= best + 1e-9

    def test_oracle_feasible(self):
        topo, config = random_instance(11)
        spec = ObjectiveSpec(
            topo, config, SurrogateRateEvaluator(topo, config)
        )
        A, C, _ = brute_force_oracle(spec)
        assert validate_feasible(A, C, topo, config, budget=spec.budget) == []

    def test_too_large_instance_rejected(self, toy, config):
        spec = ObjectiveSpec(toy, config, SurrogateRateEvaluator(toy, config))
        with pytest.raises(InstanceTooLargeError):
            brute_force_oracle(spec)


class TestSampler:
    def test_samples_feasible(self, toy, config, rng):
        sampler = FeasibilitySampler(toy, config)
        for _ in range(50):
            A, C = sampler.sample(rng)
            assert validate_feasible(A, C, toy, config) == []

    def test_fallback(self, toy, config, rng):
        sampler = FeasibilitySampler(toy, config, max_attempts=0)
        fallback = toy_scenario(toy, "a")
        got = sampler.sample(rng, fallback=fallback)
        assert got is fallback

    def test_exhausted_raises(self, toy, config, rng):
        sampler = FeasibilitySampler(toy, config, max_attempts=0)
        with pytest.raises(InfeasibleError):
            sampler.sample(rng)


class TestEvaluator:
    def test_cache_consistency(self, toy, config):
        evaluator = MonteCarloRateEvaluator(toy, config, seed=0, num_realizations=4)
        A, C = toy_scenario(toy, "a")
        r1 = evaluator.rates(A, C)
        r2 = evaluator.rates(A.copy(), C.copy())
        assert np.array_equal(r1, r2)

    def test_matches_long_term_report(self, toy, config):
        from mmwshare.interference import long_term_report

        evaluator = MonteCarloRateEvaluator(toy, config, seed=0, num_realizations=6)
        A, C = toy_scenario(toy, "b")
        direct = long_term_report(toy, config, A, C, seed=0, num_realizations=6)
        assert np.allclose(evaluator.rates(A, C), direct.rate_bps, rtol=1e-10)

    def test_coordination_helps_focus_ue(self, toy, config):
        evaluator = MonteCarloRateEvaluator(toy, config, seed=0, num_realizations=10)
        A, C_a = toy_scenario(toy, "a")
        _, C_b = toy_scenario(toy, "b")
        assert evaluator.rates(A, C_b)[5] > evaluator.rates(A, C_a)[5]
