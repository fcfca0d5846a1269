import numpy as np
import pytest

from mmwshare import SimConfig, build_toy_topology
from mmwshare.coordination import validate_feasible
from mmwshare.hybrid import (
    CandidateLedger,
    FrameSchedule,
    decay_epsilon,
    dynamic_ue_event,
    explore,
    run_ci,
    run_simulation,
)
from mmwshare.optimizer import FeasibilitySampler
from mmwshare.rate_model import RateModelSet
from mmwshare.scenarios import toy_scenario


class TestFrameSchedule:
    def test_early_cadence_every_tenth(self):
        s = FrameSchedule()
        train = [n for n in range(100) if s.is_training(n)]
        assert train == [10, 20, 30, 40, 50, 60, 70, 80, 90]

    def test_ci_zero_is_operation(self):
        assert not FrameSchedule().is_training(0)

    def test_late_cadence_every_fiftieth(self):
        s = FrameSchedule()
        train = [n for n in range(2000, 2201) if s.is_training(n)]
        assert train == [2000, 2050, 2100, 2150, 2200]

    def test_boundary(self):
        s = FrameSchedule()
        assert s.is_training(1990)
        assert not s.is_training(2010)  # past warmup, off the slow grid
        assert s.is_training(2050)

    def test_epsilon_decay_values(self):
        s = FrameSchedule()
        assert s.epsilon(0) == 0.5
        assert s.epsilon(999) == 0.5
        assert s.epsilon(1000) == pytest.approx(0.45)
        assert s.epsilon(3500) == pytest.approx(0.5 * 0.9**3)
        assert decay_epsilon(s, 1000) == s.epsilon(1000)

    def test_from_config(self):
        cfg = SimConfig(training_period_initial=5, training_warmup_cis=100,
                        training_period_late=25, epsilon0=0.3)
        s = FrameSchedule.from_config(cfg)
        assert s.is_training(5) and not s.is_training(6)
        assert s.epsilon(0) == 0.3
        assert [n for n in range(100, 151) if s.is_training(n)] == [100, 125, 150]


class TestExplore:
    def test_zero_epsilon_keeps_candidate(self, toy, config, rng):
        sampler = FeasibilitySampler(toy, config)
        A, C = toy_scenario(toy, "a")
        for _ in range(20):
            a, c = explore(A, C, sampler, 0.0, rng)
            assert a is A and c is C

    def test_unit_epsilon_always_samples(self, toy, config, rng):
        sampler = FeasibilitySampler(toy, config)
        A, C = toy_scenario(toy, "a")
        for _ in range(20):
            a, c = explore(A, C, sampler, 1.0, rng)
            assert validate_feasible(a, c, toy, config) == []

    def test_frequency_matches_epsilon(self, toy, config):
        sampler = FeasibilitySampler(toy, config)
        A, C = toy_scenario(toy, "a")
        rng = np.random.default_rng(7)
        eps = 0.3
        explored = sum(
            explore(A, C, sampler, eps, rng)[0] is not A for _ in range(10_000)
        )
        assert abs(explored / 10_000 - eps) < 0.02


class TestCandidateLedger:
    def test_count_and_mean(self, toy):
        led = CandidateLedger()
        A, C = toy_scenario(toy, "a")
        assert led.count(A, C) == 0 and led.mean(A, C) is None
        led.add(A, C, 1.0)
        led.add(A, C, 3.0)
        assert led.count(A, C) == 2
        assert led.mean(A, C) == 2.0

    def test_distinct_keys(self, toy):
        led = CandidateLedger()
        A, C_a = toy_scenario(toy, "a")
        _, C_b = toy_scenario(toy, "b")
        led.add(A, C_a, 1.0)
        assert led.count(A, C_b) == 0

    def test_qualification_rules(self, toy):
        led = CandidateLedger()
        A, C = toy_scenario(toy, "b")
        led.add(A, C, 10.0)
        led.add(A, C, 10.0)
        assert not led.qualifies(A, C, 5.0, min_visits=3, margin=0.01)
        led.add(A, C, 10.0)
        assert led.qualifies(A, C, 5.0, min_visits=3, margin=0.01)
        # must clear the incumbent by the relative margin
        assert not led.qualifies(A, C, 9.95, min_visits=3, margin=0.01)
        assert led.qualifies(A, C, None, min_visits=3, margin=0.01)


class TestRunCi:
    def test_deterministic(self, toy, config):
        A, C = toy_scenario(toy, "a")
        r1 = run_ci(4, toy, config, A, C, seed=0)
        r2 = run_ci(4, toy, config, A, C, seed=0)
        assert np.array_equal(r1.rate_bps, r2.rate_bps)

    def test_distinct_cis_differ(self, toy, config):
        A, C = toy_scenario(toy, "a")
        r1 = run_ci(4, toy, config, A, C, seed=0)
        r2 = run_ci(5, toy, config, A, C, seed=0)
        assert not np.array_equal(r1.rate_bps, r2.rate_bps)


def short_config(**kw):
    kw.setdefault("num_realizations", 3)
    kw.setdefault("pretrain_samples", 30)
    kw.setdefault("pretrain_epochs", 10)
    kw.setdefault("update_epochs", 1)
    return SimConfig(**kw)


class TestRunSimulation:
    def test_deterministic_rows(self):
        cfg = short_config()
        rows1 = run_simulation(build_toy_topology(cfg), cfg, num_cis=40, seed=3).rows
        rows2 = run_simulation(build_toy_topology(cfg), cfg, num_cis=40, seed=3).rows
        assert rows1 == rows2

    def test_row_shape_and_frame_types(self):
        cfg = short_config()
        res = run_simulation(build_toy_topology(cfg), cfg, num_cis=25, seed=1)
        assert len(res.rows) == 25
        assert all(len(r) == 9 for r in res.rows)
        assert res.rows[10][1] == "train"
        assert res.rows[11][1] == "oper"
        assert res.summary["num_cis"] == 25

    def test_final_decision_feasible(self):
        cfg = short_config()
        topo = build_toy_topology(cfg)
        res = run_simulation(topo, cfg, num_cis=40, seed=2)
        assert validate_feasible(res.final_A, res.final_C, topo, cfg) == []

    def test_budget_respected_every_operation_frame(self):
        cfg = short_config()
        res = run_simulation(build_toy_topology(cfg), cfg, num_cis=60, seed=4)
        for row in res.rows:
            if row[1] == "oper":
                costs = [float(row[6]), float(row[7])]
                assert max(costs) <= cfg.max_budget + 1e-9

    def test_knowledge_none_runs(self):
        cfg = short_config()
        res = run_simulation(
            build_toy_topology(cfg), cfg, num_cis=15, knowledge="none", seed=0
        )
        assert len(res.rows) == 15

    def test_csv_and_summary_outputs(self, tmp_path):
        cfg = short_config()
        res = run_simulation(build_toy_topology(cfg), cfg, num_cis=12, seed=0)
        csv_path = tmp_path / "ts.csv"
        res.write_csv(csv_path)
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == (
            "ci,frame_type,sum_rate_bps,min_rate_bps,"
            "utility_op1,utility_op2,cost_op1,cost_op2,epsilon"
        )
        assert len(lines) == 13
        res.write_summary(tmp_path / "summary.json")
        import json

        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["final_A"] == ["".join(map(str, r)) for r in res.final_A]

    def test_record_reports(self):
        cfg = short_config()
        res = run_simulation(
            build_toy_topology(cfg), cfg, num_cis=5, seed=0, record_reports=True
        )
        assert len(res.reports) == 5
        assert res.reports[0].rate_bps.shape == (10,)


class TestDynamicEvents:
    def test_event_extends_population(self):
        cfg = short_config()
        topo = build_toy_topology(cfg)
        events = {20: ([(150.0, 100.0), (190.0, 140.0)], [1, 2])}
        res = run_simulation(topo, cfg, num_cis=30, seed=1, dynamic_events=events)
        assert res.summary["num_ue"] == 12
        assert res.final_A.shape == (4, 12)
        assert validate_feasible(res.final_A, res.final_C, res.topology, cfg) == []

    def test_dynamic_ue_event_direct(self):
        cfg = short_config()
        topo = build_toy_topology(cfg)
        models = RateModelSet(topo, cfg, rng=np.random.default_rng(0),
                              pretrain=False)
        A, C = toy_scenario(topo, "a")
        topo2, A2, C2 = dynamic_ue_event(
            topo, cfg, models, A, C, [(150.0, 100.0)], [1]
        )
        assert topo2.num_ue == 11
        assert A2[:, :10].tolist() == A.tolist()
        assert A2[:, 10].sum() == 1
        b = int(np.flatnonzero(A2[:, 10])[0])
        assert topo2.bs_operators[b] == 1
        assert C2[b, 10] == 1
        assert len(models.models) == 11
