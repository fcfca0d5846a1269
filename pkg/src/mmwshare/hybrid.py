"""Closed control loop mixing model-based search and measured feedback.

Time advances in coherence intervals (CIs). Most CIs are operation
frames that run the confidence-promoted incumbent decision; periodic
training frames try a candidate produced by optimizing over the learned
rate models (or, with probability epsilon, a random feasible decision).
Measured rates flow back into the models, candidates are promoted once
their measured utility beats the incumbent with enough evidence, and UE
arrivals can be injected mid-run.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from mmwshare import channel as chan
from mmwshare import coordination as coord
from mmwshare import topology as topo_mod
from mmwshare.interference import RATE_FLOOR_BPS, evaluate_realization
from mmwshare.optimizer import (
    FeasibilitySampler,
    InfeasibleError,
    ObjectiveSpec,
    bcd_optimize,
    strongest_bs_association,
)
from mmwshare.rate_model import RateModelSet


@dataclass(frozen=True)
class FrameSchedule:
    """Deterministic training-frame cadence and exploration decay."""

    period_initial: int = 10
    warmup_cis: int = 2000
    period_late: int = 50
    epsilon0: float = 0.5
    decay: float = 0.9
    decay_period: int = 1000

    @classmethod
    def from_config(cls, config):
        return cls(
            period_initial=config.training_period_initial,
            warmup_cis=config.training_warmup_cis,
            period_late=config.training_period_late,
            epsilon0=config.epsilon0,
            decay=config.epsilon_decay,
            decay_period=config.epsilon_decay_period,
        )

    def is_training(self, n):
        period = self.period_initial if n < self.warmup_cis else self.period_late
        return n > 0 and n % period == 0

    def epsilon(self, n):
        return self.epsilon0 * self.decay ** (n // self.decay_period)


def decay_epsilon(schedule: FrameSchedule, n):
    """Exploration probability in effect at CI n (multiplicative decay)."""
    return schedule.epsilon(n)


def explore(a_star, c_star, sampler, eps, rng):
    """epsilon-greedy candidate choice over the feasible space."""
    if rng.random() < eps:
        return sampler.sample(rng, fallback=(a_star, c_star))
    return a_star, c_star


@dataclass
class CandidateLedger:
    """Measured-utility bookkeeping for explored decisions."""

    samples: dict = field(default_factory=dict)
    decisions: dict = field(default_factory=dict)

    @staticmethod
    def key(A, C):
        return (np.asarray(A).tobytes(), np.asarray(C).tobytes())

    def add(self, A, C, utility):
        k = self.key(A, C)
        if k not in self.decisions:
            self.decisions[k] = (
                np.asarray(A).copy(),
                np.asarray(C).copy(),
            )
        self.samples.setdefault(k, []).append(float(utility))

    def count(self, A, C):
        return len(self.samples.get(self.key(A, C), ()))

    def mean(self, A, C):
        vals = self.samples.get(self.key(A, C))
        return float(np.mean(vals)) if vals else None

    def qualifies(self, A, C, incumbent_mean, min_visits, margin):
        vals = self.samples.get(self.key(A, C))
        if not vals or len(vals) < min_visits:
            return False
        mean = float(np.mean(vals))
        if incumbent_mean is None:
            return True
        threshold = incumbent_mean + abs(incumbent_mean) * margin
        return mean > threshold

    def best(self, min_visits):
        """(key, mean) of the best-measured decision with enough visits."""
        winner = None
        for k, vals in self.samples.items():
            if len(vals) < min_visits:
                continue
            mean = float(np.mean(vals))
            if winner is None or mean > winner[1]:
                winner = (k, mean)
        return winner


def _utility(report, topology, weights):
    rates = np.maximum(report.rate_bps, RATE_FLOOR_BPS)
    return float(
        sum(
            weights[z - 1] * np.sum(np.log(rates[topology.ue_of_operator(z)]))
            for z in range(1, topology.num_operators + 1)
        )
    )


def run_ci(ci_index, topology, config, A, C, seed):
    """Execute one coherence interval: sample fading, beamform, measure."""
    rng = chan.realization_rng(seed, ci_index)
    realization = chan.sample_all(topology, config, rng)
    return evaluate_realization(topology, config, realization, A, C)


@dataclass
class RunResult:
    rows: list
    topology: object
    final_A: np.ndarray
    final_C: np.ndarray
    models: RateModelSet
    summary: dict

    def write_csv(self, path):
        write_timeseries(self.rows, self.topology.num_operators, path)

    def write_summary(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary, fh, indent=1, sort_keys=True)
            fh.write("\n")


def write_timeseries(rows, num_operators, path):
    header = ["ci", "frame_type", "sum_rate_bps", "min_rate_bps"]
    header += [f"utility_op{z}" for z in range(1, num_operators + 1)]
    header += [f"cost_op{z}" for z in range(1, num_operators + 1)]
    header += ["epsilon"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _repair_after_arrival(topology, config, A, C, num_new):
    """Pad the incumbent decision for newly arrived UEs.

    Each new UE is attached to its strongest allowed BS that still has a
    free slot; the serving bit is mirrored into C.
    """
    num_bs = topology.num_bs
    old_u = topology.num_ue - num_new
    A_new = np.zeros((num_bs, topology.num_ue), dtype=int)
    C_new = np.zeros((num_bs, topology.num_ue), dtype=int)
    A_new[:, :old_u] = A
    C_new[:, :old_u] = C
    dist = topology.distances()
    for u in range(old_u, topology.num_ue):
        ranked = sorted(
            (
                b
                for b in range(num_bs)
                if topology.bs_operators[b] == topology.ue_operators[u]
                and topology.pathloss_matrix[b, u] > 0
                and dist[b, u] <= config.cell_radius_m
            ),
            key=lambda b: (-topology.pathloss_matrix[b, u], b),
        )
        for b in ranked:
            if A_new[b].sum() < config.n_bs_antennas:
                A_new[b, u] = 1
                C_new[b, u] = 1
                break
        else:
            raise InfeasibleError(f"no feasible serving BS for arriving UE {u}")
    return A_new, C_new


def dynamic_ue_event(topology, config, models, A, C, positions, operators):
    """Apply a UE-arrival event: extend topology, models, and decision."""
    positions = np.atleast_2d(positions)
    topology = topo_mod.add_ues(topology, positions, operators, config)
    A, C = _repair_after_arrival(topology, config, A, C, len(positions))
    models.resize(topology)
    return topology, A, C


def run_simulation(topology, config, num_cis=10_000, knowledge="full", seed=None,
                   dynamic_events=None, record_reports=False):
    """Run the full loop for ``num_cis`` coherence intervals.

    ``dynamic_events`` maps a CI index to (positions, operators) of UEs
    arriving right before that CI. Returns a RunResult with one CSV row
    per CI and a JSON-able summary.
    """
    config.validate()
    seed = config.seed if seed is None else seed
    schedule = FrameSchedule.from_config(config)
    dynamic_events = dict(dynamic_events or {})
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(1 << 30,)))
    sampler = FeasibilitySampler(topology, config)
    if knowledge == "none":
        # no gain table to rank by: any allowed BS is a candidate
        init_sampler = FeasibilitySampler(topology, config,
                                          k_strongest=topology.num_bs)
        a_star, c_star = init_sampler.sample(rng)
        c_star = a_star.copy()
    else:
        a_star = strongest_bs_association(topology, config)
        c_star = a_star.copy()
    violations = coord.validate_feasible(a_star, c_star, topology, config)
    if violations:
        raise InfeasibleError("initial decision infeasible: " + "; ".join(violations))

    models = RateModelSet(
        topology,
        config,
        knowledge=knowledge,
        rng=np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(1 << 30, 1))
        ),
        sample_fn=lambda r: sampler.sample(r),
    )
    weights = np.full(topology.num_operators, 1.0 / topology.num_operators)
    ledger = CandidateLedger()
    rows = []
    reports = [] if record_reports else None
    pending_rates = []  # operation-frame measurements under the incumbent
    pending_decision = (a_star.copy(), c_star.copy())

    def flush_pending(ci):
        nonlocal pending_rates
        if pending_rates:
            mean_rates = np.mean(pending_rates, axis=0)
            models.update(ci, pending_decision[0], pending_decision[1], mean_rates)
        pending_rates = []

    spec = ObjectiveSpec(topology, config, models, weights=weights)

    def optimize():
        try:
            A, C, _ = bcd_optimize(a_star, c_star, spec)
            return A, C
        except InfeasibleError:
            return a_star.copy(), c_star.copy()

    for ci in range(num_cis):
        if ci in dynamic_events:
            positions, operators = dynamic_events[ci]
            flush_pending(ci)
            topology, a_star, c_star = dynamic_ue_event(
                topology, config, models, a_star, c_star, positions, operators
            )
            weights = np.full(topology.num_operators, 1.0 / topology.num_operators)
            sampler = FeasibilitySampler(topology, config)
            spec = ObjectiveSpec(topology, config, models, weights=weights)
            ledger = CandidateLedger()
            pending_decision = (a_star.copy(), c_star.copy())
            pending_rates = []

        eps = schedule.epsilon(ci)
        training = schedule.is_training(ci)
        if training:
            flush_pending(ci)
            a_opt, c_opt = optimize()
            cand_a, cand_c = explore(a_opt, c_opt, sampler, eps, rng)
            report = run_ci(ci, topology, config, cand_a, cand_c, seed)
            util = _utility(report, topology, weights)
            ledger.add(cand_a, cand_c, util)
            models.update(ci, cand_a, cand_c, report.rate_bps)
            a_opt, c_opt = optimize()
            # promotion: hand the incumbency to the best-measured decision,
            # with a relative margin as hysteresis. A candidate promoted on
            # a few lucky measurements keeps accumulating operation-frame
            # evidence, so its mean self-corrects and the previous incumbent
            # is restored at a later training frame.
            incumbent_key = ledger.key(a_star, c_star)
            incumbent_mean = ledger.mean(a_star, c_star)
            best = ledger.best(config.confidence_visits)
            if best is not None and best[0] != incumbent_key:
                if incumbent_mean is None or best[1] > incumbent_mean + abs(
                    incumbent_mean
                ) * config.confidence_margin:
                    best_a, best_c = ledger.decisions[best[0]]
                    a_star, c_star = best_a.copy(), best_c.copy()
                    pending_decision = (a_star.copy(), c_star.copy())
            decision = (cand_a, cand_c)
            frame_type = "train"
        else:
            report = run_ci(ci, topology, config, a_star, c_star, seed)
            util = _utility(report, topology, weights)
            ledger.add(a_star, c_star, util)
            pending_rates.append(report.rate_bps)
            decision = (a_star, c_star)
            frame_type = "oper"

        penalties = coord.PenaltyConfig.from_sim_config(config)
        p0 = coord.template_penalty(topology, penalties)
        p = coord.effective_penalty(p0, decision[0], penalties.serve_penalty)
        costs = coord.all_costs(decision[1], p, topology, penalties.attribution)
        utils = [
            float(
                np.sum(
                    np.log(
                        np.maximum(
                            report.rate_bps[topology.ue_of_operator(z)],
                            RATE_FLOOR_BPS,
                        )
                    )
                )
            )
            for z in range(1, topology.num_operators + 1)
        ]
        row = [ci, frame_type, repr(float(report.rate_bps.sum())),
               repr(float(report.rate_bps.min()))]
        row += [repr(u) for u in utils]
        row += [repr(float(c)) for c in costs]
        row += [repr(float(eps))]
        rows.append(row)
        if record_reports:
            reports.append(report)

    summary = {
        "num_cis": num_cis,
        "seed": seed,
        "knowledge": knowledge,
        "final_A": ["".join(map(str, r)) for r in a_star.tolist()],
        "final_C": ["".join(map(str, r)) for r in c_star.tolist()],
        "final_incumbent_utility": ledger.mean(a_star, c_star),
        "num_ue": topology.num_ue,
        "num_bs": topology.num_bs,
    }
    result = RunResult(
        rows=rows,
        topology=topology,
        final_A=a_star,
        final_C=c_star,
        models=models,
        summary=summary,
    )
    if record_reports:
        result.reports = reports
    return result
