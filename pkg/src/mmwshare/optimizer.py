"""Block-coordinate search over association and coordination matrices.

The objective is a weighted sum of per-operator log-rate utilities. The
search alternates an association step (C fixed) and a coordination step
(A fixed), each guaranteed not to decrease the objective, so the trace
is monotone and the loop terminates on a finite state space. Small
instances additionally get an exhaustive oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from mmwshare import channel as chan
from mmwshare import coordination as coord
from mmwshare.beamforming import analog_combiner, rzf_precoder
from mmwshare.interference import RATE_FLOOR_BPS

A_ENUMERATION_LIMIT = 100_000
C_EXHAUSTIVE_BITS = 20
ORACLE_CANDIDATE_LIMIT = 10_000_000


class InfeasibleError(RuntimeError):
    """No feasible decision exists under the given constraints."""


class InstanceTooLargeError(RuntimeError):
    """Exhaustive enumeration would exceed the candidate limit."""


@dataclass
class ObjectiveSpec:
    """Everything a search step needs to score a candidate decision."""

    topology: object
    config: object
    evaluator: object  # exposes rates(A, C) -> (U,) bit/s
    weights: np.ndarray = None
    budget: float = None
    roaming: bool = None

    def __post_init__(self):
        z = self.topology.num_operators
        if self.weights is None:
            self.weights = np.full(z, 1.0 / z)
        self.weights = np.asarray(self.weights, dtype=float)
        if np.any(self.weights <= 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be positive and sum to 1")
        if self.budget is None:
            self.budget = self.config.max_budget
        if self.roaming is None:
            self.roaming = self.config.roaming
        self.penalties = coord.PenaltyConfig(
            self.config.serve_penalty,
            self.config.intra_penalty,
            self.config.inter_penalty,
            self.config.attribution,
        )
        self.p0 = coord.template_penalty(self.topology, self.penalties)

    def costs(self, A, C):
        p = coord.effective_penalty(self.p0, A, self.penalties.serve_penalty)
        return coord.all_costs(C, p, self.topology, self.penalties.attribution)

    def within_budget(self, A, C):
        return bool(np.all(self.costs(A, C) <= self.budget + 1e-9))

    def utility(self, A, C):
        rates = np.maximum(np.asarray(self.evaluator.rates(A, C)), RATE_FLOOR_BPS)
        return float(
            sum(
                self.weights[z - 1]
                * np.sum(np.log(rates[self.topology.ue_of_operator(z)]))
                for z in range(1, self.topology.num_operators + 1)
            )
        )

    def is_feasible(self, A, C):
        return coord.is_feasible(
            A, C, self.topology, self.config, budget=self.budget, roaming=self.roaming
        )


@dataclass
class BcdTrace:
    """Iterate history of one block-coordinate run."""

    iterations: list = field(default_factory=list)  # (k, A, C, objective)
    reason: str = ""

    @property
    def objectives(self):
        return [obj for (_, _, _, obj) in self.iterations]

    def record(self, k, A, C, objective):
        self.iterations.append((k, A.copy(), C.copy(), objective))

    def write_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "objective", "changed_bits"])
            prev = None
            for k, A, C, obj in self.iterations:
                changed = (
                    0
                    if prev is None
                    else int(np.sum(A != prev[0]) + np.sum(C != prev[1]))
                )
                writer.writerow([k, repr(obj), changed])
                prev = (A, C)


def serving_candidates(topology, config, roaming=None, cell_radius_m=None):
    """Per-UE list of BSs allowed to serve it (operator, gain, radius)."""
    roaming = config.roaming if roaming is None else roaming
    radius = config.cell_radius_m if cell_radius_m is None else cell_radius_m
    dist = topology.distances()
    candidates = []
    for u in range(topology.num_ue):
        allowed = []
        for b in range(topology.num_bs):
            if not roaming and topology.bs_operators[b] != topology.ue_operators[u]:
                continue
            if topology.pathloss_matrix[b, u] == 0 or dist[b, u] > radius:
                continue
            allowed.append(b)
        if not allowed:
            raise InfeasibleError(f"UE {u} has no feasible serving BS")
        candidates.append(allowed)
    return candidates


def assignment_to_A(assignment, num_bs):
    A = np.zeros((num_bs, len(assignment)), dtype=int)
    for u, b in enumerate(assignment):
        A[b, u] = 1
    return A


def strongest_bs_association(topology, config, roaming=None):
    """Every UE to its strongest (highest-gain) allowed BS, capacity-repaired.

    Overflowing BSs hand their weakest extra UEs to the next-strongest
    candidate with free slots; ties break toward the lowest BS id.
    """
    cands = serving_candidates(topology, config, roaming=roaming)
    gains = topology.pathloss_matrix
    order = sorted(
        range(topology.num_ue),
        key=lambda u: -max(gains[b, u] for b in cands[u]),
    )
    load = np.zeros(topology.num_bs, dtype=int)
    assignment = [None] * topology.num_ue
    for u in order:
        ranked = sorted(cands[u], key=lambda b: (-gains[b, u], b))
        for b in ranked:
            if load[b] < config.n_bs_antennas:
                assignment[u] = b
                load[b] += 1
                break
        else:
            raise InfeasibleError(f"no free slot for UE {u}")
    return assignment_to_A(assignment, topology.num_bs)


def closest_bs_baseline(topology, config):
    """Nearest same-operator BS for every UE, C = A; ties to lowest id.

    Overflow beyond the per-BS antenna count moves the farthest extra
    UEs to their next-nearest BS.
    """
    cands = serving_candidates(topology, config, roaming=False)
    dist = topology.distances()
    order = sorted(
        range(topology.num_ue), key=lambda u: min(dist[b, u] for b in cands[u])
    )
    load = np.zeros(topology.num_bs, dtype=int)
    assignment = [None] * topology.num_ue
    for u in order:
        ranked = sorted(cands[u], key=lambda b: (dist[b, u], b))
        for b in ranked:
            if load[b] < config.n_bs_antennas:
                assignment[u] = b
                load[b] += 1
                break
        else:
            raise InfeasibleError(f"no free slot for UE {u}")
    A = assignment_to_A(assignment, topology.num_bs)
    return A, A.copy()


def _lex_key(A, C=None):
    bits = A.ravel() if C is None else np.concatenate([A.ravel(), C.ravel()])
    return tuple(bits.tolist())


def _enumerate_A(spec, extra_filter=None):
    """Yield every association matrix satisfying the per-UE candidate
    lists and per-BS capacity, in lexicographic assignment order."""
    cands = serving_candidates(
        spec.topology, spec.config, roaming=spec.roaming
    )
    total = 1
    for c in cands:
        total *= len(c)
        if total > A_ENUMERATION_LIMIT:
            return None
    out = []
    cap = spec.config.n_bs_antennas
    for assignment in itertools.product(*cands):
        counts = np.bincount(assignment, minlength=spec.topology.num_bs)
        if np.any(counts > cap):
            continue
        A = assignment_to_A(assignment, spec.topology.num_bs)
        if extra_filter is None or extra_filter(A):
            out.append(A)
    return out


def solve_A_step(A, C, spec):
    """Re-optimize the association with the coordination pattern fixed.

    A candidate A' is evaluated with C' = C OR A' so new serving links
    are always coordinated; the incumbent is always a candidate, so the
    objective cannot decrease. Exhaustive when the assignment space is
    small, greedy single-UE improvement otherwise.
    """
    incumbent_c = np.maximum(C, A)
    best_a, best_c = A, incumbent_c
    best_obj = spec.utility(A, incumbent_c)
    if not hasattr(spec, "_a_candidates"):
        spec._a_candidates = _enumerate_A(spec)
    candidates = spec._a_candidates
    if candidates is not None:
        scored = []
        for cand in candidates:
            c_eff = np.maximum(C, cand)
            if not spec.within_budget(cand, c_eff):
                continue
            scored.append((cand, c_eff))
        if not scored and not spec.within_budget(A, incumbent_c):
            raise InfeasibleError("no association satisfies the budget")
        utilities = _batch_utilities(spec, scored)
        for (cand, c_eff), obj in zip(scored, utilities):
            if obj > best_obj + 1e-15 or (
                obj == best_obj and _lex_key(cand) < _lex_key(best_a)
            ):
                best_a, best_c, best_obj = cand, c_eff, obj
        return best_a, best_c, best_obj
    # large instance: steepest single-UE reassignment until no improvement
    cands = serving_candidates(spec.topology, spec.config, roaming=spec.roaming)
    cap = spec.config.n_bs_antennas
    improved = True
    while improved:
        improved = False
        for u in range(spec.topology.num_ue):
            current = int(np.flatnonzero(best_a[:, u])[0])
            for b in cands[u]:
                if b == current or best_a[b].sum() >= cap:
                    continue
                trial = best_a.copy()
                trial[current, u] = 0
                trial[b, u] = 1
                c_eff = np.maximum(C, trial)
                if not spec.within_budget(trial, c_eff):
                    continue
                obj = spec.utility(trial, c_eff)
                if obj > best_obj + 1e-15:
                    best_a, best_c, best_obj = trial, c_eff, obj
                    improved = True
    return best_a, best_c, best_obj


def _batch_utilities(spec, pairs):
    """Score candidate (A, C) pairs, using the evaluator's batch path if any."""
    if hasattr(spec.evaluator, "rates_batch"):
        rates = spec.evaluator.rates_batch([(a, c) for a, c in pairs])
        out = []
        for r in rates:
            r = np.maximum(np.asarray(r), RATE_FLOOR_BPS)
            out.append(
                float(
                    sum(
                        spec.weights[z - 1]
                        * np.sum(np.log(r[spec.topology.ue_of_operator(z)]))
                        for z in range(1, spec.topology.num_operators + 1)
                    )
                )
            )
        return out
    return [spec.utility(a, c) for a, c in pairs]


def _free_coordination_bits(A, spec):
    """Coordination entries that may be switched on beyond the serving set."""
    topo = spec.topology
    bits = []
    for b in range(topo.num_bs):
        for u in range(topo.num_ue):
            if A[b, u] == 0 and topo.pathloss_matrix[b, u] > 0:
                bits.append((b, u))
    return bits


def solve_C_step(A, C_incumbent, spec):
    """Re-optimize the coordination pattern with the association fixed.

    Starts from the minimal C = A and either enumerates every affordable
    superset (few free bits) or greedily adds the bit with the best
    utility gain per unit penalty. The incumbent C is kept if it scores
    higher, so the step never decreases the objective.
    """
    base = A.copy()
    bits = _free_coordination_bits(A, spec)
    best_c = np.maximum(C_incumbent, A)
    best_obj = spec.utility(A, best_c)
    if len(bits) <= C_EXHAUSTIVE_BITS:
        pairs = []
        for r in range(len(bits) + 1):
            for combo in itertools.combinations(bits, r):
                c = base.copy()
                for b, u in combo:
                    c[b, u] = 1
                if spec.within_budget(A, c):
                    pairs.append((A, c))
        for (_, c), obj in zip(pairs, _batch_utilities(spec, pairs)):
            if obj > best_obj + 1e-15 or (
                obj == best_obj and _lex_key(c) < _lex_key(best_c)
            ):
                best_c, best_obj = c, obj
        return best_c, best_obj
    # greedy marginal-gain search from the minimal pattern
    c = base
    obj = spec.utility(A, c)
    remaining = list(bits)
    while True:
        scored = []
        affordable = []
        for b, u in remaining:
            trial = c.copy()
            trial[b, u] = 1
            if spec.within_budget(A, trial):
                affordable.append((b, u, trial))
        if not affordable:
            break
        trials = [(A, t) for (_, _, t) in affordable]
        utilities = _batch_utilities(spec, trials)
        for (b, u, trial), trial_obj in zip(affordable, utilities):
            penalty = spec.p0[b, u]
            scored.append(((trial_obj - obj) / penalty, trial_obj, b, u, trial))
        scored.sort(key=lambda t: (-t[0], t[2], t[3]))
        gain, trial_obj, b, u, trial = scored[0]
        if gain <= 1e-15:
            break
        c, obj = trial, trial_obj
        remaining.remove((b, u))
    if obj > best_obj + 1e-15:
        best_c, best_obj = c, obj
    return best_c, best_obj


def bcd_optimize(A0, C0, spec, tol=1e-9, max_iters=100):
    """Alternate association and coordination steps to a fixed point.

    Stops when the objective improves by less than ``tol`` or a state
    repeats; the recorded objective sequence is non-decreasing.
    """
    A = np.asarray(A0).astype(int)
    C = np.maximum(np.asarray(C0).astype(int), A)
    violations = coord.validate_feasible(
        A, C, spec.topology, spec.config, budget=spec.budget, roaming=spec.roaming
    )
    if violations:
        raise InfeasibleError("infeasible start: " + "; ".join(violations))
    trace = BcdTrace()
    obj = spec.utility(A, C)
    trace.record(0, A, C, obj)
    seen = {_lex_key(A, C)}
    for k in range(1, max_iters + 1):
        A, C, obj_a = solve_A_step(A, C, spec)
        C, obj_c = solve_C_step(A, C, spec)
        trace.record(k, A, C, obj_c)
        if obj_c - obj < tol:
            trace.reason = "objective improvement below tolerance"
            obj = max(obj, obj_c)
            break
        obj = obj_c
        key = _lex_key(A, C)
        if key in seen:
            trace.reason = "state repeated"
            break
        seen.add(key)
    else:
        trace.reason = "iteration cap reached"
    return A, C, trace


def brute_force_oracle(spec):
    """Exact maximizer by enumerating every feasible (A, C).

    Only for small instances; candidate count above the limit raises.
    """
    a_candidates = _enumerate_A(spec)
    if a_candidates is None:
        raise InstanceTooLargeError("association space exceeds the enumeration limit")
    best = None
    total = 0
    for A in a_candidates:
        bits = _free_coordination_bits(A, spec)
        if len(bits) > C_EXHAUSTIVE_BITS:
            raise InstanceTooLargeError(
                f"{len(bits)} free coordination bits exceed exhaustive range"
            )
        pairs = []
        for r in range(len(bits) + 1):
            for combo in itertools.combinations(bits, r):
                c = A.copy()
                for b, u in combo:
                    c[b, u] = 1
                if spec.within_budget(A, c):
                    pairs.append((A, c))
        total += len(pairs)
        if total > ORACLE_CANDIDATE_LIMIT:
            raise InstanceTooLargeError("oracle candidate count exceeds limit")
        for (a, c), obj in zip(pairs, _batch_utilities(spec, pairs)):
            if (
                best is None
                or obj > best[2] + 1e-15
                or (obj == best[2] and _lex_key(a, c) < _lex_key(*best[:2]))
            ):
                best = (a, c, obj)
    if best is None:
        raise InfeasibleError("no feasible decision under the budget")
    return best


class MonteCarloRateEvaluator:
    """Long-term rates from a fixed, cached set of channel realizations.

    The realizations, per-link receive combiners, and combiner-projected
    channel rows are precomputed once, so scoring a candidate (A, C)
    only needs per-BS pseudo-inverses. Results are memoized by the bit
    patterns of (A, C).
    """

    def __init__(self, topology, config, seed=0, num_realizations=None):
        self.topology = topology
        self.config = config
        self.seed = seed
        self.k = num_realizations or config.num_realizations
        self._cache = {}
        self._prepare()

    def _prepare(self):
        topo, cfg = self.topology, self.config
        B, U = topo.num_bs, topo.num_ue
        self._proj = []  # per realization: (B_serv, B_tx, U, N_BS) rows
        for idx in range(self.k):
            rng = chan.realization_rng(self.seed, idx)
            real = chan.sample_all(topo, cfg, rng)
            combiners = np.zeros((B, U, cfg.n_ue_antennas), dtype=complex)
            has_comb = np.zeros((B, U), dtype=bool)
            for b in range(B):
                for u in range(U):
                    if np.any(np.abs(real.gains[b, u]) > 0):
                        combiners[b, u] = analog_combiner(
                            real.gains[b, u], real.aoa[b, u], cfg.n_ue_antennas
                        )
                        has_comb[b, u] = True
            # proj[bs_serv, i, u, :] = combiner(bs_serv, u)^H @ H[i, u]
            proj = np.einsum(
                "sun,iunm->sium", combiners.conj(), real.matrices
            )
            self._proj.append((proj, has_comb))

    def rates(self, A, C):
        key = (np.asarray(A).tobytes(), np.asarray(C).tobytes())
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        topo, cfg = self.topology, self.config
        A = np.asarray(A)
        C = np.asarray(C)
        B, U = topo.num_bs, topo.num_ue
        serving = np.argmax(A, axis=0)
        served = [list(np.flatnonzero(A[b])) for b in range(B)]
        coord_rows = [list(np.flatnonzero(C[b])) for b in range(B)]
        rate_acc = np.zeros(U)
        for proj, has_comb in self._proj:
            lambdas = np.zeros(B)
            tx = [None] * B
            for b in range(B):
                rows = coord_rows[b]
                if not rows or not served[b]:
                    continue
                hbar = np.array([proj[serving[u], b, u] for u in rows])
                p = rzf_precoder(hbar, cfg.rzf_delta)
                cols = [rows.index(u) for u in served[b]]
                w_b = p[:, cols]
                tx[b] = w_b
                if np.any(w_b):
                    lambdas[b] = cfg.tx_power_w / float(np.sum(np.abs(w_b) ** 2))
            for u in range(U):
                b = serving[u]
                if not has_comb[b, u]:
                    continue  # blocked serving link: zero rate
                sig = 0.0
                interf = 0.0
                for i in range(B):
                    if lambdas[i] == 0.0:
                        continue
                    powers = np.abs(proj[b, i, u] @ tx[i]) ** 2
                    if i == b:
                        j = served[b].index(u)
                        sig = lambdas[b] * float(powers[j])
                        interf += lambdas[b] * float(np.sum(powers) - powers[j])
                    else:
                        interf += lambdas[i] * float(np.sum(powers))
                w_z = topo.ue_bandwidth(u)
                sinr = sig / (interf + w_z * cfg.noise_psd_w_hz)
                rate_acc[u] += w_z * np.log2(1.0 + sinr)
        rates = rate_acc / self.k
        self._cache[key] = rates
        return rates


class FeasibilitySampler:
    """Uniform-ish sampler over the feasible decision space.

    Associations are drawn by giving every UE one of its ``k_strongest``
    highest-gain allowed BSs (rejecting capacity violations); the
    coordination pattern starts at C = A and switches on random
    affordable extra bits. Attempts are bounded; when they run out the
    caller-provided fallback decision is returned.
    """

    def __init__(self, topology, config, budget=None, roaming=None, k_strongest=3,
                 max_attempts=50):
        self.topology = topology
        self.config = config
        self.budget = config.max_budget if budget is None else budget
        self.max_attempts = max_attempts
        cands = serving_candidates(topology, config, roaming=roaming)
        gains = topology.pathloss_matrix
        self.choices = [
            sorted(c, key=lambda b: (-gains[b, u], b))[:k_strongest]
            for u, c in enumerate(cands)
        ]
        self.penalties = coord.PenaltyConfig(
            config.serve_penalty, config.intra_penalty, config.inter_penalty,
            config.attribution,
        )
        self.p0 = coord.template_penalty(topology, self.penalties)

    def sample(self, rng, fallback=None):
        topo, cfg = self.topology, self.config
        for _ in range(self.max_attempts):
            assignment = [c[rng.integers(len(c))] for c in self.choices]
            counts = np.bincount(assignment, minlength=topo.num_bs)
            if np.any(counts > cfg.n_bs_antennas):
                continue
            A = assignment_to_A(assignment, topo.num_bs)
            C = A.copy()
            p = coord.effective_penalty(self.p0, A, self.penalties.serve_penalty)
            costs = coord.all_costs(C, p, topo, self.penalties.attribution)
            if np.any(costs > self.budget + 1e-9):
                continue
            free = [
                (b, u)
                for b in range(topo.num_bs)
                for u in range(topo.num_ue)
                if A[b, u] == 0 and topo.pathloss_matrix[b, u] > 0
            ]
            order = rng.permutation(len(free))
            for idx in order:
                b, u = free[idx]
                if rng.random() >= 0.5:
                    continue
                if self.penalties.attribution == "ue":
                    payer = topo.ue_operators[u] - 1
                else:
                    payer = topo.bs_operators[b] - 1
                if costs[payer] + p[b, u] <= self.budget + 1e-9:
                    C[b, u] = 1
                    costs[payer] += p[b, u]
            return A, C
        if fallback is not None:
            return fallback
        raise InfeasibleError("feasibility sampler exhausted its attempts")


def oracle_solution(topology, config, seed=0, num_realizations=None, budget=None,
                    roaming=None, evaluator=None):
    """Benchmark decision from block-coordinate search with true rates."""
    evaluator = evaluator or MonteCarloRateEvaluator(
        topology, config, seed=seed, num_realizations=num_realizations
    )
    spec = ObjectiveSpec(topology, config, evaluator, budget=budget, roaming=roaming)
    a0 = strongest_bs_association(topology, config, roaming=spec.roaming)
    A, C, trace = bcd_optimize(a0, a0.copy(), spec)
    return A, C, trace, spec
