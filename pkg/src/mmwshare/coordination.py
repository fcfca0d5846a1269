"""Association/coordination matrices, penalties, costs, feasibility.

The binary association matrix A says who serves whom; the coordination
matrix C says which effective channels each BS acquires (and therefore
nulls). Acquiring a channel costs a penalty that depends on whether the
link is the BS's own serving link, an intra-operator link, or an
inter-operator link, and each operator's total is capped by a budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PenaltyConfig:
    """Channel-acquisition penalties: own serving link < intra < inter."""

    serve_penalty: float = 1.0
    intra_penalty: float = 10.0
    inter_penalty: float = 100.0
    attribution: str = "ue"  # which operator pays for a coordination bit

    def __post_init__(self):
        if not 0 <= self.serve_penalty < self.intra_penalty < self.inter_penalty:
            raise ValueError("penalties must satisfy 0 <= serve < intra < inter")
        if self.attribution not in ("ue", "bs"):
            raise ValueError("attribution must be 'ue' or 'bs'")

    @classmethod
    def from_sim_config(cls, config):
        return cls(config.serve_penalty, config.intra_penalty,
                   config.inter_penalty, config.attribution)


def template_penalty(topology, penalties: PenaltyConfig):
    """Baseline penalty matrix P0: intra-operator entries get the intra
    penalty, inter-operator entries the inter penalty."""
    same = topology.bs_operators[:, None] == topology.ue_operators[None, :]
    return np.where(same, penalties.intra_penalty, penalties.inter_penalty).astype(float)


def effective_penalty(p0, A, serve_penalty):
    """Overwrite served links with the (cheaper) serving penalty."""
    A = np.asarray(A)
    return p0 + A * (serve_penalty - p0)


def coordination_cost(z, C, P, topology, attribution="ue"):
    """Total acquisition cost charged to operator z.

    Under "ue" attribution the operator pays for coordination toward its
    own UEs (any BS); under "bs" attribution it pays for whatever its own
    BSs acquire (any UE).
    """
    C = np.asarray(C)
    if attribution == "ue":
        cols = topology.ue_of_operator(z)
        return float(np.sum(C[:, cols] * P[:, cols]))
    if attribution == "bs":
        rows = topology.bs_of_operator(z)
        return float(np.sum(C[rows, :] * P[rows, :]))
    raise ValueError("attribution must be 'ue' or 'bs'")


def all_costs(C, P, topology, attribution="ue"):
    return np.array(
        [
            coordination_cost(z, C, P, topology, attribution)
            for z in range(1, topology.num_operators + 1)
        ]
    )


def cost_identity_check(A, C, p0, serve_penalty, topology, attribution="ue"):
    """Trace form of the cost: sum_u [(P0 + A (p_b 1 - P0))^T C]_uu per operator.

    Must equal ``coordination_cost`` exactly; used as an algebraic self-check.
    """
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    p = p0 + A * (serve_penalty * np.ones_like(p0) - p0)
    diag = np.einsum("bu,bu->u", p, C)
    if attribution == "ue":
        return np.array(
            [
                float(np.sum(diag[topology.ue_of_operator(z)]))
                for z in range(1, topology.num_operators + 1)
            ]
        )
    # bs attribution: restrict the trace to the operator's own rows
    return np.array(
        [
            float(
                np.einsum(
                    "bu,bu->",
                    p[topology.bs_of_operator(z), :],
                    C[topology.bs_of_operator(z), :],
                )
            )
            for z in range(1, topology.num_operators + 1)
        ]
    )


def special_case_C(mode, topology, A=None):
    """Canonical coordination regimes: none (C = A), partial
    (every operator acquires all of its own links), full (everything)."""
    B, U = topology.num_bs, topology.num_ue
    if mode == "none":
        if A is None:
            raise ValueError("mode 'none' requires the association matrix")
        return np.asarray(A).astype(int).copy()
    if mode == "partial":
        same = topology.bs_operators[:, None] == topology.ue_operators[None, :]
        return same.astype(int)
    if mode == "full":
        return np.ones((B, U), dtype=int)
    raise ValueError(f"unknown coordination mode {mode!r}")


def validate_feasible(A, C, topology, config, budget=None, roaming=None,
                      cell_radius_m=None):
    """Check every structural constraint; returns a list of violations.

    Checks: binary entries; unique serving BS per UE; per-BS load at most
    the antenna count; no cross-operator serving unless roaming is on;
    serving implies coordinated (A <= C); zero-gain and over-radius links
    never serve; per-operator cost within budget.
    """
    A = np.asarray(A)
    C = np.asarray(C)
    budget = config.max_budget if budget is None else budget
    roaming = config.roaming if roaming is None else roaming
    cell_radius_m = config.cell_radius_m if cell_radius_m is None else cell_radius_m
    violations = []
    if A.shape != (topology.num_bs, topology.num_ue) or C.shape != A.shape:
        return [f"shape mismatch: A {A.shape}, C {C.shape}"]
    for name, m in (("A", A), ("C", C)):
        if not np.isin(m, (0, 1)).all():
            violations.append(f"{name} is not binary")
    col_sums = A.sum(axis=0)
    for u in np.flatnonzero(col_sums != 1):
        violations.append(f"UE {u} has {col_sums[u]} serving BSs (need exactly 1)")
    row_sums = A.sum(axis=1)
    for b in np.flatnonzero(row_sums > config.n_bs_antennas):
        violations.append(
            f"BS {b} serves {row_sums[b]} UEs > {config.n_bs_antennas} antennas"
        )
    if not roaming:
        cross = (topology.bs_operators[:, None] != topology.ue_operators[None, :]) & (
            A == 1
        )
        for b, u in zip(*np.nonzero(cross)):
            violations.append(f"UE {u} served across operators by BS {b}")
    if np.any(A > C):
        for b, u in zip(*np.nonzero(A > C)):
            violations.append(f"serving link ({b},{u}) not coordinated (A > C)")
    dist = topology.distances()
    bad = (A == 1) & ((dist > cell_radius_m) | (topology.pathloss_matrix == 0))
    for b, u in zip(*np.nonzero(bad)):
        violations.append(f"serving link ({b},{u}) blocked or beyond cell radius")
    penalties = PenaltyConfig.from_sim_config(config)
    p0 = template_penalty(topology, penalties)
    p = effective_penalty(p0, A, penalties.serve_penalty)
    costs = all_costs(C, p, topology, penalties.attribution)
    for z, cost in enumerate(costs, start=1):
        if cost > budget + 1e-9:
            violations.append(f"operator {z} cost {cost} exceeds budget {budget}")
    return violations


def is_feasible(A, C, topology, config, **kwargs):
    return not validate_feasible(A, C, topology, config, **kwargs)
