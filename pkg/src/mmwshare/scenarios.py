"""Canonical decisions and comparison tables for the 4-BS/10-UE layout.

The fixed association keeps every UE on a strong nearby BS of its own
operator; the three coordination regimes range from serving-links-only
to full cross-operator channel acquisition. ``comparison_table`` scores
them side by side, including the benefit for UE 6 — the UE sitting next
to the other operator's BS 1 and therefore hit hardest by
inter-operator interference.
"""

from __future__ import annotations

import numpy as np

from mmwshare import coordination as coord
from mmwshare.interference import long_term_report
from mmwshare.optimizer import (
    MonteCarloRateEvaluator,
    ObjectiveSpec,
    bcd_optimize,
    closest_bs_baseline,
    strongest_bs_association,
)

# the illustrative association: BS1 {UE1, UE2, UE5}, BS2 {UE3, UE4},
# BS3 {UE6, UE7}, BS4 {UE8, UE9, UE10} (1-based ids)
TOY_ASSIGNMENT = [0, 0, 1, 1, 0, 2, 2, 3, 3, 3]
FOCUS_UE = 5  # UE 6, 0-based

TABLE_HEADER = [
    "scenario",
    "n_bs_antennas",
    "n_ue_antennas",
    "sum_rate_op1_gbps",
    "sum_rate_op2_gbps",
    "min_rate_op1_gbps",
    "min_rate_op2_gbps",
    "ue6_norm_i1",
    "ue6_norm_i2",
    "ue6_norm_i3",
    "cost_op1",
    "cost_op2",
    "ue6_rate_gbps",
    "ue6_improvement_pct",
]


def toy_association(topology):
    A = np.zeros((topology.num_bs, topology.num_ue), dtype=int)
    for u, b in enumerate(TOY_ASSIGNMENT):
        A[b, u] = 1
    return A


def toy_scenario(topology, which):
    """(A, C) for regimes a (C = A), b (one cross-operator bit), c (full)."""
    A = toy_association(topology)
    if which == "a":
        return A, A.copy()
    if which == "b":
        C = A.copy()
        C[0, FOCUS_UE] = 1  # the other operator's close-by BS nulls UE 6
        return A, C
    if which == "c":
        return A, np.ones_like(A)
    raise ValueError(f"unknown scenario {which!r}")


def evaluate_decision(topology, config, A, C, seed=0, num_realizations=None,
                      focus_ue=FOCUS_UE):
    """Long-term performance summary of a fixed decision."""
    report = long_term_report(topology, config, A, C, seed, num_realizations)
    penalties = coord.PenaltyConfig.from_sim_config(config)
    p0 = coord.template_penalty(topology, penalties)
    p = coord.effective_penalty(p0, A, penalties.serve_penalty)
    costs = coord.all_costs(C, p, topology, penalties.attribution)
    out = {
        "rates_bps": report.rate_bps,
        "costs": costs,
        "report": report,
        "focus_ue": focus_ue,
        "focus_norm_interference": report.normalized_interference(focus_ue),
    }
    for z in range(1, topology.num_operators + 1):
        ues = topology.ue_of_operator(z)
        out[f"sum_rate_op{z}_gbps"] = float(report.rate_bps[ues].sum() / 1e9)
        out[f"min_rate_op{z}_gbps"] = float(report.rate_bps[ues].min() / 1e9)
    return out


def _row(name, config, ev, base_focus_rate):
    focus_rate = float(ev["rates_bps"][ev["focus_ue"]])
    improvement = (
        0.0
        if base_focus_rate is None
        else 100.0 * (focus_rate - base_focus_rate) / base_focus_rate
    )
    i1, i2, i3 = (float(x) for x in ev["focus_norm_interference"])
    return [
        name,
        config.n_bs_antennas,
        config.n_ue_antennas,
        repr(ev["sum_rate_op1_gbps"]),
        repr(ev["sum_rate_op2_gbps"]),
        repr(ev["min_rate_op1_gbps"]),
        repr(ev["min_rate_op2_gbps"]),
        repr(i1),
        repr(i2),
        repr(i3),
        repr(float(ev["costs"][0])),
        repr(float(ev["costs"][1])),
        repr(focus_rate / 1e9),
        repr(improvement),
    ]


def comparison_table(topology, config, seed=0, num_realizations=None,
                     budget=None, include_optimal=True, include_roaming=False):
    """Rows comparing coordination regimes (and optional optimized runs)."""
    rows = []
    base = None
    base_rate = None
    for which in ("a", "b", "c"):
        A, C = toy_scenario(topology, which)
        ev = evaluate_decision(topology, config, A, C, seed, num_realizations)
        if which == "a":
            base = ev
            base_rate = float(ev["rates_bps"][FOCUS_UE])
        rows.append(_row(which, config, ev, None if which == "a" else base_rate))
    if include_optimal:
        evaluator = MonteCarloRateEvaluator(
            topology, config, seed=seed, num_realizations=num_realizations
        )
        spec = ObjectiveSpec(topology, config, evaluator, budget=budget)
        a0 = strongest_bs_association(topology, config)
        A, C, _ = bcd_optimize(a0, a0.copy(), spec)
        ev = evaluate_decision(topology, config, A, C, seed, num_realizations)
        rows.append(_row("optimal", config, ev, base_rate))
        if include_roaming:
            spec_r = ObjectiveSpec(
                topology, config, evaluator, budget=budget, roaming=True
            )
            a0r = strongest_bs_association(topology, config, roaming=True)
            Ar, Cr, _ = bcd_optimize(a0r, a0r.copy(), spec_r)
            evr = evaluate_decision(topology, config, Ar, Cr, seed, num_realizations)
            rows.append(_row("roaming-optimal", config, evr, base_rate))
    return rows


def baseline_summary(topology, config, seed=0, num_realizations=None):
    A, C = closest_bs_baseline(topology, config)
    ev = evaluate_decision(topology, config, A, C, seed, num_realizations)
    ev["A"], ev["C"] = A, C
    return ev
