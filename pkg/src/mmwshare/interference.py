"""Received power, interference decomposition, rates, and utilities.

For a served UE the received interference splits into three sums: other
streams of the serving BS (intra-cell), other BSs of the same operator
(inter-cell), and BSs of the other operators (inter-operator). Rates are
Shannon capacities over the operator bandwidth, long-term rates are
sample means over independent channel realizations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from mmwshare import channel as chan
from mmwshare.beamforming import build_state

RATE_FLOOR_BPS = 1.0  # keeps the log-utility finite for starved UEs

CSV_HEADER = ["ci_index", "ue_id", "serving_bs", "rate_bps", "i1", "i2", "i3"]


@dataclass(frozen=True)
class RateReport:
    """Per-UE link quality of one realization (or a K-draw average)."""

    serving_bs: np.ndarray  # (U,)
    rx_power: np.ndarray  # (U,) watts
    i1: np.ndarray  # intra-cell interference, watts
    i2: np.ndarray  # inter-cell (same operator)
    i3: np.ndarray  # inter-operator
    rate_bps: np.ndarray  # (U,)

    @property
    def num_ue(self):
        return len(self.rate_bps)

    def normalized_interference(self, u):
        """(I1, I2, I3) divided by the received power of UE u."""
        if self.rx_power[u] == 0:
            return np.zeros(3)
        return np.array([self.i1[u], self.i2[u], self.i3[u]]) / self.rx_power[u]

    def write_csv(self, path, ci_index=0, mode="w"):
        with open(path, mode, newline="") as fh:
            writer = csv.writer(fh)
            if mode == "w":
                writer.writerow(CSV_HEADER)
            for u in range(self.num_ue):
                writer.writerow(
                    [
                        ci_index,
                        u,
                        int(self.serving_bs[u]),
                        repr(float(self.rate_bps[u])),
                        repr(float(self.i1[u])),
                        repr(float(self.i2[u])),
                        repr(float(self.i3[u])),
                    ]
                )


def received_power(u, state, realization):
    """Signal power of UE u's own stream from its serving BS, in watts."""
    b = state.serving_bs[u]
    if b < 0:
        raise ValueError(f"UE {u} has no serving BS")
    j = state.served[b].index(u)
    row = state.combiners[u].conj() @ realization.matrices[b, u]
    return state.lambdas[b] * float(np.abs(row @ state.tx_vectors[b][:, j]) ** 2)


def intra_cell_interference(u, state, realization):
    """Power of the serving BS's other streams at UE u, in watts."""
    b = state.serving_bs[u]
    if b < 0:
        raise ValueError(f"UE {u} has no serving BS")
    row = state.combiners[u].conj() @ realization.matrices[b, u]
    powers = np.abs(row @ state.tx_vectors[b]) ** 2
    j = state.served[b].index(u)
    return state.lambdas[b] * float(np.sum(powers) - powers[j])


def _foreign_interference(u, state, realization, topology, same_operator):
    b = state.serving_bs[u]
    z = topology.ue_operators[u]
    total = 0.0
    for i in range(topology.num_bs):
        if i == b or state.lambdas[i] == 0.0:
            continue
        if (topology.bs_operators[i] == z) != same_operator:
            continue
        row = state.combiners[u].conj() @ realization.matrices[i, u]
        total += state.lambdas[i] * float(np.sum(np.abs(row @ state.tx_vectors[i]) ** 2))
    return total


def inter_cell_interference(u, state, realization, topology):
    """Power from the other BSs of UE u's own operator, in watts."""
    return _foreign_interference(u, state, realization, topology, same_operator=True)


def inter_operator_interference(u, state, realization, topology):
    """Power from the BSs of all other operators, in watts."""
    return _foreign_interference(u, state, realization, topology, same_operator=False)


def instantaneous_rate(sinr, bandwidth_hz):
    """Shannon rate in bit/s over the operator bandwidth."""
    return bandwidth_hz * np.log2(1.0 + sinr)


def evaluate_realization(topology, config, realization, A, C) -> RateReport:
    """Beamform one realization under (A, C) and measure every UE."""
    state = build_state(topology, config, realization, A, C)
    num_ue = topology.num_ue
    rx = np.zeros(num_ue)
    i1 = np.zeros(num_ue)
    i2 = np.zeros(num_ue)
    i3 = np.zeros(num_ue)
    rate = np.zeros(num_ue)
    for u in range(num_ue):
        b = state.serving_bs[u]
        if b < 0:
            raise ValueError(f"UE {u} has no serving BS")
        w_u = state.combiners[u]
        z = topology.ue_operators[u]
        # projected channel rows from every BS toward this UE
        for i in range(topology.num_bs):
            if state.lambdas[i] == 0.0:
                continue
            row = w_u.conj() @ realization.matrices[i, u]
            powers = np.abs(row @ state.tx_vectors[i]) ** 2
            if i == b:
                j = state.served[b].index(u)
                rx[u] = state.lambdas[b] * float(powers[j])
                i1[u] = state.lambdas[b] * float(np.sum(powers) - powers[j])
            elif topology.bs_operators[i] == z:
                i2[u] += state.lambdas[i] * float(np.sum(powers))
            else:
                i3[u] += state.lambdas[i] * float(np.sum(powers))
        w_z = topology.ue_bandwidth(u)
        noise = w_z * config.noise_psd_w_hz
        sinr = rx[u] / (i1[u] + i2[u] + i3[u] + noise)
        rate[u] = instantaneous_rate(sinr, w_z)
    return RateReport(
        serving_bs=state.serving_bs, rx_power=rx, i1=i1, i2=i2, i3=i3, rate_bps=rate
    )


def long_term_report(topology, config, A, C, seed, num_realizations=None) -> RateReport:
    """Average measurements over K independent realizations.

    Realization k draws from the deterministic per-index rng stream, so
    identical (seed, K) always reproduce the same report.
    """
    k = num_realizations or config.num_realizations
    acc = None
    serving = None
    for idx in range(k):
        rng = chan.realization_rng(seed, idx)
        real = chan.sample_all(topology, config, rng)
        rep = evaluate_realization(topology, config, real, A, C)
        fields = np.stack([rep.rx_power, rep.i1, rep.i2, rep.i3, rep.rate_bps])
        acc = fields if acc is None else acc + fields
        serving = rep.serving_bs
    acc /= k
    return RateReport(
        serving_bs=serving,
        rx_power=acc[0],
        i1=acc[1],
        i2=acc[2],
        i3=acc[3],
        rate_bps=acc[4],
    )


def operator_utility(z, rates_bps, topology):
    """Sum of log rates (natural log) over the operator's UEs."""
    ues = topology.ue_of_operator(z)
    return float(np.sum(np.log(np.maximum(np.asarray(rates_bps)[ues], RATE_FLOOR_BPS))))


def total_utility(rates_bps, topology, weights=None):
    """Weighted sum of per-operator log utilities (uniform by default)."""
    z_count = topology.num_operators
    if weights is None:
        weights = np.full(z_count, 1.0 / z_count)
    return float(
        sum(
            weights[z - 1] * operator_utility(z, rates_bps, topology)
            for z in range(1, z_count + 1)
        )
    )
