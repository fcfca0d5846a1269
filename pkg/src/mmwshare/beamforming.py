"""Analog combiners, effective channels, RZF precoders, power scaling.

Per coherence interval the receive side picks a steering vector aligned
with the strongest path of the serving link (analog combining); the
transmit side builds a regularized pseudo-inverse of the stacked
effective channels of all coordinated UEs and normalizes radiated power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mmwshare.channel import ula_response


class UnservableLinkError(RuntimeError):
    """The serving link carries no energy (all path gains zero)."""


def analog_combiner(gains, aoa, n_ue_antennas):
    """Receive beamformer aimed at the strongest path of the serving link.

    ``gains``/``aoa`` are the per-path complex gains and arrival angles.
    Ties in |gain| break toward the lowest path index.
    """
    mags = np.abs(np.asarray(gains))
    if not np.any(mags > 0):
        raise UnservableLinkError("unservable link: all path gains are zero")
    best = int(np.argmax(mags))  # argmax returns the first maximal index
    return ula_response(aoa[best], n_ue_antennas)


def effective_channel(combiner, h):
    """Project the channel onto the UE combiner: returns w^H H (row, N_BS)."""
    return combiner.conj() @ h


def rzf_precoder(hbar, delta):
    """Regularized pseudo-inverse precoder for stacked effective channels.

    ``hbar`` is M x N_BS (one row per coordinated UE). The regularizer is
    delta * sigma_max(hbar) times a rectangular identity, so ``delta`` acts
    relative to the matrix scale. Returns the N_BS x M matrix whose column
    m precodes the UE occupying row m.
    """
    hbar = np.asarray(hbar, dtype=complex)
    if hbar.ndim != 2:
        raise ValueError("hbar must be a 2-D matrix")
    m, n_bs = hbar.shape
    scale = np.linalg.norm(hbar, 2) if np.any(hbar) else 1.0
    reg = delta * scale * np.eye(m, n_bs)
    return np.linalg.pinv(hbar + reg)


def power_normalization(w_b, tx_power_w):
    """Power scale: lambda_b = rho_tx / tr(W W^H)."""
    total = float(np.sum(np.abs(w_b) ** 2))
    if total == 0.0:
        raise ValueError("all-zero precoder cannot be power-normalized")
    return tx_power_w / total


@dataclass(frozen=True)
class BeamformingState:
    """All beamformers of one coherence interval under a fixed (A, C).

    ``combiners[u]`` is the unit-norm receive vector of UE u (None for an
    unserved UE). For each BS b, ``coord_ues[b]`` lists the coordinated
    UEs in ascending id (row order of the effective-channel stack),
    ``precoders[b]`` is the full N_BS x M_b pseudo-inverse, ``served[b]``
    the served UEs, ``tx_vectors[b]`` their precoding columns, and
    ``lambdas[b]`` the power normalizer (0 for a silent BS).
    """

    combiners: list
    coord_ues: list
    effective: list  # per BS: M_b x N_BS stacked effective channels
    precoders: list
    served: list
    tx_vectors: list  # per BS: N_BS x |served[b]|
    lambdas: np.ndarray
    serving_bs: np.ndarray  # per UE: serving BS id or -1


def build_state(topology, config, realization, A, C) -> BeamformingState:
    """Compute combiners and precoders for one realization under (A, C).

    The serving BS of u is the unique b with A[b, u] = 1. Every BS stacks
    the effective channels of its coordinated UEs (C row) in ascending UE
    id and precodes with the regularized pseudo-inverse; served UEs take
    the columns at their row positions. A BS serving no UE stays silent.
    """
    num_bs, num_ue = topology.num_bs, topology.num_ue
    serving_bs = np.full(num_ue, -1, dtype=int)
    combiners = [None] * num_ue
    for u in range(num_ue):
        servers = np.flatnonzero(A[:, u])
        if len(servers) == 0:
            continue
        if len(servers) > 1:
            raise ValueError(f"UE {u} has multiple serving BSs")
        b = int(servers[0])
        serving_bs[u] = b
        combiners[u] = analog_combiner(
            realization.gains[b, u], realization.aoa[b, u], config.n_ue_antennas
        )

    coord_ues, effective, precoders, served, tx_vectors = [], [], [], [], []
    lambdas = np.zeros(num_bs)
    for b in range(num_bs):
        rows = [u for u in range(num_ue) if C[b, u]]
        served_b = [u for u in range(num_ue) if A[b, u]]
        if len(served_b) > config.n_bs_antennas:
            raise ValueError(
                f"BS {b} serves {len(served_b)} UEs > {config.n_bs_antennas} antennas"
            )
        coord_ues.append(rows)
        served.append(served_b)
        if not rows or not served_b:
            effective.append(np.zeros((len(rows), config.n_bs_antennas), dtype=complex))
            precoders.append(np.zeros((config.n_bs_antennas, len(rows)), dtype=complex))
            tx_vectors.append(np.zeros((config.n_bs_antennas, 0), dtype=complex))
            continue
        hbar = np.array(
            [
                effective_channel(combiners[u], realization.matrices[b, u])
                if combiners[u] is not None
                else np.zeros(config.n_bs_antennas, dtype=complex)
                for u in rows
            ]
        )
        p = rzf_precoder(hbar, config.rzf_delta)
        cols = [rows.index(u) for u in served_b]
        w_b = p[:, cols]
        effective.append(hbar)
        precoders.append(p)
        tx_vectors.append(w_b)
        if np.any(w_b):
            lambdas[b] = power_normalization(w_b, config.tx_power_w)
    return BeamformingState(
        combiners=combiners,
        coord_ues=coord_ues,
        effective=effective,
        precoders=precoders,
        served=served,
        tx_vectors=tx_vectors,
        lambdas=lambdas,
        serving_bs=serving_bs,
    )
