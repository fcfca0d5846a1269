"""Narrowband geometric channel sampling and ULA steering vectors.

A link (b, u) is modeled as a sum of a few planar paths. The first path
is line-of-sight with the geometric departure/arrival angles from the
topology; additional paths draw their angles uniformly from the front
half-plane. Each path gain is zero-mean circular complex Gaussian with
power equal to the link's linear path-loss gain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def ula_response(theta, n_antennas):
    """Unit-norm steering vector of a half-wavelength ULA.

    Entry n (0-based) is exp(-1j * n * pi * sin(theta)) / sqrt(N).
    """
    if n_antennas < 1:
        raise ValueError("antenna count must be >= 1")
    n = np.arange(n_antennas)
    return np.exp(-1j * np.pi * n * np.sin(theta)) / np.sqrt(n_antennas)


def _matrix_from_paths(gains, aod, aoa, n_bs, n_ue):
    """Assemble H (N_UE x N_BS) from per-path gains and angles."""
    num_paths = len(gains)
    h = np.zeros((n_ue, n_bs), dtype=complex)
    for n in range(num_paths):
        a_ue = ula_response(aoa[n], n_ue)
        a_bs = ula_response(aod[n], n_bs)
        h += gains[n] * np.outer(a_ue, a_bs.conj())
    return np.sqrt(n_bs * n_ue / num_paths) * h


@dataclass(frozen=True)
class ChannelRealization:
    """One small-scale fading draw for every (BS, UE) pair.

    ``matrices[b, u]`` is the N_UE x N_BS channel; ``gains``, ``aod``,
    ``aoa`` have shape (B, U, num_paths). Blocked links (zero path loss)
    carry zero gains and a zero matrix.
    """

    matrices: np.ndarray  # (B, U, N_UE, N_BS) complex
    gains: np.ndarray  # (B, U, P) complex
    aod: np.ndarray  # (B, U, P) departure angle at BS
    aoa: np.ndarray  # (B, U, P) arrival angle at UE

    @property
    def num_paths(self):
        return self.gains.shape[2]

    def matrix(self, b, u):
        return self.matrices[b, u]

    def rebuild_matrix(self, b, u):
        """Reassemble H_bu from the stored path metadata (bit-exact)."""
        n_ue, n_bs = self.matrices.shape[2:]
        if not np.any(self.gains[b, u]):
            return np.zeros((n_ue, n_bs), dtype=complex)
        return _matrix_from_paths(self.gains[b, u], self.aod[b, u],
                                  self.aoa[b, u], n_bs, n_ue)


def sample_channel(b, u, topology, config, rng):
    """Draw one realization of link (b, u); returns (H, gains, aod, aoa)."""
    num_paths = config.num_paths
    n_bs, n_ue = config.n_bs_antennas, config.n_ue_antennas
    link_gain = topology.pathloss_matrix[b, u]
    if link_gain == 0.0:
        zeros = np.zeros(num_paths)
        return (np.zeros((n_ue, n_bs), dtype=complex),
                zeros.astype(complex), zeros, zeros)
    sigma = np.sqrt(link_gain / 2.0)
    gains = rng.normal(0.0, sigma, num_paths) + 1j * rng.normal(0.0, sigma, num_paths)
    aod = np.empty(num_paths)
    aoa = np.empty(num_paths)
    aod[0] = topology.bs_angles[b, u]
    aoa[0] = topology.ue_angles[b, u]
    if num_paths > 1:
        aod[1:] = rng.uniform(-np.pi / 2, np.pi / 2, num_paths - 1)
        aoa[1:] = rng.uniform(-np.pi / 2, np.pi / 2, num_paths - 1)
    return _matrix_from_paths(gains, aod, aoa, n_bs, n_ue), gains, aod, aoa


def sample_all(topology, config, rng) -> ChannelRealization:
    """Draw an independent realization for every (b, u) pair.

    Links are sampled in (b, u) row-major order from a single rng stream,
    so a fixed seed reproduces the realization exactly.
    """
    num_bs, num_ue = topology.num_bs, topology.num_ue
    n_bs, n_ue, p = config.n_bs_antennas, config.n_ue_antennas, config.num_paths
    matrices = np.zeros((num_bs, num_ue, n_ue, n_bs), dtype=complex)
    gains = np.zeros((num_bs, num_ue, p), dtype=complex)
    aod = np.zeros((num_bs, num_ue, p))
    aoa = np.zeros((num_bs, num_ue, p))
    for b in range(num_bs):
        for u in range(num_ue):
            matrices[b, u], gains[b, u], aod[b, u], aoa[b, u] = sample_channel(
                b, u, topology, config, rng
            )
    return ChannelRealization(matrices=matrices, gains=gains, aod=aod, aoa=aoa)


def realization_rng(seed, ci_index):
    """Deterministic per-CI rng stream (stream index = CI index)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                        spawn_key=(ci_index,)))
