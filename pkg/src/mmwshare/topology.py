"""Network geometry: operators, node placement, path loss, LoS angles.

All positions are 2-D in meters. Path loss is stored as a linear power
gain matrix of shape (num_bs, num_ue); a zero entry marks a blocked link
(outside the interference ball or across Manhattan avenues).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

TOY_BS_POSITIONS = np.array(
    [(100.0, 90.0), (175.0, 90.0), (140.0, 125.0), (200.0, 150.0)]
)
TOY_BS_OPERATORS = np.array([1, 1, 2, 2])
TOY_UE_POSITIONS = np.array(
    [
        (20.0, 10.0),
        (45.0, 135.0),
        (165.0, 140.0),
        (200.0, 20.0),
        (120.0, 55.0),
        (98.0, 119.0),
        (135.0, 85.0),
        (220.0, 107.0),
        (185.0, 185.0),
        (230.0, 125.0),
    ]
)
TOY_UE_OPERATORS = np.array([1, 1, 1, 1, 1, 2, 2, 2, 2, 2])


class ConfigError(ValueError):
    """Raised when a configuration value violates its invariants."""


@dataclass
class SimConfig:
    """Physical and control parameters shared across the simulator.

    Powers are in watts, the noise PSD in W/Hz, bandwidths in Hz. The RZF
    regularizer ``rzf_delta`` is relative to the largest singular value of
    the effective-channel matrix it regularizes.
    """

    n_bs_antennas: int = 8
    n_ue_antennas: int = 2
    tx_power_w: float = 1.0  # 30 dBm
    noise_psd_w_hz: float = 10 ** (-20.4)  # -174 dBm/Hz
    bandwidth_hz: float = 1e9
    carrier_hz: float = 28e9
    rzf_delta: float = 1e-6
    num_paths: int = 3
    num_realizations: int = 100
    pathloss_intercept_db: float = 61.4
    pathloss_exponent: float = 2.0
    # coordination penalties and budget
    serve_penalty: float = 1.0  # p_b, same for every BS
    intra_penalty: float = 10.0
    inter_penalty: float = 100.0
    max_budget: float = 120.0  # P_z^max, same for every operator
    attribution: str = "ue"  # "ue" or "bs"
    roaming: bool = False
    cell_radius_m: float = 150.0
    # hybrid-loop schedule
    ci_duration_s: float = 1e-3
    training_period_initial: int = 10
    training_warmup_cis: int = 2000
    training_period_late: int = 50
    epsilon0: float = 0.5
    epsilon_decay: float = 0.9
    epsilon_decay_period: int = 1000
    confidence_visits: int = 5
    confidence_margin: float = 0.002
    # learned rate models
    pretrain_samples: int = 500
    pretrain_epochs: int = 200
    update_epochs: int = 3
    seed: int = 0

    def validate(self):
        positive = [
            ("n_bs_antennas", self.n_bs_antennas),
            ("n_ue_antennas", self.n_ue_antennas),
            ("tx_power_w", self.tx_power_w),
            ("noise_psd_w_hz", self.noise_psd_w_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("rzf_delta", self.rzf_delta),
            ("num_paths", self.num_paths),
            ("num_realizations", self.num_realizations),
            ("max_budget", self.max_budget),
            ("cell_radius_m", self.cell_radius_m),
        ]
        for name, value in positive:
            if value <= 0:
                raise ConfigError(f"{name} must be strictly positive, got {value}")
        if not 0.0 <= self.epsilon0 <= 1.0:
            raise ConfigError(f"epsilon0 must lie in [0, 1], got {self.epsilon0}")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ConfigError("epsilon_decay must lie in (0, 1]")
        if not 0.0 <= self.serve_penalty < self.intra_penalty < self.inter_penalty:
            raise ConfigError(
                "penalties must satisfy 0 <= serve < intra < inter, got "
                f"({self.serve_penalty}, {self.intra_penalty}, {self.inter_penalty})"
            )
        if self.attribution not in ("ue", "bs"):
            raise ConfigError(f"attribution must be 'ue' or 'bs', got {self.attribution!r}")
        return self


def pathloss(distance, config: SimConfig):
    """Linear power gain of a link of the given length in meters.

    Power-law model in the dB domain: PL(dB) = intercept + 10 n log10(d),
    defaulting to the 28 GHz LoS fit (61.4 + 20 log10 d).
    """
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise ValueError("pathloss undefined for co-located nodes (distance <= 0)")
    pl_db = config.pathloss_intercept_db + 10.0 * config.pathloss_exponent * np.log10(
        distance
    )
    return 10.0 ** (-pl_db / 10.0)


@dataclass(frozen=True)
class NetworkTopology:
    """Immutable geometric ground truth of a multi-operator deployment.

    ``pathloss_matrix[b, u]`` is the linear gain of link (b, u), zero if
    the link is blocked. ``bs_angles``/``ue_angles`` hold the LoS angle of
    departure at the BS and angle of arrival at the UE, both in (-pi, pi].
    """

    num_operators: int
    bs_positions: np.ndarray  # (B, 2)
    bs_operators: np.ndarray  # (B,), values in 1..Z
    ue_positions: np.ndarray  # (U, 2)
    ue_operators: np.ndarray  # (U,)
    carrier_hz: float
    bandwidth_hz: float
    pathloss_matrix: np.ndarray  # (B, U)
    bs_angles: np.ndarray  # (B, U)
    ue_angles: np.ndarray  # (B, U)
    op_bandwidth_hz: np.ndarray = field(default=None)  # (Z,)

    def __post_init__(self):
        if self.op_bandwidth_hz is None:
            object.__setattr__(
                self,
                "op_bandwidth_hz",
                np.full(self.num_operators, self.bandwidth_hz),
            )
        for ops in (self.bs_operators, self.ue_operators):
            if np.any((ops < 1) | (ops > self.num_operators)):
                raise ValueError("operator ids must lie in [1, num_operators]")
        for name in ("bs_positions", "bs_operators", "ue_positions",
                     "ue_operators", "pathloss_matrix", "bs_angles", "ue_angles",
                     "op_bandwidth_hz"):
            getattr(self, name).setflags(write=False)

    @property
    def num_bs(self):
        return len(self.bs_positions)

    @property
    def num_ue(self):
        return len(self.ue_positions)

    def bs_of_operator(self, z):
        return np.flatnonzero(self.bs_operators == z)

    def ue_of_operator(self, z):
        return np.flatnonzero(self.ue_operators == z)

    def distances(self):
        """Euclidean BS-UE distance matrix of shape (B, U)."""
        diff = self.bs_positions[:, None, :] - self.ue_positions[None, :, :]
        return np.linalg.norm(diff, axis=2)

    def ue_bandwidth(self, u):
        return self.op_bandwidth_hz[self.ue_operators[u] - 1]

    def to_json(self):
        """Serialize to a structured text document."""
        doc = {
            "num_operators": int(self.num_operators),
            "carrier_hz": self.carrier_hz,
            "bandwidth_hz": self.bandwidth_hz,
            "nodes": [
                {
                    "id": int(i),
                    "type": "bs",
                    "position": [float(x) for x in self.bs_positions[i]],
                    "operator": int(self.bs_operators[i]),
                }
                for i in range(self.num_bs)
            ]
            + [
                {
                    "id": int(u),
                    "type": "ue",
                    "position": [float(x) for x in self.ue_positions[u]],
                    "operator": int(self.ue_operators[u]),
                }
                for u in range(self.num_ue)
            ],
            "pathloss_matrix": self.pathloss_matrix.tolist(),
            "bs_angles": self.bs_angles.tolist(),
            "ue_angles": self.ue_angles.tolist(),
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        bs = [n for n in doc["nodes"] if n["type"] == "bs"]
        ue = [n for n in doc["nodes"] if n["type"] == "ue"]
        bs.sort(key=lambda n: n["id"])
        ue.sort(key=lambda n: n["id"])
        return cls(
            num_operators=doc["num_operators"],
            bs_positions=np.array([n["position"] for n in bs]),
            bs_operators=np.array([n["operator"] for n in bs]),
            ue_positions=np.array([n["position"] for n in ue]),
            ue_operators=np.array([n["operator"] for n in ue]),
            carrier_hz=doc["carrier_hz"],
            bandwidth_hz=doc["bandwidth_hz"],
            pathloss_matrix=np.array(doc["pathloss_matrix"]),
            bs_angles=np.array(doc["bs_angles"]),
            ue_angles=np.array(doc["ue_angles"]),
        )


def _los_angles(bs_positions, ue_positions):
    diff = ue_positions[None, :, :] - bs_positions[:, None, :]
    bs_angles = np.arctan2(diff[..., 1], diff[..., 0])
    ue_angles = np.arctan2(-diff[..., 1], -diff[..., 0])
    return bs_angles, ue_angles


def _assemble(num_operators, bs_positions, bs_operators, ue_positions,
              ue_operators, config, blocked=None):
    bs_angles, ue_angles = _los_angles(bs_positions, ue_positions)
    diff = bs_positions[:, None, :] - ue_positions[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    gains = pathloss(dist, config)
    if blocked is not None:
        gains = np.where(blocked, 0.0, gains)
    return NetworkTopology(
        num_operators=num_operators,
        bs_positions=bs_positions,
        bs_operators=bs_operators,
        ue_positions=ue_positions,
        ue_operators=ue_operators,
        carrier_hz=config.carrier_hz,
        bandwidth_hz=config.bandwidth_hz,
        pathloss_matrix=gains,
        bs_angles=bs_angles,
        ue_angles=ue_angles,
    )


def build_toy_topology(config: SimConfig | None = None) -> NetworkTopology:
    """Two operators, 2 BSs and 5 UEs each, fixed illustrative layout."""
    config = config or SimConfig()
    return _assemble(
        2,
        TOY_BS_POSITIONS.copy(),
        TOY_BS_OPERATORS.copy(),
        TOY_UE_POSITIONS.copy(),
        TOY_UE_OPERATORS.copy(),
        config,
    )


def build_manhattan_topology(rng, config: SimConfig | None = None,
                             ues_per_operator_per_avenue: int = 20) -> NetworkTopology:
    """Two parallel avenues, 14 BSs per operator at 75 m inter-BS spacing.

    Each avenue carries 14 BSs (operators interleaved) and the UEs of both
    operators are placed uniformly at random inside the avenue corridor.
    Buildings block everything between the avenues, so cross-avenue links
    carry zero gain.
    """
    config = config or SimConfig()
    spacing = 75.0
    avenue_y = (0.0, 300.0)
    corridor_half_width = 10.0
    n_per_avenue = 14  # 7 per operator, interleaved

    bs_positions, bs_operators, bs_avenue = [], [], []
    for a, y in enumerate(avenue_y):
        for k in range(n_per_avenue):
            bs_positions.append((k * spacing, y))
            bs_operators.append(1 + k % 2)
            bs_avenue.append(a)
    bs_positions = np.array(bs_positions)
    bs_operators = np.array(bs_operators)
    bs_avenue = np.array(bs_avenue)
    x_max = (n_per_avenue - 1) * spacing

    ue_positions, ue_operators, ue_avenue = [], [], []
    for a, y in enumerate(avenue_y):
        for z in (1, 2):
            xs = rng.uniform(0.0, x_max, ues_per_operator_per_avenue)
            ys = y + rng.uniform(
                -corridor_half_width, corridor_half_width, ues_per_operator_per_avenue
            )
            for x, yy in zip(xs, ys):
                ue_positions.append((x, yy))
                ue_operators.append(z)
                ue_avenue.append(a)
    ue_positions = np.array(ue_positions)
    ue_operators = np.array(ue_operators)
    ue_avenue = np.array(ue_avenue)

    blocked = bs_avenue[:, None] != ue_avenue[None, :]
    return _assemble(
        2, bs_positions, bs_operators, ue_positions, ue_operators, config,
        blocked=blocked,
    )


def apply_interference_ball(topology: NetworkTopology, d_max: float) -> NetworkTopology:
    """Zero the gain of every link longer than ``d_max`` meters."""
    if d_max <= 0:
        raise ValueError("d_max must be positive")
    gains = np.where(topology.distances() > d_max, 0.0, topology.pathloss_matrix)
    return replace(topology, pathloss_matrix=gains)


def add_ues(topology: NetworkTopology, positions, operators,
            config: SimConfig) -> NetworkTopology:
    """Return a topology with extra UEs appended (dynamic-UE events).

    Blocked-link structure of the existing columns is preserved; the new
    columns get plain power-law gains.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    operators = np.atleast_1d(np.asarray(operators))
    new_ue_positions = np.vstack([topology.ue_positions, positions])
    new_ue_operators = np.concatenate([topology.ue_operators, operators])
    bs_angles, ue_angles = _los_angles(topology.bs_positions, new_ue_positions)
    dist = np.linalg.norm(
        topology.bs_positions[:, None, :] - positions[None, :, :], axis=2
    )
    new_gains = np.hstack([topology.pathloss_matrix, pathloss(dist, config)])
    return replace(
        topology,
        ue_positions=new_ue_positions,
        ue_operators=new_ue_operators,
        pathloss_matrix=new_gains,
        bs_angles=bs_angles,
        ue_angles=ue_angles,
    )


def remove_ue(topology: NetworkTopology, u: int) -> NetworkTopology:
    """Return a topology with UE ``u`` removed (columns re-indexed)."""
    keep = np.arange(topology.num_ue) != u
    return replace(
        topology,
        ue_positions=topology.ue_positions[keep],
        ue_operators=topology.ue_operators[keep],
        pathloss_matrix=topology.pathloss_matrix[:, keep],
        bs_angles=topology.bs_angles[:, keep],
        ue_angles=topology.ue_angles[:, keep],
    )
