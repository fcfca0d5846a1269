"""Multi-operator mmWave spectrum sharing: simulation and optimization.

The package is organized bottom-up:

- ``topology``     network geometry, path loss, interference ball
- ``channel``      geometric narrowband channel sampling, ULA responses
- ``beamforming``  analog combiners, RZF precoders, power normalization
- ``interference`` received power, interference terms, rates, utilities
- ``coordination`` association/coordination matrices, penalties, feasibility
- ``optimizer``    block-coordinate search over (A, C), oracle, baselines
- ``rate_model``   learned per-UE rate approximators and their initialization
- ``hybrid``       the closed control loop with training/operation frames
- ``cli``          scenario runner
"""

from mmwshare.topology import (
    NetworkTopology,
    SimConfig,
    build_manhattan_topology,
    build_toy_topology,
    pathloss,
)

__all__ = [
    "NetworkTopology",
    "SimConfig",
    "build_toy_topology",
    "build_manhattan_topology",
    "pathloss",
]

__version__ = "0.1.0"
