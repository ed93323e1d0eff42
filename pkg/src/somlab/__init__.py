"""Self-organizing map laboratory.

Simulation of the Kohonen process, its mean vector field and equilibria,
organization experiments, quantization theory of the 0-neighbor case and
SOM-based maps of categorical data.
"""

from .engine import GainSchedule, Metric, NetworkState, run, step, winner
from .stimuli import Discrete, Product, UniformBox, linear_density, truncated_gaussian
from .topology import Lattice, Neighborhood

__version__ = "0.1.0"

__all__ = [
    "Lattice",
    "Neighborhood",
    "UniformBox",
    "Product",
    "Discrete",
    "linear_density",
    "truncated_gaussian",
    "NetworkState",
    "GainSchedule",
    "Metric",
    "run",
    "step",
    "winner",
]
