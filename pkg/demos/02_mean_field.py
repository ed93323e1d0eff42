"""Average dynamics: the mean vector field h and its equilibria.

Averaged over inputs, one step moves the state by ``-eps * h(m)``.  The
zeros of ``h`` are the candidate limits of decreasing-gain runs; their
stability comes from the spectrum of ``-grad h``.

Run with ``python3 demos/02_mean_field.py``.
"""

import numpy as np

from somlab import Lattice, Neighborhood, NetworkState, UniformBox
from somlab import meanfield as mf
from somlab.stimuli import truncated_gaussian

U = UniformBox(0.0, 1.0)

# %% three units, two neighbors: the equilibrium (0.3, 0.5, 0.7)
field = mf.MeanField(Lattice.string(3), Neighborhood.step(1), U)
rep = mf.solve_equilibrium(field, NetworkState.from_values([0.1, 0.4, 0.95]))
print("equilibrium:", rep.state[:, 0], "residual:", rep.residual)
print("flow eigenvalues:", np.round(rep.eigenvalues.real, 6), "->", rep.verdict)
print("cooperative:", rep.cooperative)

# the same point from the linear system of the uniform case
print("linear system:", mf.uniform_limit_linear_system(3, Neighborhood.step(1)).weights[:, 0])

# %% the ODE dm/dt = -h(m) from a distorted start
flow = mf.ode_flow(field, np.array([0.05, 0.1, 0.9]), 30.0)
for t, w in list(zip(flow.times, flow.states))[::20]:
    print(f"t={t:5.1f}  m={np.round(w[:, 0], 5)}")

# %% a non-uniform law moves the equilibrium toward the mode
g = mf.MeanField(Lattice.string(5), Neighborhood.step(1), truncated_gaussian())
print("\ntruncated gaussian, 5 units:", np.round(mf.solve_equilibrium(g, np.linspace(0.1, 0.9, 5)).state[:, 0], 6))

# %% grid equilibria built from 1-D ones
for row in mf.grid_stability_sweep([(2, 2), (3, 3), (4, 2)], Neighborhood.indicator0()):
    print(f"{row['n1']}x{row['n2']} indicator-0: max real {row['max_real_eig']:+.3e}  {row['verdict']}")

# %% thin noise in a second dimension does not destabilize the 1-D equilibrium
ds = mf.dimension_selection_experiment([0.3, 0.5, 0.7], Neighborhood.step(1), U, 0.01)
print("\naugmented spectrum:", np.round(ds.eigenvalues.real, 4), "->", ds.verdict)
