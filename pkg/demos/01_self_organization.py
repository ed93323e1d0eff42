"""Self-organization of a 1-D string of units.

A string of 10 units fed with uniform inputs on [0, 1] and a constant gain
becomes monotone after a finite number of steps, and stays monotone once
it is.  On a square grid the analogous doubly increasing set is entered
but can also be left again.

Run with ``python3 demos/01_self_organization.py``.
"""

import numpy as np

from somlab import Lattice, Neighborhood, NetworkState, UniformBox, GainSchedule, run
from somlab import meanfield
from somlab.ordering import classify_1d, exit_time_experiment, hitting_time_experiment

U = UniformBox(0.0, 1.0)

# %% one trajectory, watched every 200 steps
rng = np.random.default_rng(0)
start = NetworkState.random(Lattice.string(10), U, rng)
res = run(start, U, GainSchedule.constant(0.1), Neighborhood.step(1), 3000, rng,
          observers={"status": lambda s: classify_1d(s).status}, stride=200)
for t, status in res.observations["status"]:
    print(f"t={t:5d}  {status}")

# %% hitting time of the ordered set over 50 trials
rep = hitting_time_experiment(Lattice.string(10), U, Neighborhood.step(1), 0.1,
                              trials=50, budget=10 ** 6, seed=1)
print("\nhitting time summary:", rep.summary())

# %% once ordered, always ordered (checked after every single step)
rep = exit_time_experiment(Lattice.string(10), U, Neighborhood.step(1), 0.1,
                           trials=10, budget=10 ** 5, seed=2, start="ordered")
print("exits from the ordered string:", rep.count_finite)

# %% the planar grid can leave its organized set
square = UniformBox([0, 0], [1, 1])
grid_start = meanfield.grid_state([[0.3, 0.5, 0.7]] * 2)
rep = exit_time_experiment(Lattice.grid(3, 3), square, Neighborhood.indicator8(), 0.2,
                           trials=2000, budget=1000, seed=3, start=grid_start)
print(f"exits from the doubly increasing grid set: {rep.count_finite} of {rep.trials} trials")
