"""Maps of categorical data.

Two variables with two blocks of associated modalities: the contingency
map places each row modality next to its associated column modalities.
The same data as individual answers give a Burt table for the
multi-variable map.

Run with ``python3 demos/04_categorical_maps.py``.
"""

import numpy as np

from somlab import Lattice
from somlab import categorical as cat

T = np.ones((6, 6), dtype=int)
T[:3, :3] = 20
T[3:, 3:] = 20
table = cat.ContingencyTable(T, [f"r{i + 1}" for i in range(6)], [f"c{j + 1}" for j in range(6)],
                             "colour", "shape")

# %% contingency map on the default 7x7 grid
mp = cat.korresp_run(table, 20_000, np.random.default_rng(0))
print(mp.report_text())

# %% the Burt table of the same individuals
answers = [(f"r{i + 1}", f"c{j + 1}") for i in range(6) for j in range(6) for _ in range(T[i, j])]
burt = cat.build_burt(answers, questions=["colour", "shape"])
print("Burt invariants:", cat.check_invariants(burt))

# Burt profiles are dominated by each modality's own diagonal cell, so the
# two blocks show up best on a small grid
km = cat.kacm_run(burt, 20_000, np.random.default_rng(0), lattice=Lattice.grid(4, 4))
print(km.report_text())
