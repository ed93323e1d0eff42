"""The 0-neighbor case: competitive learning as vector quantization.

Without neighbors, the mean field is the gradient of the distortion
``V_n``, so decreasing-gain runs seek (local) optimal quantizers.

Run with ``python3 demos/03_quantization.py``.
"""

import numpy as np

from somlab import GainSchedule, UniformBox, linear_density
from somlab import quantization as q

U = UniformBox(0.0, 1.0)
lin = linear_density()

# %% exact optima: midpoints for the uniform law, skewed points for f(x) = 2x
print("uniform, n=4:", q.optimal_quantizer_1d(4, U).state[:, 0])
print("f=2x, n=4:  ", np.round(q.optimal_quantizer_1d(4, lin).state[:, 0], 6))

# %% stochastic gradient descent gets there too
rep = q.train_0neighbor(U, 10, GainSchedule.power(1000, 1e5, 1), 10 ** 6, np.random.default_rng(0))
print("\ntrained, n=10:", np.round(rep.state[:, 0], 4))

# %% distortion decays like n^(-2) in 1-D
for row in q.zador_scan([2, 4, 8, 16, 32], lin):
    print(f"n={row['n']:3d}  n^2 V_n = {row['scaled_distortion']:.6f}  |F_n - F|^2 = {row['f_distance']:.3e}")

# %% in the square the search keeps the best of several local minima
best = q.best_local_quantizer(6, UniformBox([0, 0], [1, 1]), 5, np.random.default_rng(1))
print(f"\nsquare, n=6: n V_n = {best.scaled_distortion:.6f}")

# %% quantizers as cubature rules
for row in q.integration_study(lambda x: x ** 2, 1 / 3, [10, 20, 40, 80]):
    print(f"n={row['n']:3d}  error {row['error']:.3e}  ratio {row['ratio']:.4f}")

# %% code-point density against f and f^(1/3)
mag = q.magnification_experiment(lin, 20)
print(f"\nfitted exponent of spacing density on f: {mag.fitted_exponent:.4f} (descriptive)")
