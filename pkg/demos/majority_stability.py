"""Majority on many items approaches (2/pi) arcsin(rho); parity decays like rho**n."""
import math

import numpy as np

from isingfourier.decision import Majority, TruthTable
from isingfourier.noise import stability_montecarlo, stability_spectral

for rho in (0.2, 0.5, 0.8):
    s = stability_montecarlo(Majority(101), rho, pairs=20_000, seed=1)
    print(f"rho={rho}: maj101 {s:.3f}  limit {2 / math.pi * math.asin(rho):.3f}")

X = np.array([[1 if k >> i & 1 else -1 for i in range(5)] for k in range(32)])
parity = TruthTable(5, X.prod(axis=1))
print(f"parity5 at rho=0.8: {stability_spectral(parity, 0.8):.4f} (rho**5 = {0.8**5:.4f})")
print(f"maj5 at rho=0.8:    {stability_spectral(Majority(5), 0.8):.4f}")
