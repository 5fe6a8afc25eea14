"""Recompute the frozen reference values used by the test suite.

Everything here is independent of the package: the NRDF values come from a
multi-start Nelder-Mead search over an eigen-parameterized posterior
covariance, scalar constants from mpmath at 50 digits. Run with
``python scripts/derive_oracles.py`` and paste the printout into
``tests/frozen.py`` if a value ever needs to change.
"""

import itertools
import math

import mpmath as mp
import numpy as np
from scipy.optimize import minimize

mp.mp.dps = 50
A21 = np.array([[-1.3, 0.4], [-0.3, 0.0]])


def nrdf_nelder_mead(A, W, D, starts=40, seed=0):
    rng = np.random.default_rng(seed)

    def unpack(z):
        # posterior covariance with trace exactly D * sigmoid(z[0])
        tau = D / (1 + math.exp(-z[0]))
        s = 1 / (1 + math.exp(-z[1]))
        c, sn = math.cos(z[2]), math.sin(z[2])
        R = np.array([[c, -sn], [sn, c]])
        return R @ np.diag([tau * s, tau * (1 - s)]) @ R.T

    def obj(z):
        X = unpack(z)
        Pi = A @ X @ A.T + W
        gap = np.linalg.eigvalsh(Pi - X).min()
        val = 0.5 * math.log2(max(1.0, np.linalg.det(Pi) / np.linalg.det(X)))
        return val + (1e6 * gap * gap if gap < 0 else 0.0)

    best = math.inf
    for _ in range(starts):
        z0 = rng.normal(size=3) * [2, 2, 2]
        res = minimize(obj, z0, method="Nelder-Mead",
                       options=dict(xatol=1e-12, fatol=1e-14, maxiter=20000, maxfev=40000))
        best = min(best, res.fun)
    return best


if __name__ == "__main__":
    print("UNSTABLE_LOG_SUM_21 =", mp.nstr(mp.log(mp.mpf("1.2"), 2), 17))
    for D in (0.5, 1.0, 2.0, 5.0):
        print(f"NRDF_21[{D}] =", repr(nrdf_nelder_mead(A21, np.eye(2), D)))
    print("P0_SIGMA1 =", mp.nstr(mp.erf(mp.mpf(1) / 2 / mp.sqrt(2)), 17))
    print("LEN_P0_SIGMA1 =", mp.nstr(-mp.log(mp.erf(mp.mpf(1) / 2 / mp.sqrt(2)), 2), 17))
    g = mp.log(mp.pi * mp.e / 6, 2) / 2
    for p in (1, 2, 3, 4):
        print(f"GAP_SCALAR[{p}] =", mp.nstr(p * g + 1, 17))
    print("THETA_EX =", mp.nstr(mp.sqrt(6), 17), "PHI_EX =", mp.nstr(mp.mpf("0.5") / mp.sqrt(6), 17))
    # scalar water level xi = -1 / (2 dR/dD) in nats, R = 1/2 ln(a^2 + b^2 / D)
    for a, b, D in itertools.product([1.2], [1.0], [0.3, 2.0]):
        a, b, D = mp.mpf(a), mp.mpf(b), mp.mpf(D)
        print(f"WATER[{a},{b},{D}] =", mp.nstr(D * (a * a * D + b * b) / (b * b), 17))
