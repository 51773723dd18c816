"""Independent brute-force oracles shared by the test modules.

These are deliberately written as plain index loops, separate from any
vectorized library code they are used to check.
"""

import numpy as np


def stf_gradient_symbol_direct(T: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Symbol of the symmetric trace-free gradient on an stf 2-tensor T.

    Loop implementation of the closed-form entries
        (T_ij xi_k + T_ik xi_j + T_jk xi_i)/3
        - 2/(3(d+2)) * ((T xi)_k d_ij + (T xi)_j d_ik + (T xi)_i d_jk),
    valid when T is symmetric and trace-free.
    """
    T = np.asarray(T)
    xi = np.asarray(xi)
    d = T.shape[0]
    c = 2.0 / (3.0 * (d + 2))
    Txi = T @ xi
    out = np.zeros((d, d, d), dtype=np.result_type(T, xi))
    for i in range(d):
        for j in range(d):
            for k in range(d):
                val = (T[i, j] * xi[k] + T[i, k] * xi[j] + T[j, k] * xi[i]) / 3.0
                val -= c * (
                    Txi[k] * (i == j) + Txi[j] * (i == k) + Txi[i] * (j == k)
                )
                out[i, j, k] = val
    return out


def sym3_direct(T: np.ndarray) -> np.ndarray:
    """Rank-3 symmetrization by explicit enumeration of the 6 index orders."""
    d = T.shape[0]
    out = np.zeros_like(np.asarray(T))
    for i in range(d):
        for j in range(d):
            for k in range(d):
                out[i, j, k] = (
                    T[i, j, k] + T[j, k, i] + T[k, i, j]
                    + T[j, i, k] + T[i, k, j] + T[k, j, i]
                ) / 6.0
    return out


def random_stf2(rng: np.random.Generator, d: int = 3, complex_valued: bool = False) -> np.ndarray:
    """Random symmetric trace-free rank-2 tensor."""
    M = rng.standard_normal((d, d))
    if complex_valued:
        M = M + 1j * rng.standard_normal((d, d))
    M = 0.5 * (M + M.T)
    return M - (np.trace(M) / d) * np.eye(d)
