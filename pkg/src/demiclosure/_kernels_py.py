"""Pure numpy implementations of the numerical kernels.

Every function takes C-contiguous float64 arrays whose rows are points of
the ambient space and returns fresh arrays. Shapes are validated by the
callers in :mod:`demiclosure.operators`; nothing is re-checked here.
"""
import numpy as np


def soft_threshold(X, level):
    return np.sign(X) * np.maximum(np.abs(X) - level, 0.0)


def project_ball(X, center, radius):
    D = X - center
    sq = np.einsum("ij,ij->i", D, D)
    out = X.copy()
    outside = sq > radius * radius
    if np.any(outside):
        # sqrt(r^2/|d|^2) rounds at most ~0.75 ulp, r/sqrt(|d|^2) up to ~1 ulp
        out[outside] = center + D[outside] * np.sqrt(radius * radius / sq[outside])[:, None]
    return out


def project_box(X, lower, upper):
    return np.minimum(np.maximum(X, lower), upper)


def project_halfspace(X, normal, offset):
    excess = X @ normal - offset
    out = X.copy()
    pos = excess > 0.0
    if np.any(pos):
        out[pos] -= excess[pos][:, None] * normal
    return out


def project_affine(X, anchor, basis):
    D = X - anchor
    return anchor + (D @ basis.T) @ basis


def fne_margins(X, Y, FX, FY):
    """Per-pair excess of ||Fx-Fy||^2 + ||(x-Fx)-(y-Fy)||^2 over ||x-y||^2."""
    dF = FX - FY
    dx = X - Y
    dR = dx - dF
    return (np.einsum("ij,ij->i", dF, dF) + np.einsum("ij,ij->i", dR, dR)
            - np.einsum("ij,ij->i", dx, dx))


def ne_margins(X, Y, TX, TY):
    """Per-pair excess of ||Tx-Ty|| over ||x-y||."""
    dT = TX - TY
    dx = X - Y
    return (np.sqrt(np.einsum("ij,ij->i", dT, dT))
            - np.sqrt(np.einsum("ij,ij->i", dx, dx)))


def monotone_min_margin(X, U):
    """Smallest <x_i - x_j, u_i - u_j> over i < j, with the minimizing pair."""
    n = X.shape[0]
    best, bi, bj = np.inf, -1, -1
    for i in range(n - 1):
        vals = np.einsum("ij,ij->i", X[i + 1:] - X[i], U[i + 1:] - U[i])
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, bi, bj = float(vals[k]), i, i + 1 + k
    return best, bi, bj
