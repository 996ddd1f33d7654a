"""Dense linear-algebra helpers shared by every other module.

All routines take and return plain ``numpy`` arrays and never modify their
inputs. Ranks are decided with an SVD threshold that can be overridden per
call; the default is ``max(rows, cols) * sigma_max * 1e-12``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.linalg

RANK_RTOL = 1e-12


class NoRightInverse(ValueError):
    """Raised when a matrix without full row rank is asked for a right inverse."""


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a finite 2-D float array (scalars become 1x1)."""
    a = np.atleast_2d(np.asarray(m, dtype=float))
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def symmetrize(s) -> np.ndarray:
    """Copy the upper triangle onto the lower one so symmetry holds exactly."""
    a = as_matrix(s)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got {a.shape}")
    upper = np.triu(a)
    return upper + np.triu(a, 1).T


def sym_eig_bounds(s) -> tuple[float, float]:
    """Extreme eigenvalues ``(lambda_min, lambda_max)`` of a symmetric matrix.

    Only the upper triangle of ``s`` is read.
    """
    a = as_matrix(s, "symmetric matrix")
    if a.size == 0:
        return 0.0, 0.0
    w = scipy.linalg.eigvalsh(a, lower=False)
    return float(w[0]), float(w[-1])


def lambda_max(s) -> float:
    return sym_eig_bounds(s)[1]


def rank_threshold(sv: np.ndarray, shape: tuple[int, int], rtol: float | None = None) -> float:
    if sv.size == 0:
        return 0.0
    rtol = RANK_RTOL if rtol is None else rtol
    return max(shape) * float(sv[0]) * rtol


def rank_tol(m, rtol: float | None = None) -> int:
    """Numerical rank: number of singular values above the threshold.

    Parameters
    ----------
    m : array_like
        Matrix to inspect.
    rtol : float, optional
        Relative factor of the threshold ``max(rows, cols) * sigma_max * rtol``.
        Defaults to ``1e-12``.
    """
    a = as_matrix(m)
    if a.size == 0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rank_threshold(sv, a.shape, rtol)))


def right_inverse(m, rtol: float | None = None) -> np.ndarray:
    """Minimum-Frobenius-norm right inverse ``G`` with ``m @ G = I``.

    Raises
    ------
    NoRightInverse
        If ``m`` does not have full row rank.
    """
    a = as_matrix(m)
    if rank_tol(a, rtol) < a.shape[0]:
        raise NoRightInverse(f"matrix of shape {a.shape} does not have full row rank")
    # m^T (m m^T)^{-1}, computed through the SVD for accuracy
    u, sv, vt = np.linalg.svd(a, full_matrices=False)
    return (vt.T / sv) @ u.T


def nullspace_basis(m, rtol: float | None = None) -> np.ndarray:
    """Orthonormal basis of the kernel of ``m`` as columns (possibly zero columns)."""
    a = as_matrix(m)
    rows, cols = a.shape
    if a.size == 0:
        return np.eye(cols)
    _, sv, vt = np.linalg.svd(a, full_matrices=True)
    r = 0 if sv[0] == 0.0 else int(np.sum(sv > rank_threshold(sv, a.shape, rtol)))
    return vt[r:].T.copy()


def block_hankel(u: Sequence, L: int) -> np.ndarray:
    """Block-Hankel matrix with ``L`` block rows of the sequence ``u``.

    ``u`` has one sample per row (shape ``(N, m)``; a 1-D sequence is read as
    ``m = 1``). Block ``(i, j)`` of the result is ``u[i + j]`` so the output
    has shape ``(m * L, N - L + 1)``.

    >>> block_hankel([1, 2, 3, 4], 2)
    array([[1., 2., 3.],
           [2., 3., 4.]])
    """
    seq = np.asarray(u, dtype=float)
    if seq.ndim == 1:
        seq = seq[:, None]
    if seq.ndim != 2:
        raise ValueError("u must be a sequence of vectors")
    if not np.all(np.isfinite(seq)):
        raise ValueError("u has non-finite entries")
    N, m = seq.shape
    if L < 1 or L > N:
        raise ValueError(f"need 1 <= L <= N, got L={L}, N={N}")
    cols = N - L + 1
    H = np.empty((m * L, cols))
    for i in range(L):
        H[i * m:(i + 1) * m, :] = seq[i:i + cols].T
    return H
