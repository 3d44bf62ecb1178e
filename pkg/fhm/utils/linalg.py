"""Batched helpers for stacks of n x n matrices (shape (..., n, n))."""

from typing import Callable

import numpy as np


def dagger(x: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(x, -1, -2))


def hermitize(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + dagger(x))


def op_norm(x: np.ndarray) -> np.ndarray:
    """Largest singular value of every matrix in the stack"""
    if x.shape[-1] == 1:
        return np.abs(x[..., 0, 0])
    return np.linalg.norm(x, ord=2, axis=(-2, -1))


def hermitian_function(x: np.ndarray, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a real scalar function to the spectrum of Hermitian matrices"""
    eigvals, eigvecs = np.linalg.eigh(x)
    return hermitize((eigvecs * func(eigvals)[..., None, :]) @ dagger(eigvecs))


def sqrt_pd(x: np.ndarray) -> np.ndarray:
    return hermitian_function(x, np.sqrt)


def inv_sqrt_pd(x: np.ndarray) -> np.ndarray:
    return hermitian_function(x, lambda lam: 1.0 / np.sqrt(lam))


def expm_hermitian(x: np.ndarray) -> np.ndarray:
    return hermitian_function(x, np.exp)


def min_eigenvalues(x: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(x)[..., 0]


def max_eigenvalues(x: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(x)[..., -1]


def hermitian_to_params(h: np.ndarray) -> np.ndarray:
    """Real parameters of Hermitian matrices: diagonal, Re and Im of the strict lower part.

    (m, n, n) -> (m, n * n)
    """
    n = h.shape[-1]
    rows, cols = np.tril_indices(n, -1)
    diag = np.real(np.diagonal(h, axis1=-2, axis2=-1))
    lower = h[..., rows, cols]
    return np.concatenate([diag, lower.real, lower.imag], axis=-1)


def params_to_hermitian(params: np.ndarray, n: int) -> np.ndarray:
    """Inverse of hermitian_to_params: (m, n * n) -> (m, n, n)"""
    rows, cols = np.tril_indices(n, -1)
    k = rows.size
    h = np.zeros(params.shape[:-1] + (n, n), dtype=np.complex128)
    idx = np.arange(n)
    h[..., idx, idx] = params[..., :n]
    lower = params[..., n:n + k] + 1j * params[..., n + k:n + 2 * k]
    h[..., rows, cols] = lower
    h[..., cols, rows] = np.conj(lower)
    return h
