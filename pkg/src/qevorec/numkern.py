"""Dense complex linear algebra on numpy ``complex128`` arrays.

A "complex matrix" throughout the package is simply a 2-D ``complex128``
ndarray. Spectral work goes through a cyclic Jacobi eigensolver (see
:mod:`qevorec.kernels`); matrix functions are evaluated as ``V f(L) V^H``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .errors import ConvergenceError, DimensionError, DomainError

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
HERMITIAN_TOL = 1e-10
CLAMP_TOL = 1e-10


@dataclass(frozen=True)
class EigenSystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def inf_norm(m) -> float:
    """Maximum absolute row sum."""
    m = np.asarray(m)
    return float(np.max(np.sum(np.abs(m), axis=-1))) if m.size else 0.0


def _check_square(a):
    if a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"square matrix required, got shape {a.shape[-2:]}")


def check_hermitian(a, tol=HERMITIAN_TOL):
    _check_square(a)
    if not a.size:
        return
    dev = np.max(np.abs(a - np.conj(np.swapaxes(a, -1, -2))))
    if dev > tol * max(inf_norm(a), np.finfo(float).tiny):
        raise DomainError(f"matrix is not Hermitian (max |H - H^H| = {dev:.3e})")


def _normalize_phases(v):
    # largest-magnitude component of each eigenvector made real positive
    idx = np.argmax(np.abs(v), axis=-2)
    lead = np.take_along_axis(v, idx[..., None, :], axis=-2)
    mag = np.abs(lead)
    return v * np.where(mag > 0, np.conj(lead) / np.where(mag > 0, mag, 1.0), 1.0)


def eigh_stack(mats, with_vectors=True):
    """Sorted eigenpairs of a stack ``(..., n, n)`` of Hermitian matrices.

    Inputs are symmetrized as (H + H^H)/2 inside the solver. Returns
    ``(w, v)`` with ``v`` None when ``with_vectors`` is False.
    """
    a = np.asarray(mats, dtype=np.complex128)
    _check_square(a)
    lead, n = a.shape[:-2], a.shape[-1]
    flat = np.ascontiguousarray(a.reshape((-1, n, n)))
    if flat.shape[0] == 0 or n == 0:
        w = np.zeros(lead + (n,))
        return w, (np.zeros(lead + (n, n), dtype=np.complex128) if with_vectors else None)
    w, v, sweeps, off = kernels.eigh_batch(flat, with_vectors, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    bad = np.nonzero(sweeps < 0)[0]
    if bad.size:
        raise ConvergenceError(
            f"Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps "
            f"(residual off-diagonal norm {off[bad].max():.3e})",
            residual=float(off[bad].max()),
        )
    order = np.argsort(w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1).reshape(lead + (n,))
    if not with_vectors:
        return w, None
    v = np.take_along_axis(v, order[:, None, :], axis=-1)
    v = _normalize_phases(v).reshape(lead + (n, n))
    return w, v


def herm_eig(h) -> EigenSystem:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    a = as_matrix(h)
    check_hermitian(a)
    w, v = eigh_stack(a)
    return EigenSystem(w, v)


def eigvalsh(h) -> np.ndarray:
    a = np.asarray(h, dtype=np.complex128)
    return eigh_stack(a, with_vectors=False)[0]


def _clamp_psd(w):
    worst = float(np.min(w)) if w.size else 0.0
    if worst < -CLAMP_TOL:
        raise DomainError(f"matrix is not positive semidefinite (eigenvalue {worst:.3e})")
    return np.where(w < 0.0, 0.0, w)


def func_of_hermitian(h, f: Callable[[np.ndarray], np.ndarray], *, psd: bool = False) -> np.ndarray:
    """Spectral matrix function ``V f(L) V^H``.

    Works on a single matrix or a stack. ``psd=True`` (implied for
    ``np.sqrt``) enforces eigenvalues >= -1e-10 and clamps the rest to 0.
    """
    a = np.asarray(h, dtype=np.complex128)
    check_hermitian(a)
    w, v = eigh_stack(a)
    if psd or f is np.sqrt:
        w = _clamp_psd(w)
    fw = np.asarray(f(w))
    return (v * fw[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def xlog2x(w):
    """Elementwise x*log2(x) with 0*log(0) = 0."""
    w = np.asarray(w, dtype=float)
    pos = w > 0.0
    return np.where(pos, w * np.log2(np.where(pos, w, 1.0)), 0.0)


def sqrtm_psd(h) -> np.ndarray:
    return func_of_hermitian(h, np.sqrt, psd=True)


def expm_i(h, t: float = 1.0) -> np.ndarray:
    """exp(i t H) for Hermitian H."""
    return func_of_hermitian(h, lambda w: np.exp(1j * t * w))


def trace_norm_hermitian(m) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    a = as_matrix(m)
    check_hermitian(a)
    return float(np.sum(np.abs(eigvalsh(a))))


def kron(*mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for m in mats:
        out = np.kron(out, np.asarray(m, dtype=np.complex128))
    return out


def dagger(m) -> np.ndarray:
    return np.conj(np.swapaxes(np.asarray(m), -1, -2))


I2 = np.eye(2, dtype=np.complex128)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
