"""Correlation measures and fidelities.

All entropies are in bits. Discord measures the leading qubit (A) with
projective measurements parametrized by a Bloch direction; the optimum is
searched on a Fibonacci grid over the upper hemisphere and optionally
polished with Nelder-Mead.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import kernels
from .errors import ArgumentError, DimensionError, PreconditionError
from .numkern import dagger, eigh_stack, xlog2x
from .qsys import DensityMatrix, UnitaryOp, ptrace_array, ptranspose_array

StateLike = Union[DensityMatrix, np.ndarray]
PURE_TOL = 1e-8


class NumericalQualityWarning(RuntimeWarning):
    pass


def _mat(rho: StateLike) -> np.ndarray:
    return rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=np.complex128)


def _nq(rho: StateLike) -> int:
    if isinstance(rho, DensityMatrix):
        return rho.n_q
    return int(round(np.log2(np.asarray(rho).shape[-1])))


# -- entropies ---------------------------------------------------------------


def entropy_array(rhos) -> np.ndarray:
    """Von Neumann entropies (bits) of a stack of density matrices."""
    w, _ = eigh_stack(rhos, with_vectors=False)
    return -np.sum(xlog2x(w), axis=-1)


def von_neumann_entropy(rho: StateLike) -> float:
    return float(entropy_array(_mat(rho)))


def entanglement_entropy(rho_ab: StateLike, split: int = 1) -> float:
    """Entropy of entanglement S(Tr_B rho) of a pure bipartite state."""
    m = _mat(rho_ab)
    n_q = _nq(rho_ab)
    if not (1 <= split <= n_q - 1):
        raise ArgumentError(f"split must be in [1, {n_q - 1}], got {split}")
    purity = float(np.real(np.trace(m @ m)))
    if purity < 1.0 - PURE_TOL:
        raise PreconditionError(f"entanglement entropy needs a pure state (purity {purity:.10f})")
    return von_neumann_entropy(ptrace_array(m, n_q, range(split)))


# -- negativity -------------------------------------------------------------------


def negativity_array(rhos, n_q: int, split: int = 1) -> np.ndarray:
    pt = ptranspose_array(rhos, n_q, split, "A")
    w, _ = eigh_stack(pt, with_vectors=False)
    return 0.5 * (np.sum(np.abs(w), axis=-1) - 1.0)


def negativity(rho_ab: StateLike, split: int = 1) -> float:
    """(||rho^{T_A}||_1 - 1)/2."""
    return float(negativity_array(_mat(rho_ab), _nq(rho_ab), split))


# -- discord -------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscordConfig:
    n_directions: int = 40
    refine: bool = True
    refine_iters: int = 50

    def __post_init__(self):
        if self.n_directions < 2:
            raise ArgumentError("n_directions must be >= 2")
        if self.refine_iters < 0:
            raise ArgumentError("refine_iters must be >= 0")


@dataclass(frozen=True)
class MeasurementBasis:
    theta: float
    phi: float

    @property
    def ket(self) -> np.ndarray:
        return np.array([np.cos(self.theta / 2), np.exp(1j * self.phi) * np.sin(self.theta / 2)])

    @property
    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.ket
        plus = np.outer(n, n.conj())
        return plus, np.eye(2) - plus

    @property
    def bloch(self) -> np.ndarray:
        return np.array(
            [np.sin(self.theta) * np.cos(self.phi), np.sin(self.theta) * np.sin(self.phi), np.cos(self.theta)]
        )


def fibonacci_hemisphere(n: int) -> tuple[np.ndarray, np.ndarray]:
    """(theta, phi) of ``n`` near-uniform directions on the z >= 0 hemisphere.

    Antipodal Bloch directions define the same measurement, so a hemisphere
    covers every basis.
    """
    k = np.arange(n)
    z = 1.0 - (k + 0.5) / n
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    theta = np.arccos(z)
    phi = np.mod(2.0 * np.pi * k / golden, 2.0 * np.pi)
    return theta, phi


def measurement_grid(cfg: DiscordConfig) -> list[MeasurementBasis]:
    th, ph = fibonacci_hemisphere(cfg.n_directions)
    return [MeasurementBasis(float(t), float(p)) for t, p in zip(th, ph)]


def _refine_step(cfg):
    return 0.5 * np.sqrt(2.0 * np.pi / cfg.n_directions)


def discord_array(rhos, cfg: DiscordConfig = DiscordConfig(), *, return_raw: bool = False):
    """Discord D(A|B) for a stack of states whose leading qubit is A.

    Values are clamped at zero; a pre-clamp value below -1e-6 emits a
    :class:`NumericalQualityWarning`.
    """
    rhos = np.ascontiguousarray(rhos, dtype=np.complex128)
    lead = rhos.shape[:-2]
    rhos = rhos.reshape((-1,) + rhos.shape[-2:])
    d = rhos.shape[-1]
    if d < 4 or d % 2:
        raise DimensionError(f"discord needs a qubit A and a nonempty B, got dimension {d}")
    th, ph = fibonacci_hemisphere(cfg.n_directions)
    raw, ok = kernels.discord_batch(rhos, th, ph, cfg.refine, cfg.refine_iters, _refine_step(cfg))
    raw = np.asarray(raw).reshape(lead)
    if not np.all(ok):
        warnings.warn("eigensolver did not converge inside discord", NumericalQualityWarning, stacklevel=2)
    if np.any(raw < -1e-6):
        warnings.warn(
            f"discord below -1e-6 before clamping (min {raw.min():.3e})", NumericalQualityWarning, stacklevel=2
        )
    val = np.maximum(raw, 0.0)
    return (val, raw) if return_raw else val


def discord(rho: StateLike, cfg: DiscordConfig = DiscordConfig()) -> float:
    """Quantum discord with measurement on the first qubit, B the rest."""
    m = _mat(rho)
    if m.ndim != 2 or m.shape[0] < 4:
        raise ArgumentError("discord needs at least two qubits with A a single qubit")
    return float(discord_array(m[None], cfg)[0])


def classical_correlation(rho: StateLike, basis: MeasurementBasis) -> float:
    """J for a single measurement basis on A (reference path, not used by the search)."""
    m = _mat(rho)
    n_q = _nq(rho)
    rho_b = ptrace_array(m, n_q, range(1, n_q))
    db = rho_b.shape[0]
    total = 0.0
    for proj in basis.projectors:
        big = np.kron(proj, np.eye(db))
        post = big @ m @ big
        p = float(np.real(np.trace(post)))
        if p < 1e-12:
            continue
        cond = ptrace_array(post, n_q, range(1, n_q)) / p
        total += p * von_neumann_entropy(cond)
    return von_neumann_entropy(rho_b) - total


def mutual_information(rho: StateLike) -> float:
    m = _mat(rho)
    n_q = _nq(rho)
    return (
        von_neumann_entropy(ptrace_array(m, n_q, [0]))
        + von_neumann_entropy(ptrace_array(m, n_q, range(1, n_q)))
        - von_neumann_entropy(m)
    )


# -- fidelities -----------------------------------------------------------------------


def fidelity_pure(psi: DensityMatrix, u: UnitaryOp) -> float:
    """|<psi|U|psi>|^2 for a pure input."""
    if psi.dim != u.dim:
        raise ArgumentError(f"dimension mismatch: state {psi.dim}, unitary {u.dim}")
    if psi.ket is not None:
        ket = psi.ket
    else:
        if psi.purity() < 1.0 - PURE_TOL:
            raise PreconditionError("fidelity_pure needs a pure input state")
        w, v = eigh_stack(psi.mat)
        ket = v[:, -1]
    return float(np.clip(np.abs(np.vdot(ket, u.mat @ ket)) ** 2, 0.0, 1.0))


def sqrt_psd_array(rhos) -> np.ndarray:
    w, v = eigh_stack(rhos)
    w = np.where(w < 0.0, 0.0, w)
    return (v * np.sqrt(w)[..., None, :]) @ dagger(v)


def uhlmann_array(sqrt_rhos, sigmas) -> np.ndarray:
    """(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 given precomputed sqrt(rho).

    Evaluated as the squared nuclear norm of sqrt(sigma) sqrt(rho), which
    avoids square-rooting round-off eigenvalues of a rank-deficient product.
    """
    m = sqrt_psd_array(sigmas) @ sqrt_rhos
    s = np.linalg.svd(m, compute_uv=False)
    return np.clip(np.sum(s, axis=-1) ** 2, 0.0, 1.0)


def fidelity_uhlmann(rho: StateLike, sigma: StateLike) -> float:
    a, b = _mat(rho), _mat(sigma)
    if a.shape != b.shape:
        raise ArgumentError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(uhlmann_array(sqrt_psd_array(a), b))
