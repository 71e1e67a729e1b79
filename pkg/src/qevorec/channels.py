"""Single-qubit Kraus channels and the two-qubit channel-pair evolution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DomainError
from .numkern import I2, SIGMA_X, SIGMA_Y, SIGMA_Z, dagger
from .qsys import DensityMatrix
from .rng import Rng

KINDS = ("X", "Z", "Y", "D", "A")
KIND_NAMES = {
    "X": "bit-flip",
    "Z": "phase-flip",
    "Y": "bit-and-phase-flip",
    "D": "depolarizing",
    "A": "amplitude-damping",
}
COMPLETENESS_TOL = 1e-12


def _kraus_ops(kind, p):
    if kind == "X":
        return (np.sqrt(p) * I2, np.sqrt(1 - p) * SIGMA_X)
    if kind == "Z":
        return (np.sqrt(p) * I2, np.sqrt(1 - p) * SIGMA_Z)
    if kind == "Y":
        return (np.sqrt(p) * I2, np.sqrt(1 - p) * SIGMA_Y)
    if kind == "D":
        q = np.sqrt(p) / 2
        return (np.sqrt(1 - 3 * p / 4) * I2, q * SIGMA_X, q * SIGMA_Y, q * SIGMA_Z)
    if kind == "A":
        m1 = np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=np.complex128)
        m2 = np.array([[0, np.sqrt(p)], [0, 0]], dtype=np.complex128)
        return (m1, m2)
    raise ArgumentError(f"unknown channel kind {kind!r}; expected one of {KINDS}")


@dataclass(frozen=True, eq=False)
class KrausChannel:
    kind: str
    p: float
    kraus: tuple

    @property
    def unital(self) -> bool:
        return self.kind != "A"

    def completeness_error(self) -> float:
        s = sum(dagger(m) @ m for m in self.kraus)
        return float(np.max(np.abs(s - I2)))

    def apply(self, rho) -> np.ndarray:
        """Sum_k M_k rho M_k^H on a single-qubit state (or stack)."""
        rho = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho)
        return sum(m @ rho @ dagger(m) for m in self.kraus)

    def to_json(self):
        return {"kind": self.kind, "p": self.p}


def make_channel(kind: str, p: float) -> KrausChannel:
    """Channel with the Kraus set for ``kind``: X, Z, Y (flips), D, or A."""
    if kind not in KINDS:
        raise ArgumentError(f"unknown channel kind {kind!r}; expected one of {KINDS}")
    if not (0.0 <= p <= 1.0):
        raise ArgumentError(f"channel probability must lie in [0, 1], got {p!r}")
    ch = KrausChannel(kind, float(p), tuple(_kraus_ops(kind, float(p))))
    err = ch.completeness_error()
    if err > COMPLETENESS_TOL:
        raise DomainError(f"Kraus set not trace preserving (error {err:.3e})")
    return ch


def identity_channel() -> KrausChannel:
    return make_channel("X", 1.0)


@dataclass(frozen=True, eq=False)
class ChannelPair:
    ch_a: KrausChannel
    ch_b: KrausChannel

    def to_json(self):
        return {"kindA": self.ch_a.kind, "pA": self.ch_a.p, "kindB": self.ch_b.kind, "pB": self.ch_b.p}

    @classmethod
    def from_json(cls, d):
        return cls(make_channel(d["kindA"], d["pA"]), make_channel(d["kindB"], d["pB"]))


def _local_ops(pair):
    ops_a = [np.kron(m, I2) for m in pair.ch_a.kraus]
    ops_b = [np.kron(I2, m) for m in pair.ch_b.kraus]
    return ops_a, ops_b


def apply_channel_pair_array(rhos, pair: ChannelPair, mode: str = "mixture") -> np.ndarray:
    """Channel-pair action on a stack of two-qubit matrices ``(..., 4, 4)``.

    ``mode="mixture"`` is the equal-weight mixture of the A-side and B-side
    channel actions; ``mode="tensor"`` is the product channel E_A (x) E_B.
    """
    rhos = np.asarray(rhos, dtype=np.complex128)
    if rhos.shape[-2:] != (4, 4):
        raise ArgumentError(f"channel pairs act on two-qubit states, got shape {rhos.shape[-2:]}")
    if mode == "mixture":
        ops_a, ops_b = _local_ops(pair)
        out_a = sum(m @ rhos @ dagger(m) for m in ops_a)
        out_b = sum(m @ rhos @ dagger(m) for m in ops_b)
        return 0.5 * (out_a + out_b)
    if mode == "tensor":
        out = np.zeros_like(rhos)
        for ma in pair.ch_a.kraus:
            for mb in pair.ch_b.kraus:
                m = np.kron(ma, mb)
                out = out + m @ rhos @ dagger(m)
        return out
    raise ArgumentError(f"unknown channel-pair mode {mode!r}")


def apply_channel_pair(rho: DensityMatrix, pair: ChannelPair, mode: str = "mixture") -> DensityMatrix:
    if rho.dim != 4:
        raise ArgumentError(f"channel pairs act on two-qubit states, got dimension {rho.dim}")
    out = apply_channel_pair_array(rho.mat, pair, mode)
    return DensityMatrix(0.5 * (out + dagger(out)), 2)


def random_channel_pair(rng: Rng) -> ChannelPair:
    """Independent uniform kinds and uniform [0, 1] probabilities for A and B."""
    ka = KINDS[rng.choice_index(len(KINDS))]
    pa = float(rng.uniform())
    kb = KINDS[rng.choice_index(len(KINDS))]
    pb = float(rng.uniform())
    return ChannelPair(make_channel(ka, pa), make_channel(kb, pb))
