"""Builders for rating databases of quantum evolutions.

Rows are states and columns are evolutions. Row ``i`` is drawn from stream
``(STATES, i)`` and column ``j`` from ``(EVOLUTIONS, j)``, so every cell is
independent of generation order and a rebuilt database is bit-identical.

Cell values are correlation changes C(after) - C(before) evaluated on the
part-P reduction (qubits ``spec.part_p``) or, for the fidelity measure, the
fidelity between the reduced input and output states:

* entropy: entropy of the first qubit of P,
* negativity: twice the negativity across (first qubit of P | rest of P),
* discord: discord measuring the first qubit of P.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .channels import ChannelPair, apply_channel_pair_array, random_channel_pair
from .correlations import (
    DiscordConfig,
    discord_array,
    entropy_array,
    negativity_array,
    sqrt_psd_array,
    uhlmann_array,
)
from .database import DatabaseSpec, RatingDatabase
from .errors import ArgumentError, SpecError
from .qsys import (
    BURES_READING,
    DensityMatrix,
    UnitaryOp,
    cnot,
    evolve_array,
    ptrace_array,
    ptrace_kets,
    random_bures_matrix,
    random_ket,
    random_unitary_matrix,
    rho_minus,
    werner,
)
from .rng import EVOLUTIONS, MASK, NOISE, STATES, Rng

NONUNITARY_SIGN_TOL = 1e-6


class SignPropertyWarning(RuntimeWarning):
    pass


# -- rows and columns ----------------------------------------------------------


@dataclass
class StateRows:
    """Input states as density matrices; kets kept when every row is pure."""

    mats: np.ndarray
    kets: Optional[np.ndarray] = None

    def __len__(self):
        return self.mats.shape[0]

    @classmethod
    def from_states(cls, states: Sequence[DensityMatrix]):
        mats = np.array([s.mat for s in states])
        kets = None
        if all(s.ket is not None for s in states):
            kets = np.array([s.ket for s in states])
        return cls(mats, kets)


def generate_rows(spec: DatabaseSpec) -> StateRows:
    d = 2**spec.n_q
    if spec.state_kind == "pure":
        kets = np.empty((spec.n_s, d), dtype=np.complex128)
        for i in range(spec.n_s):
            kets[i] = random_ket(spec.n_q, Rng(spec.seed, (STATES, i)))
        mats = kets[:, :, None] * kets[:, None, :].conj()
        return StateRows(mats, kets)
    mats = np.empty((spec.n_s, d, d), dtype=np.complex128)
    for i in range(spec.n_s):
        mats[i] = random_bures_matrix(spec.n_q, Rng(spec.seed, (STATES, i)), spec.unitary_scale)
    return StateRows(mats)


def column_rng(spec: DatabaseSpec, j: int) -> Rng:
    return Rng(spec.seed, (EVOLUTIONS, j))


def generate_unitaries(spec: DatabaseSpec) -> list:
    return [random_unitary_matrix(spec.n_q, column_rng(spec, j), spec.unitary_scale) for j in range(spec.n_u)]


def generate_local_nonlocal(spec: DatabaseSpec) -> tuple[list, list]:
    """Even columns are U_A (x) U_B with independent factors, odd columns generic."""
    mats, tags = [], []
    for j in range(spec.n_u):
        rng = column_rng(spec, j)
        if j % 2 == 0:
            ua = random_unitary_matrix(1, rng.child(0), spec.unitary_scale)
            ub = random_unitary_matrix(1, rng.child(1), spec.unitary_scale)
            mats.append(np.kron(ua, ub))
            tags.append("local")
        else:
            mats.append(random_unitary_matrix(2, rng, spec.unitary_scale))
            tags.append("nonlocal")
    return mats, tags


def generate_channel_pairs(spec: DatabaseSpec) -> list[ChannelPair]:
    return [random_channel_pair(column_rng(spec, j)) for j in range(spec.n_u)]


# -- measures ------------------------------------------------------------------


def _reduce(spec, mats=None, kets=None):
    if spec.whole_system:
        return mats if mats is not None else kets[:, :, None] * kets[:, None, :].conj()
    if kets is not None:
        return ptrace_kets(kets, spec.n_q, spec.part_p)
    return ptrace_array(mats, spec.n_q, spec.part_p)


def correlation_values(spec: DatabaseSpec, reduced: np.ndarray) -> np.ndarray:
    """Correlation measure of each reduced state (first qubit of P vs rest)."""
    k = len(spec.part_p)
    if spec.measure == "entropy":
        return entropy_array(ptrace_array(reduced, k, [0]))
    if spec.measure == "negativity":
        return 2.0 * negativity_array(reduced, k, 1)
    if spec.measure == "discord":
        return discord_array(reduced, spec.discord)
    raise SpecError(f"{spec.measure!r} is not a correlation measure")


def _check_compat(spec: DatabaseSpec):
    if spec.measure == "entropy" and spec.state_kind != "pure":
        raise SpecError("entropy ratings are defined on pure input states")


def rate_database(spec: DatabaseSpec, rows: StateRows, columns: Sequence, kind: str = "unitary") -> np.ndarray:
    """Full rating table for ``rows`` x ``columns``.

    ``columns`` are unitary matrices (``kind="unitary"``) or
    :class:`ChannelPair` objects (``kind="channel-pair"``).
    """
    _check_compat(spec)
    n_s, n_u = len(rows), len(columns)
    table = np.empty((n_s, n_u))
    use_kets = rows.kets is not None and kind == "unitary"
    before = _reduce(spec, kets=rows.kets) if use_kets else _reduce(spec, mats=rows.mats)
    fidelity = spec.measure == "fidelity"
    ket_fidelity = fidelity and use_kets and spec.whole_system
    if fidelity:
        sqrt_before = None if ket_fidelity else sqrt_psd_array(before)
    else:
        c_before = correlation_values(spec, before)
    for j, col in enumerate(columns):
        if kind == "unitary":
            u = np.asarray(col)
            if use_kets:
                out_kets = rows.kets @ u.T
                if ket_fidelity:
                    table[:, j] = np.abs(np.einsum("bi,bi->b", rows.kets.conj(), out_kets)) ** 2
                    continue
                after = _reduce(spec, kets=out_kets)
            else:
                after = _reduce(spec, mats=evolve_array(rows.mats, u))
        elif kind == "channel-pair":
            after = apply_channel_pair_array(rows.mats, col, spec.channel_mode)
        else:
            raise ArgumentError(f"unknown column kind {kind!r}")
        after = 0.5 * (after + np.conj(np.swapaxes(after, -1, -2)))
        if fidelity:
            table[:, j] = uhlmann_array(sqrt_before, after)
        else:
            table[:, j] = correlation_values(spec, after) - c_before
    return table


def _meta(spec, **extra):
    meta = {"bures_reading": BURES_READING, "library_version": __version__}
    meta.update(extra)
    return meta


def build_unitary_db(spec: DatabaseSpec) -> RatingDatabase:
    if spec.evolution_kind != "unitary":
        raise SpecError("build_unitary_db needs evolution_kind='unitary'")
    _check_compat(spec)
    rows = generate_rows(spec)
    table = rate_database(spec, rows, generate_unitaries(spec))
    return RatingDatabase(spec, table, np.ones(table.shape, dtype=bool), meta=_meta(spec))


def build_nonunitary_db(spec: DatabaseSpec) -> RatingDatabase:
    if spec.evolution_kind != "channel-pair":
        raise SpecError("build_nonunitary_db needs evolution_kind='channel-pair'")
    if spec.n_q != 2:
        raise SpecError("channel-pair databases are two-qubit")
    if spec.state_kind != "bures-mixed":
        raise SpecError("channel-pair databases use Bures mixed states")
    rows = generate_rows(spec)
    pairs = generate_channel_pairs(spec)
    table = rate_database(spec, rows, pairs, kind="channel-pair")
    meta = _meta(spec, channel_pairs=[p.to_json() for p in pairs])
    if spec.measure == "discord":
        worst = float(table.max())
        meta["max_delta_discord"] = worst
        if worst > NONUNITARY_SIGN_TOL:
            warnings.warn(
                f"channel pair increased discord by {worst:.3e}", SignPropertyWarning, stacklevel=2
            )
    return RatingDatabase(spec, table, np.ones(table.shape, dtype=bool), meta=meta)


def build_local_nonlocal_db(spec: DatabaseSpec) -> RatingDatabase:
    if spec.evolution_kind != "local-nonlocal-mix":
        raise SpecError("build_local_nonlocal_db needs evolution_kind='local-nonlocal-mix'")
    if spec.n_q != 2:
        raise SpecError("the local/nonlocal ensemble is two-qubit")
    if spec.n_u % 2:
        raise SpecError("the local/nonlocal ensemble needs an even number of columns")
    _check_compat(spec)
    mats, tags = generate_local_nonlocal(spec)
    table = rate_database(spec, generate_rows(spec), mats)
    return RatingDatabase(spec, table, np.ones(table.shape, dtype=bool), column_tags=tags, meta=_meta(spec))


def build_database(spec: DatabaseSpec) -> RatingDatabase:
    builders = {
        "unitary": build_unitary_db,
        "channel-pair": build_nonunitary_db,
        "local-nonlocal-mix": build_local_nonlocal_db,
    }
    return builders[spec.evolution_kind](spec)


# -- masking and noise ---------------------------------------------------------


def mask_random(db: RatingDatabase, n_r: int, rng: Rng) -> RatingDatabase:
    """Hide ``n_r`` uniformly chosen known cells, keeping their true values."""
    rows, cols = np.nonzero(db.known_mask)
    n_known = rows.size
    if not (1 <= n_r <= n_known - 1):
        raise ArgumentError(f"n_r must lie in [1, {n_known - 1}], got {n_r}")
    pick = rng.permutation_prefix(n_known, n_r)
    out = db.copy()
    r, c = rows[pick], cols[pick]
    out.hidden_truth[r, c] = out.ratings[r, c]
    out.ratings[r, c] = np.nan
    out.known_mask[r, c] = False
    return out


def mask_fraction(db: RatingDatabase, fraction: float, seed: int) -> RatingDatabase:
    n_r = int(round(fraction * db.ratings.size))
    return mask_random(db, n_r, Rng(seed, (MASK,)))


def inject_noise(db: RatingDatabase, eta: float, rng: Rng) -> RatingDatabase:
    """Known cells become eta*s + (1 - eta)*R with s uniform on (-1, 1)."""
    if not (0.0 <= eta <= 1.0):
        raise ArgumentError(f"eta must lie in [0, 1], got {eta!r}")
    out = db.copy()
    if eta == 0.0:
        return out
    s = rng.uniform_open(db.ratings.shape, -1.0, 1.0)
    k = out.known_mask
    out.ratings[k] = eta * s[k] + (1.0 - eta) * out.ratings[k]
    out.meta["noise_eta"] = eta
    return out


def noise_rng(seed: int) -> Rng:
    return Rng(seed, (NOISE,))


# -- Werner showcase -------------------------------------------------------------


@dataclass
class WernerFixture:
    epsilons: np.ndarray
    rows: list
    column: UnitaryOp
    truth_2n: np.ndarray
    truth_d: np.ndarray


def build_werner_fixture(epsilons, cfg: DiscordConfig = DiscordConfig()) -> WernerFixture:
    """rho_minus(eps) rows, the CNOT column, and the exact rating curves.

    rho_minus is uncorrelated, so each rating equals the correlation of the
    Werner state CNOT rho_minus CNOT^H.
    """
    eps = np.asarray(epsilons, dtype=float)
    if np.any((eps < 0) | (eps > 1)):
        raise ArgumentError("epsilons must lie in [0, 1]")
    rows = [rho_minus(float(e)) for e in eps]
    truth_2n = np.maximum(0.0, (3.0 * eps - 1.0) / 2.0)
    werners = np.array([werner(float(e)).mat for e in eps])
    truth_d = discord_array(werners, cfg) if eps.size else np.zeros(0)
    return WernerFixture(eps, rows, cnot(), truth_2n, truth_d)
