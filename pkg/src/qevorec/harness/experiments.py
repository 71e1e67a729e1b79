"""Desk-scale figure experiments.

Each experiment builds its databases, hides cells, trains the recommender on
what is left and compares predictions with the hidden truth. Sizes are given
at the default desk scale 0.2 (200 x 200 for the thousand-square figures) and
scale linearly with ``ExperimentConfig.scale``.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .. import __version__, dbgen, mfrec
from ..correlations import DiscordConfig
from ..database import DatabaseSpec, RatingDatabase
from ..errors import ArgumentError
from ..mfrec import TrainConfig
from ..qsys import rho_minus
from ..rng import MASK, NOISE, Rng
from .report import EvalReport, Panel, RunResult

EXPERIMENTS = (
    "fig2-entropy",
    "fig2-negativity",
    "fig2-discord",
    "fig3-sweep",
    "fig4-werner",
    "fig5-noise",
    "fig6-timing",
    "fig7-multiqubit",
    "fig8-fidelity",
    "fig9-fidelity-multiqubit",
    "fig10-nonunitary",
    "appendix-binning",
)
DESK_SCALE = 0.2

# When the config does not pin a TrainConfig, (f, lambda) is picked from
# SELECT_GRID by a hold-out split of the known cells and the step size is
# set from the leading singular value of the known table (see select_train).
SELECT_GRID = tuple((f, lam) for f in (10, 40) for lam in (0.3, 1.0, 3.0))
SELECT_HOLDOUT = 0.1
SELECT_ITERS = 10000
STEP_GAIN = 0.5
TRAIN_TIMING = TrainConfig(f=10, lam=1.0, alpha=0.02, max_iters=400)

FIG2_FRACTIONS = (0.1, 0.5, 0.9)
SWEEP_SIZES = (20, 40, 80, 120, 200)
SWEEP_NR = 100
WERNER_EPS = tuple(k / 15 for k in range(16))
NOISE_ETAS = (0.0, 0.001, 0.01, 0.1, 1.0)
MULTI_QUBITS = (3, 4, 5, 6)
MULTI_NR = 100
TIMING_CASES = ((2, 200), (3, 60))
TIMING_FRACTIONS = (0.5, 0.75)
TIMING_REPS = 3
BINNING_THRESHOLD = 0.02


@dataclass
class ExperimentConfig:
    name: str
    scale: float = DESK_SCALE
    train: Optional[TrainConfig] = None
    seed: int = 0
    out_dir: Optional[str] = None
    unitary_scale: float = 1.0
    repetitions: int = TIMING_REPS

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ArgumentError(f"unknown experiment {self.name!r}; expected one of {EXPERIMENTS}")
        if not (0.0 < self.scale <= 1.0):
            raise ArgumentError(f"scale must lie in (0, 1], got {self.scale!r}")
        if self.repetitions < 1:
            raise ArgumentError("repetitions must be >= 1")

    def size(self, desk: int) -> int:
        """Desk size ``desk`` (at scale 0.2) rescaled to this config."""
        return max(2, int(round(desk * self.scale / DESK_SCALE)))

    def train_for(self, default: Optional[TrainConfig] = None) -> Optional[TrainConfig]:
        """Pinned config, else ``default`` reseeded, else None (select per run)."""
        if self.train is not None:
            return self.train
        return replace(default, seed=self.seed) if default is not None else None

    def to_json(self):
        d = asdict(self)
        d["train"] = self.train.to_json() if self.train else None
        return d

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        if isinstance(d.get("train"), dict):
            d["train"] = TrainConfig.from_json(d["train"])
        return cls(**d)


# -- building blocks -------------------------------------------------------------


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def step_size(masked: RatingDatabase) -> float:
    """STEP_GAIN / sigma_1 of the known table (unknown cells as zero).

    Near a balanced solution the curvature of J along the leading factor is
    about sigma_1, so this keeps full-batch descent well inside stability.
    """
    a = np.where(masked.known_mask, masked.ratings, 0.0)
    s1 = float(np.linalg.norm(a, 2))
    return STEP_GAIN / max(s1, 1.0)


def select_train(masked: RatingDatabase, seed: int = 0, grid=SELECT_GRID) -> tuple[TrainConfig, list]:
    """Pick (f, lambda) by hold-out RMS on a slice of the known cells.

    Only known cells are used, never the hidden truth. Returns the chosen
    config and the (f, lambda, validation RMS) table.
    """
    alpha = step_size(masked)
    n_val = max(1, int(round(SELECT_HOLDOUT * masked.known_mask.sum())))
    split = dbgen.mask_random(masked, n_val, Rng(seed, (MASK, 0xBEEF)))
    fresh = masked.known_mask & ~split.known_mask
    vr, vc = np.nonzero(fresh)
    vt = masked.ratings[vr, vc]
    table = []
    for f, lam in grid:
        cfg = TrainConfig(f=f, lam=lam, alpha=alpha, max_iters=SELECT_ITERS, seed=seed)
        model, trace = mfrec.train(split, cfg)
        rms = mfrec.rms_deviation(mfrec.predict_cells(model, vr, vc), vt) if trace.stop_reason != "diverged" else np.inf
        table.append({"f": f, "lambda": lam, "validation_rms": rms, "stop_reason": trace.stop_reason})
    best = min(range(len(grid)), key=lambda k: table[k]["validation_rms"])
    f, lam = grid[best]
    return TrainConfig(f=f, lam=lam, alpha=alpha, max_iters=SELECT_ITERS, seed=seed), table


def complete(masked: RatingDatabase, truth, cfg: Optional[TrainConfig], label: str, *, scaled=False, seed=0, **params) -> RunResult:
    """Train on the known cells of ``masked`` and predict its hidden cells.

    ``truth`` is the clean full table the predictions are scored against.
    With ``cfg=None`` the config comes from :func:`select_train`.
    """
    selection = None
    if cfg is None:
        (cfg, selection), t_sel = _timed(select_train, masked, seed)
    (model, trace), t_train = _timed(mfrec.train, masked, cfg)
    rows, cols, _ = masked.hidden_cells()
    pred, t_pred = _timed(mfrec.predict_cells, model, rows, cols)
    params = {"train_config": cfg.to_json(), **params}
    if selection is not None:
        params["selection"] = selection
        params["selection_seconds"] = t_sel
    return RunResult(
        label,
        rows,
        cols,
        np.asarray(truth)[rows, cols],
        pred,
        params=params,
        trace=trace.summary(),
        timing={"train": t_train, "predict": t_pred},
        scaled=scaled,
    )


def _mask_rng(seed, k):
    return Rng(seed, (MASK, k))


def _mask_count(db, n_r, seed, k):
    return dbgen.mask_random(db, int(n_r), _mask_rng(seed, k))


def _mask_frac(db, fraction, seed, k):
    return _mask_count(db, int(round(fraction * db.ratings.size)), seed, k)


def _build(report, spec):
    db, t = _timed(dbgen.build_database, spec)
    report.timing["db_build"] += t
    return db


def _spec(cfg, n, measure, state_kind, **kw):
    return DatabaseSpec(
        n_s=n,
        n_u=n,
        measure=measure,
        state_kind=state_kind,
        seed=cfg.seed,
        unitary_scale=cfg.unitary_scale,
        **kw,
    )


def _report(cfg, **extra):
    conf = cfg.to_json()
    conf["library_version"] = __version__
    conf.update(extra)
    return EvalReport(cfg.name, conf)


# -- figure experiments ----------------------------------------------------------

FIG2_MEASURES = {
    "fig2-entropy": ("entropy", "pure"),
    "fig2-negativity": ("negativity", "bures-mixed"),
    "fig2-discord": ("discord", "bures-mixed"),
}


def _fractions_run(cfg, report, spec, train, fractions, prefix):
    db = _build(report, spec)
    truth = db.ratings
    for k, frac in enumerate(fractions):
        masked = _mask_frac(db, frac, cfg.seed, k)
        report.add_run(complete(masked, truth, train, f"{prefix}{int(round(100 * frac))}", fraction=frac, seed=cfg.seed))
    return db


def run_fig2(cfg: ExperimentConfig) -> EvalReport:
    measure, kind = FIG2_MEASURES[cfg.name]
    n = cfg.size(200)
    train = cfg.train_for()
    report = _report(cfg, n_s=n, n_u=n, measure=measure, state_kind=kind, fractions=list(FIG2_FRACTIONS))
    _fractions_run(cfg, report, _spec(cfg, n, measure, kind), train, FIG2_FRACTIONS, "masked")
    report.metrics = {r.label: r.delta for r in report.runs}
    return report


def run_fig3(cfg: ExperimentConfig) -> EvalReport:
    """Fixed n_r, square databases of growing size, one fresh ensemble per size."""
    train = cfg.train_for()
    sizes = sorted({cfg.size(s) for s in SWEEP_SIZES})
    report = _report(cfg, sizes=sizes, n_r=SWEEP_NR)
    for mk, (measure, kind) in enumerate(FIG2_MEASURES.values()):
        deltas = []
        for sk, n in enumerate(sizes):
            spec = _spec(cfg, n, measure, kind).with_(seed=cfg.seed + 1000 * sk)
            db = _build(report, spec)
            n_r = min(SWEEP_NR, db.ratings.size // 2)
            masked = _mask_count(db, n_r, cfg.seed, 100 * mk + sk)
            run = report.add_run(
                complete(masked, db.ratings, train, f"{measure}-n{n}", measure=measure, n=n, seed=cfg.seed), panel=False
            )
            deltas.append(run.delta)
        report.add_panel(Panel.sweep(measure, sizes, deltas, series=f"delta_{measure}"))
        report.metrics[measure] = dict(zip(map(str, sizes), deltas))
    return report


def werner_rows(spec: DatabaseSpec, epsilons) -> dbgen.StateRows:
    """Random Bures rows with the first ``len(epsilons)`` replaced by rho_minus."""
    rows = dbgen.generate_rows(spec)
    mats = rows.mats.copy()
    for k, e in enumerate(epsilons):
        mats[k] = rho_minus(e).mat
    return dbgen.StateRows(mats)


def run_fig4(cfg: ExperimentConfig) -> EvalReport:
    """CNOT column on rho_minus(eps) rows; all Werner cells hidden plus 10% of the rest."""
    n = cfg.size(200)
    eps = np.array(WERNER_EPS)
    train = cfg.train_for()
    fixture = dbgen.build_werner_fixture(eps, DiscordConfig())
    report = _report(cfg, n_s=n, n_u=n, epsilons=eps.tolist(), background_fraction=0.1)
    curves = {"negativity": fixture.truth_2n, "discord": fixture.truth_d}
    for k, (measure, truth) in enumerate(curves.items()):
        spec = _spec(cfg, n, measure, "bures-mixed")
        t0 = time.perf_counter()
        rows = werner_rows(spec, eps)
        cols = dbgen.generate_unitaries(spec)
        cols[0] = fixture.column.mat
        table = dbgen.rate_database(spec, rows, cols)
        report.timing["db_build"] += time.perf_counter() - t0
        db = RatingDatabase(spec, table, np.ones(table.shape, dtype=bool))
        masked = _mask_frac(db, 0.1, cfg.seed, k)
        ri = np.arange(eps.size)
        masked.hidden_truth[ri, 0] = table[ri, 0]
        masked.ratings[ri, 0] = np.nan
        masked.known_mask[ri, 0] = False
        full = complete(masked, table, train, f"{measure}-background", fraction=0.1, seed=cfg.seed)
        keep = ~((full.cols == 0) & (full.rows < eps.size))
        werner_run = RunResult(
            f"{measure}-werner",
            ri,
            np.zeros_like(ri),
            np.asarray(truth, dtype=float),
            _lookup(full, ri, np.zeros_like(ri)),
            params={"measure": measure, "epsilons": eps.tolist()},
            trace=full.trace,
            timing=full.timing,
        )
        bg = RunResult(
            full.label, full.rows[keep], full.cols[keep], full.actual[keep], full.predicted[keep], full.params,
            full.trace,
        )
        report.add_run(werner_run, panel=False)
        report.add_run(bg, panel=False)
        pts = [(float(e), float(p), "predicted") for e, p in zip(eps, werner_run.predicted)]
        pts += [(float(e), float(t), "actual") for e, t in zip(eps, truth)]
        report.add_panel(Panel(measure, "curve", pts))
        report.metrics[measure] = {
            "delta": werner_run.delta,
            "cell_vs_curve_max_gap": float(np.max(np.abs(table[ri, 0] - truth))),
        }
    neg, dis = report.run("negativity-werner"), report.run("discord-werner")
    report.metrics["max_abs_pred_2n_below_third"] = float(np.max(np.abs(neg.predicted[eps <= 1 / 3 + 1e-12])))
    report.metrics["pred_d_at_0.2"] = float(dis.predicted[int(np.argmin(np.abs(eps - 0.2)))])
    return report


def _lookup(run, rows, cols):
    idx = {(int(i), int(j)): p for i, j, p in zip(run.rows, run.cols, run.predicted)}
    return np.array([idx[(int(i), int(j))] for i, j in zip(rows, cols)])


def run_fig5(cfg: ExperimentConfig) -> EvalReport:
    """One clean discord table and one mask; noise of growing strength on the known cells.

    (f, lambda) are chosen once on the clean masked table and held fixed, so
    only the input noise varies along the sweep.
    """
    n = cfg.size(200)
    report = _report(cfg, n_s=n, n_u=n, etas=list(NOISE_ETAS), fraction=0.5)
    db = _build(report, _spec(cfg, n, "discord", "bures-mixed"))
    masked = _mask_frac(db, 0.5, cfg.seed, 0)
    train = cfg.train_for()
    if train is None:
        train, table = select_train(masked, cfg.seed)
        report.config["selection"] = table
    deltas = []
    for k, eta in enumerate(NOISE_ETAS):
        noisy = dbgen.inject_noise(masked, eta, Rng(cfg.seed, (NOISE, k)))
        # step size follows the noisy table's scale; (f, lambda) stay put
        step = replace(train, alpha=min(train.alpha, step_size(noisy)))
        run = report.add_run(complete(noisy, db.ratings, step, f"eta{eta:g}", eta=eta, seed=cfg.seed))
        deltas.append(run.delta)
    report.add_panel(Panel.sweep("e", NOISE_ETAS, deltas, series="delta_D"))
    report.metrics = {"delta_by_eta": dict(zip(map(str, NOISE_ETAS), deltas))}
    if deltas[0] > 0:
        report.metrics["ratio_0.1"] = deltas[NOISE_ETAS.index(0.1)] / deltas[0]
    return report


def run_multiqubit(cfg: ExperimentConfig, measures) -> EvalReport:
    n = cfg.size(100)
    train = cfg.train_for()
    report = _report(cfg, n_s=n, n_u=n, n_r=MULTI_NR, qubits=list(MULTI_QUBITS), part_p=[0, 1])
    report.fidelity_check = measures[0][0] == "fidelity"
    for mk, (measure, kind) in enumerate(measures):
        scaled = []
        for qk, nq in enumerate(MULTI_QUBITS):
            db = _build(report, _spec(cfg, n, measure, kind, n_q=nq))
            masked = _mask_count(db, min(MULTI_NR, db.ratings.size // 2), cfg.seed, 10 * mk + qk)
            label = f"{measure}-{kind}-q{nq}"
            run = report.add_run(complete(masked, db.ratings, train, label, scaled=True, n_q=nq, seed=cfg.seed))
            scaled.append(run.delta_scaled()[0])
        report.add_panel(Panel.sweep(f"{measure}-{kind}", MULTI_QUBITS, scaled, series="delta_scaled"))
        report.metrics[f"{measure}-{kind}"] = dict(zip(map(str, MULTI_QUBITS), scaled))
    return report


def run_fig8(cfg: ExperimentConfig) -> EvalReport:
    n = cfg.size(200)
    train = cfg.train_for()
    report = _report(cfg, n_s=n, n_u=n, fractions=list(FIG2_FRACTIONS))
    report.fidelity_check = True
    for kind in ("pure", "bures-mixed"):
        _fractions_run(cfg, report, _spec(cfg, n, "fidelity", kind), train, FIG2_FRACTIONS, f"{kind}-masked")
    report.metrics = {r.label: r.delta for r in report.runs}
    return report


def run_fig10(cfg: ExperimentConfig) -> EvalReport:
    n = cfg.size(200)
    report = _report(cfg, n_s=n, n_u=n, fractions=list(FIG2_FRACTIONS))
    report.fidelity_check = True
    for measure in ("discord", "fidelity"):
        spec = _spec(cfg, n, measure, "bures-mixed", evolution_kind="channel-pair")
        db = _fractions_run(cfg, report, spec, cfg.train_for(), FIG2_FRACTIONS, f"{measure}-masked")
        if measure == "discord":
            report.metrics["max_true_delta_d"] = float(db.ratings.max())
            report.metrics["frac_delta_d_above_1e-6"] = float(np.mean(db.ratings > dbgen.NONUNITARY_SIGN_TOL))
            # same ensemble under the product-channel reading, for comparison
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", dbgen.SignPropertyWarning)
                alt = _build(report, spec.with_(channel_mode="tensor"))
            report.metrics["tensor_mode_max_true_delta_d"] = float(alt.ratings.max())
    for r in report.runs:
        report.metrics[r.label] = r.delta
    return report


def run_binning(cfg: ExperimentConfig) -> EvalReport:
    """Classify columns local/nonlocal from predicted |dC| on their hidden cells.

    A column's score is the mean predicted |dC| over its hidden cells in the
    three databases (dS on pure rows, 2dN and dD on mixed rows); columns
    without hidden cells are not classified.
    """
    n = cfg.size(100)
    n += n % 2
    train = cfg.train_for()
    report = _report(cfg, n_s=n, n_u=n, fraction=0.1, threshold=BINNING_THRESHOLD)
    sums = np.zeros(n)
    counts = np.zeros(n)
    tags = None
    for k, (measure, kind) in enumerate(FIG2_MEASURES.values()):
        spec = _spec(cfg, n, measure, kind, evolution_kind="local-nonlocal-mix")
        db = _build(report, spec)
        tags = db.column_tags
        masked = _mask_frac(db, 0.1, cfg.seed, k)
        run = report.add_run(complete(masked, db.ratings, train, measure, fraction=0.1, seed=cfg.seed))
        np.add.at(sums, run.cols, np.abs(run.predicted))
        np.add.at(counts, run.cols, 1)
    seen = counts > 0
    score = np.where(seen, sums / np.maximum(counts, 1), np.nan)
    local = np.array([t == "local" for t in tags])
    guess = score < BINNING_THRESHOLD
    acc = float(np.mean(guess[seen] == local[seen]))
    cols = np.nonzero(seen)[0]
    pts = [(float(j), float(score[j]), tags[j]) for j in cols]
    report.add_panel(Panel("columns", "scatter", pts))
    report.metrics = {
        "accuracy": acc,
        "classified_columns": int(seen.sum()),
        "local_score_max": float(np.nanmax(np.where(local, score, np.nan))),
        "nonlocal_score_min": float(np.nanmin(np.where(~local, score, np.nan))),
    }
    return report


# -- timing ------------------------------------------------------------------------


def direct_delta_discord(spec: DatabaseSpec, rows, unitaries, r, c) -> np.ndarray:
    """Recompute dD for cells (r, c) from scratch: evolve, reduce, discord."""
    uniq, inv = np.unique(r, return_inverse=True)
    before = dbgen.correlation_values(spec, dbgen._reduce(spec, mats=rows.mats[uniq]))
    us = np.asarray(unitaries)[c]
    after = us @ rows.mats[r] @ np.conj(np.swapaxes(us, -1, -2))
    after = 0.5 * (after + np.conj(np.swapaxes(after, -1, -2)))
    return dbgen.correlation_values(spec, dbgen._reduce(spec, mats=after)) - before[inv]


def run_timing_study(cfg: ExperimentConfig) -> EvalReport:
    """tau_cal (direct dD of the hidden cells) against tau_RS (train + predict).

    Database construction is excluded from both sides. Each case is repeated
    ``cfg.repetitions`` times and the medians are reported.
    """
    train = cfg.train_for(TRAIN_TIMING)
    grid = DiscordConfig(refine=False)
    report = _report(cfg, cases=[list(c) for c in TIMING_CASES], fractions=list(TIMING_FRACTIONS), discord=asdict(grid))
    ratios = {}
    for ck, (nq, desk) in enumerate(TIMING_CASES):
        n = cfg.size(desk)
        spec = _spec(cfg, n, "discord", "bures-mixed", n_q=nq, part_p=tuple(range(nq)), discord=grid)
        t0 = time.perf_counter()
        rows = dbgen.generate_rows(spec)
        unitaries = dbgen.generate_unitaries(spec)
        table = dbgen.rate_database(spec, rows, unitaries)
        report.timing["db_build"] += time.perf_counter() - t0
        db = RatingDatabase(spec, table, np.ones(table.shape, dtype=bool))
        direct_delta_discord(spec, rows, unitaries, np.array([0]), np.array([0]))
        for fk, frac in enumerate(TIMING_FRACTIONS):
            masked = _mask_frac(db, frac, cfg.seed, 10 * ck + fk)
            r, c, truth = masked.hidden_cells()
            t_cal, t_rs, run = [], [], None
            for _ in range(cfg.repetitions):
                vals, t = _timed(direct_delta_discord, spec, rows, unitaries, r, c)
                t_cal.append(t)
                run = complete(masked, table, train, f"q{nq}-masked{int(round(100 * frac))}", n_q=nq, fraction=frac, seed=cfg.seed)
                t_rs.append(run.timing["train"] + run.timing["predict"])
            tau_cal, tau_rs = float(np.median(t_cal)), float(np.median(t_rs))
            run.timing = {"direct_compute": tau_cal, "train": run.timing["train"], "predict": run.timing["predict"]}
            run.params.update(
                tau_cal=tau_cal,
                tau_rs=tau_rs,
                ratio=tau_cal / tau_rs,
                tau_cal_all=t_cal,
                tau_rs_all=t_rs,
                direct_max_gap=float(np.max(np.abs(vals - truth))),
            )
            report.add_run(run)
            ratios[run.label] = {"ratio": tau_cal / tau_rs, "tau_cal": tau_cal, "tau_rs": tau_rs, "delta": run.delta}
    report.metrics = ratios
    return report


RUNNERS = {
    "fig2-entropy": run_fig2,
    "fig2-negativity": run_fig2,
    "fig2-discord": run_fig2,
    "fig3-sweep": run_fig3,
    "fig4-werner": run_fig4,
    "fig5-noise": run_fig5,
    "fig6-timing": run_timing_study,
    "fig7-multiqubit": lambda c: run_multiqubit(c, (("entropy", "pure"), ("discord", "bures-mixed"))),
    "fig8-fidelity": run_fig8,
    "fig9-fidelity-multiqubit": lambda c: run_multiqubit(c, (("fidelity", "pure"), ("fidelity", "bures-mixed"))),
    "fig10-nonunitary": run_fig10,
    "appendix-binning": run_binning,
}


def run_experiment(cfg: ExperimentConfig) -> EvalReport:
    """Run the named experiment and, if ``cfg.out_dir`` is set, write its files."""
    report = RUNNERS[cfg.name](cfg)
    if cfg.out_dir is not None:
        report.write(Path(cfg.out_dir))
    return report
