"""Command-line entry point.

Exit codes: 0 success, 1 usage or invalid input, 2 I/O failure, 3 flagged
result (training divergence or a degenerate scaled-RMS denominator).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .. import __version__, dbgen, mfrec
from ..database import DatabaseSpec, RatingDatabase, read_triplets, write_triplets
from ..errors import QevorecError
from ..mfrec import FactorModel, TrainConfig
from ..rng import Rng
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_FLAGGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _settings(args, keys, defaults):
    """Flag value if given, else the config-file value, else the default."""
    conf = {}
    if getattr(args, "config", None):
        conf = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(conf, dict):
            raise UsageError(f"config file {args.config} must hold a JSON object")
    out = {}
    for k in keys:
        v = getattr(args, k, None)
        if v is None:
            v = conf.get(k.replace("_", "-"), conf.get(k, defaults.get(k)))
        out[k] = v
    return out


def _load_db(path) -> RatingDatabase:
    p = Path(path)
    csv_path = p if p.suffix == ".csv" else p.with_name(p.name + ".csv")
    meta_path = csv_path.with_name(csv_path.name[: -len(".csv")] + ".meta.json")
    if not csv_path.exists():
        raise FileNotFoundError(f"database file {csv_path} not found")
    if meta_path.exists():
        return RatingDatabase.load(csv_path)
    # bare cell file without metadata: infer the shape from the cells
    lines = [ln for ln in csv_path.read_text(encoding="utf-8").splitlines()[1:] if ln.strip()]
    cells = [ln.split(",") for ln in lines]
    n_s = 1 + max((int(c[0]) for c in cells), default=-1)
    n_u = 1 + max((int(c[1]) for c in cells), default=-1)
    ratings = np.full((n_s, n_u), np.nan)
    known = np.zeros((n_s, n_u), dtype=bool)
    for c in cells:
        i, j = int(c[0]), int(c[1])
        ratings[i, j] = float(c[2])
        known[i, j] = len(c) < 4 or c[3].strip() == "1"
    return RatingDatabase(None, ratings, known)


def _prefix(path):
    p = Path(path)
    return p.with_name(p.name[: -len(".csv")]) if p.name.endswith(".csv") else p


# -- subcommands -------------------------------------------------------------------


def cmd_gen_db(args):
    keys = ("qubits", "states", "unitaries", "measure", "state_kind", "evolution", "seed", "scale_generator", "part_p", "channel_mode")
    d = _settings(args, keys, {"qubits": 2, "states": 200, "unitaries": 200, "measure": "discord", "state_kind": "bures-mixed",
                               "evolution": "unitary", "seed": 0, "scale_generator": 1.0, "part_p": "0,1", "channel_mode": "mixture"})
    part = d["part_p"]
    part = tuple(int(q) for q in part.split(",")) if isinstance(part, str) else tuple(part)
    spec = DatabaseSpec(
        n_q=int(d["qubits"]), n_s=int(d["states"]), n_u=int(d["unitaries"]), measure=d["measure"],
        state_kind=d["state_kind"], evolution_kind=d["evolution"], part_p=part, seed=int(d["seed"]),
        unitary_scale=float(d["scale_generator"]), channel_mode=d["channel_mode"],
    )
    db = dbgen.build_database(spec)
    paths = db.save(_prefix(args.out), __version__)
    print(f"wrote {spec.n_s}x{spec.n_u} {spec.measure} database to {paths[0]}")
    return EXIT_OK


def cmd_mask(args):
    db = _load_db(args.db)
    if (args.fraction is None) == (args.count is None):
        raise UsageError("mask needs exactly one of --fraction or --count")
    n_r = args.count if args.count is not None else int(round(args.fraction * db.ratings.size))
    out = dbgen.mask_random(db, n_r, Rng(args.seed, (dbgen.MASK, 0)))
    out.save(_prefix(args.out or args.db), __version__)
    print(f"hid {n_r} cells ({out.n_hidden} hidden in total)")
    return EXIT_OK


def cmd_noise(args):
    db = _load_db(args.db)
    out = dbgen.inject_noise(db, args.eta, dbgen.noise_rng(args.seed))
    out.save(_prefix(args.out or args.db), __version__)
    print(f"applied eta={args.eta:g} noise to {int(out.known_mask.sum())} known cells")
    return EXIT_OK


def cmd_train(args):
    d = _settings(args, ("latent", "lambda_", "alpha", "iters", "rel_tol", "seed"), {})
    base = TrainConfig()
    cfg = TrainConfig(
        f=int(d["latent"] if d["latent"] is not None else base.f),
        lam=float(d["lambda_"] if d["lambda_"] is not None else base.lam),
        alpha=float(d["alpha"] if d["alpha"] is not None else base.alpha),
        max_iters=int(d["iters"] if d["iters"] is not None else base.max_iters),
        rel_tol=float(d["rel_tol"] if d["rel_tol"] is not None else base.rel_tol),
        seed=int(d["seed"] if d["seed"] is not None else base.seed),
    )
    db = _load_db(args.db)
    model, trace = mfrec.train(db, cfg)
    out = Path(args.model_out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(model.to_json()) + "\n", encoding="utf-8")
    s = trace.summary()
    print(f"stop={s['stop_reason']} iterations={s['iterations']} J={s['final_objective']}")
    return EXIT_FLAGGED if trace.stop_reason == mfrec.DIVERGED else EXIT_OK


def cmd_predict(args):
    model = FactorModel.from_json(json.loads(Path(args.model).read_text(encoding="utf-8")))
    db = _load_db(args.db)
    if model.shape != db.shape:
        raise QevorecError(f"model shape {model.shape} does not match database {db.shape}")
    if args.all or db.n_hidden == 0:
        rows, cols = np.indices(db.shape).reshape(2, -1)
    else:
        rows, cols, _ = db.hidden_cells()
    pred = mfrec.predict_cells(model, rows, cols)
    write_triplets(args.out, rows, cols, pred)
    print(f"predicted {rows.size} cells into {args.out}")
    return EXIT_OK


def cmd_eval(args):
    pr, pc, pv = read_triplets(args.pred)
    tr, tc, tv = read_triplets(args.truth)
    truth = {(int(i), int(j)): v for i, j, v in zip(tr, tc, tv)}
    missing = [(int(i), int(j)) for i, j in zip(pr, pc) if (int(i), int(j)) not in truth]
    if missing or len(truth) != pr.size:
        raise QevorecError(f"prediction and truth files cover different cells ({len(missing)} unmatched)")
    actual = np.array([truth[(int(i), int(j))] for i, j in zip(pr, pc)])
    delta = mfrec.rms_deviation(pv, actual)
    print(f"n_r={pv.size} delta={delta!r}")
    if args.scaled:
        ds, degenerate = mfrec.scaled_rms(pv, actual)
        print(f"delta_scaled={ds!r} degenerate_scale={str(degenerate).lower()}")
        if degenerate:
            return EXIT_FLAGGED
    return EXIT_OK


def _experiment_cfg(args, name):
    d = _settings(args, ("scale", "seed", "out_dir", "unitary_scale", "repetitions"),
                  {"scale": 0.2, "seed": 0, "out_dir": None, "unitary_scale": 1.0, "repetitions": 3})
    conf = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    train = TrainConfig.from_json(conf["train"]) if conf.get("train") else None
    return ExperimentConfig(
        name, scale=float(d["scale"]), train=train, seed=int(d["seed"]), out_dir=d["out_dir"],
        unitary_scale=float(d["unitary_scale"]), repetitions=int(d["repetitions"]),
    )


def _summarize(report):
    for r in report.runs:
        extra = f" delta_scaled={r.delta_scaled()[0]:.6g}" if r.scaled else ""
        print(f"{r.label}: n_r={r.n_r} delta={r.delta:.6g}{extra}")
    if report.metrics:
        print(json.dumps(report.metrics, default=str, sort_keys=True))
    return EXIT_FLAGGED if report.flagged else EXIT_OK


def cmd_experiment(args):
    conf = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    name = args.name or conf.get("name")
    if name is None:
        raise UsageError("experiment needs --name")
    return _summarize(run_experiment(_experiment_cfg(args, name)))


def cmd_timing(args):
    return _summarize(run_experiment(_experiment_cfg(args, "fig6-timing")))


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qevorec", description="Rate quantum evolutions with a latent-factor recommender.")
    p.add_argument("--version", action="version", version=f"qevorec {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen-db", help="build a full rating database")
    g.add_argument("--qubits", type=int)
    g.add_argument("--states", type=int)
    g.add_argument("--unitaries", type=int)
    g.add_argument("--measure", choices=("entropy", "negativity", "discord", "fidelity"))
    g.add_argument("--state-kind", choices=("pure", "bures-mixed"))
    g.add_argument("--evolution", choices=("unitary", "channel-pair", "local-nonlocal-mix"))
    g.add_argument("--seed", type=int)
    g.add_argument("--scale-generator", type=float)
    g.add_argument("--part-p", help="comma-separated qubit indices of part P")
    g.add_argument("--channel-mode", choices=("mixture", "tensor"))
    g.add_argument("--config")
    g.add_argument("--out", required=True, help="output prefix or .csv path")
    g.set_defaults(fn=cmd_gen_db)

    m = sub.add_parser("mask", help="hide random known cells")
    m.add_argument("--db", required=True)
    m.add_argument("--fraction", type=float)
    m.add_argument("--count", type=int)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out")
    m.set_defaults(fn=cmd_mask)

    n = sub.add_parser("noise", help="mix uniform noise into the known cells")
    n.add_argument("--db", required=True)
    n.add_argument("--eta", type=float, required=True)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--out")
    n.set_defaults(fn=cmd_noise)

    t = sub.add_parser("train", help="fit the factor model to the known cells")
    t.add_argument("--db", required=True)
    t.add_argument("--latent", type=int)
    t.add_argument("--lambda", dest="lambda_", type=float)
    t.add_argument("--alpha", type=float)
    t.add_argument("--iters", type=int)
    t.add_argument("--rel-tol", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--config")
    t.add_argument("--model-out", required=True)
    t.set_defaults(fn=cmd_train)

    pr = sub.add_parser("predict", help="predict the hidden cells of a database")
    pr.add_argument("--model", required=True)
    pr.add_argument("--db", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--all", action="store_true", help="predict every cell, not only hidden ones")
    pr.set_defaults(fn=cmd_predict)

    e = sub.add_parser("eval", help="RMS deviation between prediction and truth files")
    e.add_argument("--pred", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--scaled", action="store_true")
    e.set_defaults(fn=cmd_eval)

    for name, fn, helptext in (("experiment", cmd_experiment, "run a figure experiment"),
                               ("timing", cmd_timing, "run the direct-vs-recommender timing study")):
        x = sub.add_parser(name, help=helptext)
        if name == "experiment":
            x.add_argument("--name", choices=EXPERIMENTS)
        x.add_argument("--scale", type=float)
        x.add_argument("--seed", type=int)
        x.add_argument("--out-dir")
        x.add_argument("--unitary-scale", type=float)
        x.add_argument("--repetitions", type=int)
        x.add_argument("--config")
        x.set_defaults(fn=fn)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            print("qevorec: error: a subcommand is required", file=sys.stderr)
            return EXIT_USAGE
        return args.fn(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        print(f"qevorec: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (QevorecError, ValueError) as exc:
        print(f"qevorec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
