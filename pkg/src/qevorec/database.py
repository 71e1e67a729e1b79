"""Rating-database containers and their on-disk format.

A database ``<name>`` is stored as

* ``<name>.csv``: ``row,col,value,known``, one line per cell in row-major
  order (hidden cells carry ``nan``),
* ``<name>.meta.json``: the generating spec, seeds and library version,
* ``<name>.truth.csv``: ``row,col,value`` for the hidden cells, if any.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .correlations import DiscordConfig
from .errors import ArgumentError, SpecError

MEASURES = ("entropy", "negativity", "discord", "fidelity")
STATE_KINDS = ("pure", "bures-mixed")
EVOLUTION_KINDS = ("unitary", "channel-pair", "local-nonlocal-mix")
FMT = "%.17g"


def fmt(x) -> str:
    return FMT % x


@dataclass(frozen=True)
class DatabaseSpec:
    n_q: int = 2
    n_s: int = 200
    n_u: int = 200
    measure: str = "discord"
    state_kind: str = "bures-mixed"
    evolution_kind: str = "unitary"
    part_p: tuple = (0, 1)
    seed: int = 0
    unitary_scale: float = 1.0
    discord: DiscordConfig = DiscordConfig()
    channel_mode: str = "mixture"

    def __post_init__(self):
        object.__setattr__(self, "part_p", tuple(int(q) for q in self.part_p))
        if self.n_q < 2:
            raise SpecError("rating databases need at least two qubits")
        if self.n_s < 1 or self.n_u < 1:
            raise SpecError("n_s and n_u must be >= 1")
        if self.measure not in MEASURES:
            raise SpecError(f"unknown measure {self.measure!r}; expected one of {MEASURES}")
        if self.state_kind not in STATE_KINDS:
            raise SpecError(f"unknown state kind {self.state_kind!r}; expected one of {STATE_KINDS}")
        if self.evolution_kind not in EVOLUTION_KINDS:
            raise SpecError(f"unknown evolution kind {self.evolution_kind!r}")
        p = self.part_p
        if len(p) < 2 or len(set(p)) != len(p) or any(q < 0 or q >= self.n_q for q in p):
            raise SpecError(f"part_p {p} must hold >= 2 distinct qubit indices below {self.n_q}")
        if not self.unitary_scale > 0:
            raise SpecError("unitary_scale must be positive")
        if self.channel_mode not in ("mixture", "tensor"):
            raise SpecError(f"unknown channel mode {self.channel_mode!r}")

    @property
    def whole_system(self) -> bool:
        return self.part_p == tuple(range(self.n_q))

    def with_(self, **kw) -> "DatabaseSpec":
        return replace(self, **kw)

    def to_json(self):
        d = asdict(self)
        d["part_p"] = list(self.part_p)
        return d

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        if isinstance(d.get("discord"), dict):
            d["discord"] = DiscordConfig(**d["discord"])
        if "part_p" in d:
            d["part_p"] = tuple(d["part_p"])
        return cls(**d)


@dataclass
class RatingDatabase:
    spec: Optional[DatabaseSpec]
    ratings: np.ndarray
    known_mask: np.ndarray
    hidden_truth: Optional[np.ndarray] = None
    column_tags: Optional[list] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ratings = np.asarray(self.ratings, dtype=float)
        self.known_mask = np.asarray(self.known_mask, dtype=bool)
        if self.ratings.ndim != 2 or self.ratings.shape != self.known_mask.shape:
            raise ArgumentError("ratings and known_mask must be equal-shaped 2-D tables")
        if not np.all(np.isfinite(self.ratings[self.known_mask])):
            raise ArgumentError("every known cell must be finite")
        if self.hidden_truth is None:
            self.hidden_truth = np.full(self.ratings.shape, np.nan)
        self.hidden_truth = np.asarray(self.hidden_truth, dtype=float)

    @property
    def shape(self):
        return self.ratings.shape

    @property
    def n_hidden(self) -> int:
        return int(np.count_nonzero(~self.known_mask))

    def hidden_cells(self):
        """(rows, cols, truth) of hidden cells, row-major."""
        rows, cols = np.nonzero(~self.known_mask)
        return rows, cols, self.hidden_truth[rows, cols]

    def copy(self) -> "RatingDatabase":
        return RatingDatabase(
            self.spec,
            self.ratings.copy(),
            self.known_mask.copy(),
            self.hidden_truth.copy(),
            list(self.column_tags) if self.column_tags is not None else None,
            json.loads(json.dumps(self.meta)),
        )

    def unmask(self) -> "RatingDatabase":
        out = self.copy()
        hid = ~out.known_mask
        out.ratings[hid] = out.hidden_truth[hid]
        out.known_mask[:] = True
        out.hidden_truth[:] = np.nan
        return out

    def full_truth(self) -> np.ndarray:
        """Known values where known, hidden truth elsewhere."""
        return np.where(self.known_mask, self.ratings, self.hidden_truth)

    # -- files -----------------------------------------------------------------

    def save(self, prefix, version: str = "") -> list[Path]:
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        paths = [prefix.with_name(prefix.name + ".csv"), prefix.with_name(prefix.name + ".meta.json")]
        n_s, n_u = self.shape
        with open(paths[0], "w", newline="", encoding="utf-8") as fh:
            fh.write("row,col,value,known\n")
            for i in range(n_s):
                for j in range(n_u):
                    k = bool(self.known_mask[i, j])
                    fh.write(f"{i},{j},{fmt(self.ratings[i, j]) if k else 'nan'},{int(k)}\n")
        meta = {
            "spec": self.spec.to_json() if self.spec else None,
            "n_s": n_s,
            "n_u": n_u,
            "column_tags": self.column_tags,
            "library_version": version,
            **self.meta,
        }
        with open(paths[1], "w", encoding="utf-8", newline="\n") as fh:
            json.dump(meta, fh, indent=2)
            fh.write("\n")
        if self.n_hidden:
            tpath = prefix.with_name(prefix.name + ".truth.csv")
            rows, cols, vals = self.hidden_cells()
            write_triplets(tpath, rows, cols, vals)
            paths.append(tpath)
        return paths

    @classmethod
    def load(cls, prefix) -> "RatingDatabase":
        prefix = Path(prefix)
        name = prefix.name
        for suffix in (".csv", ".meta.json"):
            if name.endswith(suffix):
                prefix = prefix.with_name(name[: -len(suffix)])
        meta = json.loads(prefix.with_name(prefix.name + ".meta.json").read_text(encoding="utf-8"))
        n_s, n_u = int(meta.pop("n_s")), int(meta.pop("n_u"))
        ratings = np.full((n_s, n_u), np.nan)
        known = np.zeros((n_s, n_u), dtype=bool)
        with open(prefix.with_name(prefix.name + ".csv"), newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                i, j = int(rec["row"]), int(rec["col"])
                known[i, j] = rec["known"].strip() == "1"
                ratings[i, j] = float(rec["value"])
        truth = np.full((n_s, n_u), np.nan)
        tpath = prefix.with_name(prefix.name + ".truth.csv")
        if tpath.exists():
            rows, cols, vals = read_triplets(tpath)
            truth[rows, cols] = vals
        spec_d = meta.pop("spec", None)
        tags = meta.pop("column_tags", None)
        meta.pop("library_version", None)
        spec = DatabaseSpec.from_json(spec_d) if spec_d else None
        return cls(spec, ratings, known, truth, tags, meta)


def write_triplets(path, rows, cols, vals, header=("row", "col", "value")):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i, j, v in zip(rows, cols, vals):
            fh.write(f"{int(i)},{int(j)},{fmt(v)}\n")


def read_triplets(path):
    rows, cols, vals = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(int(rec["row"]))
            cols.append(int(rec["col"]))
            vals.append(float(rec["value"]))
    return np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp), np.array(vals, dtype=float)
