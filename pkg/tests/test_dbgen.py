import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qevorec import dbgen
from qevorec.channels import ChannelPair, identity_channel, make_channel
from qevorec.correlations import discord, fidelity_uhlmann, negativity, von_neumann_entropy
from qevorec.database import DatabaseSpec, RatingDatabase, read_triplets
from qevorec.errors import ArgumentError, SpecError
from qevorec.qsys import (
    DensityMatrix,
    UnitaryOp,
    apply_unitary,
    cnot,
    partial_trace,
    random_unitary_matrix,
)
from qevorec.rng import Rng


def spec(**kw):
    base = dict(n_q=2, n_s=12, n_u=10, measure="discord", state_kind="bures-mixed", seed=5)
    base.update(kw)
    return DatabaseSpec(**base)


def direct_cell(sp, rho, u):
    # reference path through the object API: evolve, reduce, measure
    dm = DensityMatrix.from_array(rho)
    out = apply_unitary(dm, UnitaryOp(u, sp.n_q))
    if not sp.whole_system:
        dm, out = partial_trace(dm, sp.part_p), partial_trace(out, sp.part_p)
    if sp.measure == "fidelity":
        return fidelity_uhlmann(dm, out)
    if sp.measure == "entropy":
        f = lambda r: von_neumann_entropy(partial_trace(r, [0]))
    elif sp.measure == "negativity":
        f = lambda r: 2 * negativity(r)
    else:
        f = discord
    return f(out) - f(dm)


# -- unitary databases -------------------------------------------------------


@pytest.mark.parametrize(
    "kw",
    [
        dict(measure="entropy", state_kind="pure"),
        dict(measure="negativity"),
        dict(measure="discord"),
        dict(measure="fidelity", state_kind="pure"),
        dict(measure="fidelity"),
        dict(n_q=3, measure="entropy", state_kind="pure"),
        dict(n_q=3, measure="discord"),
        dict(n_q=4, measure="fidelity", state_kind="pure", part_p=(1, 3)),
    ],
)
def test_cells_match_direct_computation(kw):
    sp = spec(n_s=4, n_u=3, **kw)
    db = dbgen.build_unitary_db(sp)
    rows = dbgen.generate_rows(sp)
    us = dbgen.generate_unitaries(sp)
    for i in range(sp.n_s):
        for j in range(sp.n_u):
            assert db.ratings[i, j] == pytest.approx(direct_cell(sp, rows.mats[i], us[j]), abs=1e-8)
    assert db.known_mask.all()


def test_identity_column():
    for kw in (dict(measure="entropy", state_kind="pure"), dict(measure="negativity"), dict(measure="discord")):
        sp = spec(**kw)
        t = dbgen.rate_database(sp, dbgen.generate_rows(sp), [np.eye(4)])
        assert np.max(np.abs(t)) <= 1e-12
    for kind in ("pure", "bures-mixed"):
        sp = spec(measure="fidelity", state_kind=kind)
        t = dbgen.rate_database(sp, dbgen.generate_rows(sp), [np.eye(4)])
        assert np.allclose(t, 1.0, atol=1e-10)


def test_local_column_discord_invariance():
    sp = spec(n_s=30)
    rng = Rng(9)
    u = np.kron(random_unitary_matrix(1, rng.child(0)), random_unitary_matrix(1, rng.child(1)))
    t = dbgen.rate_database(sp, dbgen.generate_rows(sp), [u])
    assert np.max(np.abs(t)) <= 5e-3


def test_cnot_column_reproduces_werner_curve():
    eps = np.linspace(0, 1, 7)
    fx = dbgen.build_werner_fixture(eps)
    rows = dbgen.StateRows.from_states(fx.rows)
    t2n = dbgen.rate_database(spec(measure="negativity"), rows, [fx.column.mat])
    td = dbgen.rate_database(spec(), rows, [fx.column.mat])
    assert np.allclose(t2n[:, 0], fx.truth_2n, atol=1e-10)
    assert np.allclose(td[:, 0], fx.truth_d, atol=1e-8)


def test_rebuild_is_bit_identical():
    for kw in (dict(), dict(measure="entropy", state_kind="pure", n_q=3), dict(evolution_kind="channel-pair")):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", dbgen.SignPropertyWarning)
            a = dbgen.build_database(spec(**kw))
            b = dbgen.build_database(spec(**kw))
        assert a.ratings.tobytes() == b.ratings.tobytes()


def test_column_order_independence():
    sp = spec()
    rows = dbgen.generate_rows(sp)
    us = dbgen.generate_unitaries(sp)
    fwd = dbgen.rate_database(sp, rows, us)
    rev = dbgen.rate_database(sp, rows, us[::-1])
    assert np.array_equal(fwd, rev[:, ::-1])
    # more columns leave the existing ones untouched
    wide = dbgen.build_unitary_db(sp.with_(n_u=15)).ratings
    assert np.array_equal(wide[:, : sp.n_u], fwd)


@pytest.mark.parametrize(
    "kw,lo,hi",
    [
        (dict(measure="entropy", state_kind="pure"), -1, 1),
        (dict(measure="negativity"), -1, 1),
        (dict(measure="discord"), -1, 1),
        (dict(measure="fidelity"), 0, 1),
        (dict(measure="fidelity", state_kind="pure"), 0, 1),
        (dict(n_q=4, measure="entropy", state_kind="pure"), -1, 1),
        (dict(n_q=4, measure="discord"), -1, 1),
    ],
)
def test_cell_ranges(kw, lo, hi):
    t = dbgen.build_unitary_db(spec(n_s=20, n_u=20, **kw)).ratings
    assert np.all(np.isfinite(t))
    assert np.all((t >= lo - 1e-12) & (t <= hi + 1e-12))


def test_spec_errors():
    with pytest.raises(SpecError):
        dbgen.build_unitary_db(spec(measure="entropy"))
    with pytest.raises(SpecError):
        DatabaseSpec(n_q=2, part_p=(0, 0))
    with pytest.raises(SpecError):
        DatabaseSpec(n_q=2, part_p=(0, 2))
    with pytest.raises(SpecError):
        DatabaseSpec(measure="purity")
    with pytest.raises(SpecError):
        dbgen.build_nonunitary_db(spec(n_q=3, evolution_kind="channel-pair"))
    with pytest.raises(SpecError):
        dbgen.build_nonunitary_db(spec(state_kind="pure", evolution_kind="channel-pair"))
    with pytest.raises(SpecError):
        dbgen.build_local_nonlocal_db(spec(n_u=7, evolution_kind="local-nonlocal-mix"))
    with pytest.raises(SpecError):
        dbgen.build_unitary_db(spec(evolution_kind="channel-pair"))


# -- nonunitary -----------------------------------------------------------------


def test_identity_pair_column():
    pair = ChannelPair(identity_channel(), identity_channel())
    sp = spec(evolution_kind="channel-pair")
    rows = dbgen.generate_rows(sp)
    assert np.max(np.abs(dbgen.rate_database(sp, rows, [pair], kind="channel-pair"))) <= 1e-12
    f = dbgen.rate_database(sp.with_(measure="fidelity"), rows, [pair], kind="channel-pair")
    assert np.allclose(f, 1.0, atol=1e-10)


def test_maximally_mixed_row_unital_fidelity():
    sp = spec(measure="fidelity", evolution_kind="channel-pair")
    rows = dbgen.StateRows(np.eye(4)[None].astype(complex) / 4)
    rng = Rng(13)
    pairs = [ChannelPair(make_channel(a, rng.uniform()), make_channel(b, rng.uniform())) for a in "XYZD" for b in "XYZD"]
    f = dbgen.rate_database(sp, rows, pairs, kind="channel-pair")
    assert np.allclose(f, 1.0, atol=1e-10)


def test_nonunitary_fidelity_in_range():
    t = dbgen.build_nonunitary_db(spec(measure="fidelity", evolution_kind="channel-pair", n_s=30, n_u=30)).ratings
    assert np.all((t >= 0) & (t <= 1))


def test_nonunitary_sign_check_reports_worst_cell():
    sp = spec(evolution_kind="channel-pair", n_s=40, n_u=40)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        db = dbgen.build_nonunitary_db(sp)
    worst = float(db.ratings.max())
    assert db.meta["max_delta_discord"] == worst
    raised = any(issubclass(w.category, dbgen.SignPropertyWarning) for w in rec)
    assert raised == (worst > dbgen.NONUNITARY_SIGN_TOL)


def test_channel_pairs_recorded_in_meta():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", dbgen.SignPropertyWarning)
        db = dbgen.build_nonunitary_db(spec(evolution_kind="channel-pair"))
    pairs = dbgen.generate_channel_pairs(db.spec)
    assert db.meta["channel_pairs"] == [p.to_json() for p in pairs]


# -- local / nonlocal ----------------------------------------------------------------


def test_local_nonlocal_columns():
    ent = dbgen.build_local_nonlocal_db(spec(measure="entropy", state_kind="pure", evolution_kind="local-nonlocal-mix"))
    neg = dbgen.build_local_nonlocal_db(spec(measure="negativity", evolution_kind="local-nonlocal-mix"))
    dis = dbgen.build_local_nonlocal_db(spec(measure="discord", evolution_kind="local-nonlocal-mix"))
    tags = np.array(ent.column_tags)
    assert (tags == "local").sum() == (tags == "nonlocal").sum() == 5
    loc = tags == "local"
    assert np.max(np.abs(ent.ratings[:, loc])) <= 1e-8
    assert np.max(np.abs(neg.ratings[:, loc])) <= 1e-8
    assert np.max(np.abs(dis.ratings[:, loc])) <= 5e-3
    assert np.max(np.abs(dis.ratings[:, ~loc])) > 5e-3


def test_tags_serialize(tmp_path):
    db = dbgen.build_local_nonlocal_db(spec(evolution_kind="local-nonlocal-mix"))
    db.save(tmp_path / "ln")
    assert RatingDatabase.load(tmp_path / "ln").column_tags == db.column_tags


# -- masking ------------------------------------------------------------------------


def full_db(n=100, m=100, seed=0):
    g = np.random.default_rng(seed)
    return RatingDatabase(None, g.uniform(-1, 1, (n, m)), np.ones((n, m), bool))


def test_mask_examples():
    db = full_db()
    assert dbgen.mask_random(db, 1, Rng(0)).n_hidden == 1
    m = dbgen.mask_random(db, 9000, Rng(0))
    assert m.n_hidden == 9000
    assert m.known_mask.sum() + m.n_hidden == db.ratings.size
    assert np.array_equal(m.unmask().ratings, db.ratings)
    for bad in (0, 10_000):
        with pytest.raises(ArgumentError):
            dbgen.mask_random(db, bad, Rng(0))


def test_mask_reproducible():
    db = full_db(20, 20)
    a = dbgen.mask_fraction(db, 0.5, 3)
    b = dbgen.mask_fraction(db, 0.5, 3)
    assert np.array_equal(a.known_mask, b.known_mask)
    assert not np.array_equal(a.known_mask, dbgen.mask_fraction(db, 0.5, 4).known_mask)


@settings(max_examples=20)
@given(st.integers(1, 99), st.integers(0, 2**31))
def test_mask_keeps_truth(n_r, seed):
    db = full_db(10, 10)
    m = dbgen.mask_random(db, n_r, Rng(seed))
    r, c, truth = m.hidden_cells()
    assert np.array_equal(truth, db.ratings[r, c])
    assert np.all(np.isnan(m.ratings[r, c]))
    assert np.array_equal(m.full_truth(), db.ratings)


def test_mask_cells_are_uniform():
    db = full_db(10, 10)
    hits = np.zeros((10, 10))
    for k in range(2000):
        hits += ~dbgen.mask_random(db, 10, Rng(k)).known_mask
    # each cell hidden with probability 0.1: 200 +- 3 sigma
    assert np.all(np.abs(hits - 200) <= 3 * np.sqrt(2000 * 0.1 * 0.9) + 1)


# -- noise ---------------------------------------------------------------------------


def test_noise_examples():
    db = dbgen.mask_random(full_db(200, 200), 100, Rng(1))
    same = dbgen.inject_noise(db, 0.0, dbgen.noise_rng(0))
    assert np.array_equal(same.ratings, db.ratings, equal_nan=True)
    k = db.known_mask
    full = dbgen.inject_noise(db, 1.0, dbgen.noise_rng(0))
    assert np.all(np.abs(full.ratings[k]) < 1)
    assert abs(np.corrcoef(full.ratings[k], db.ratings[k])[0, 1]) <= 0.05
    small = dbgen.inject_noise(db, 0.1, dbgen.noise_rng(0))
    assert np.all(np.abs(small.ratings[k] - db.ratings[k]) <= 0.1 * (1 + np.abs(db.ratings[k])))
    assert np.array_equal(small.hidden_truth, db.hidden_truth, equal_nan=True)
    assert np.all(np.isnan(small.ratings[~k]))
    for bad in (-0.1, 1.1):
        with pytest.raises(ArgumentError):
            dbgen.inject_noise(db, bad, dbgen.noise_rng(0))


# -- Werner fixture -------------------------------------------------------------------


def test_werner_fixture_examples():
    fx = dbgen.build_werner_fixture([0.0, 1 / 3, 1.0])
    assert fx.truth_2n[0] == 0 and fx.truth_d[0] == pytest.approx(0, abs=1e-9)
    assert fx.truth_2n[1] == pytest.approx(0, abs=1e-15) and fx.truth_d[1] > 0
    assert fx.truth_2n[2] == pytest.approx(1) and fx.truth_d[2] == pytest.approx(1, abs=1e-6)
    assert np.allclose(fx.column.mat, cnot().mat)
    with pytest.raises(ArgumentError):
        dbgen.build_werner_fixture([1.5])


def test_werner_rows_uncorrelated():
    fx = dbgen.build_werner_fixture(np.linspace(0, 1, 5))
    for r in fx.rows:
        assert discord(r) == pytest.approx(0, abs=1e-8)
        assert negativity(r) == pytest.approx(0, abs=1e-12)


# -- files -----------------------------------------------------------------------------


def test_file_round_trip(tmp_path):
    db = dbgen.mask_random(dbgen.build_unitary_db(spec()), 30, Rng(2))
    paths = db.save(tmp_path / "sub" / "d", version="x")
    assert [p.name for p in paths] == ["d.csv", "d.meta.json", "d.truth.csv"]
    lines = paths[0].read_text().splitlines()
    assert lines[0] == "row,col,value,known"
    assert len(lines) == 1 + db.ratings.size
    back = RatingDatabase.load(tmp_path / "sub" / "d")
    assert np.array_equal(back.known_mask, db.known_mask)
    assert np.array_equal(back.ratings, db.ratings, equal_nan=True)
    assert np.array_equal(back.hidden_truth, db.hidden_truth, equal_nan=True)
    assert back.spec == db.spec
    r, c, v = read_triplets(paths[2])
    assert np.array_equal(v, db.hidden_cells()[2])


def test_file_layout_is_lf_utf8(tmp_path):
    db = full_db(3, 3)
    paths = db.save(tmp_path / "d")
    for p in paths:
        assert b"\r\n" not in p.read_bytes()
