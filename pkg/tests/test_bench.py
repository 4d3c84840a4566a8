import csv
import json
import math

import numpy as np
import pytest

from vecbal.bench import CSV_FIELDS, RunConfig, compare, kk1d, random_signing, regenerate_instance
from vecbal.core import VectorSet, brute_force_min
from vecbal.dist import parse_density
from vecbal.errors import DomainError, ValidationError
from vecbal.rng import RngStream


def test_random_signing_single_column():
    X = VectorSet(np.array([[0.5], [-2.0]]))
    assert random_signing(X, RngStream(1)).sup_norm == 2.0


def test_random_signing_seeded():
    X = VectorSet(np.random.default_rng(0).normal(size=(2, 50)))
    assert str(random_signing(X, RngStream(3)).signing) == str(random_signing(X, RngStream(3)).signing)


def test_random_signing_clt_band():
    n = 10**4
    vals = []
    for t in range(100):
        X = VectorSet(np.random.default_rng(t).standard_normal((1, n)))
        vals.append(random_signing(X, RngStream(t, (1,))).sup_norm)
    # |N(0, n)| has median 0.674 sqrt(n)
    assert math.sqrt(n) / 3 <= np.median(vals) <= 3 * math.sqrt(n)


def test_kk1d_examples():
    assert kk1d([1, 2, 3]).sup_norm == 0.0
    rep = kk1d([4, 5, 6, 7, 8])
    # 8-7=1, 6-5=1, 4-1=3, 3-1=2: the heap leaves 2 although 0 is attainable
    assert rep.sup_norm == 2.0
    assert brute_force_min(VectorSet(np.array([[4.0, 5, 6, 7, 8]]))).sup_norm == 0.0
    assert kk1d([-3.0, 1.0, 2.0]).sup_norm == 0.0
    with pytest.raises(DomainError):
        kk1d(np.ones((2, 3)))


def test_kk1d_residual_small():
    vals = [kk1d(np.random.default_rng(t).random(10**4)).sup_norm for t in range(20)]
    assert np.median(vals) <= 1e-8


def _write_cfg(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return RunConfig.from_file(p)


def test_config_file(tmp_path):
    cfg = _write_cfg(
        tmp_path,
        "density = uniform:1   # inputs\ngrid = 30x1, 200x2\nsigners = oracle, kk1d, gkk\ntrials = 2\nseed = 5\ngammas = 1, 2\n",
    )
    assert cfg.grid == [(30, 1), (200, 2)]
    assert cfg.scheduled(30, 1) == ["kk1d", "gkk"]
    assert cfg.scheduled(20, 2) == ["oracle", "gkk"]
    with pytest.raises(ValidationError):
        _write_cfg(tmp_path, "signers = magic\n")
    with pytest.raises(ValidationError):
        _write_cfg(tmp_path, "colour = red\n")


def test_empty_signers_header_only(tmp_path):
    compare(RunConfig(signers=[], grid=[(10, 1)], trials=3), tmp_path)
    assert (tmp_path / "results.csv").read_text() == ",".join(CSV_FIELDS) + "\n"


def test_compare_outputs_and_determinism(tmp_path):
    cfg = RunConfig(
        density="uniform:1",
        grid=[(16, 1), (300, 2)],
        signers=["gkk", "random", "oracle", "reduce_only", "kk1d"],
        trials=4,
        seed=9,
        gammas=[1.0],
        verify_fraction=1.0,
    )
    recs, summary = compare(cfg, tmp_path / "a")
    compare(cfg, tmp_path / "b")
    for name in ("results.csv", "summary.json", "phases.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert summary["reverify"]["checked"] == len(recs)
    assert summary["reverify"]["mismatches"] == 0
    rows = list(csv.DictReader(open(tmp_path / "a" / "results.csv")))
    assert {r["signer"] for r in rows if r["n"] == "300"} == {"gkk", "random", "reduce_only"}
    cell0 = summary["cells"][0]
    assert cell0["gkk_below_oracle"] == 0
    assert "limit_cdf" in cell0
    orc = {r.trial: r.sup_norm for r in recs if r.signer == "oracle"}
    for r in recs:
        if r.n == 16:
            assert r.sup_norm >= orc[r.trial]
    # stored seed coordinates regenerate the instance
    r = recs[-1]
    X = regenerate_instance(parse_density("uniform:1"), r.m, r.n, r.seed_hi, r.seed_lo)
    assert X.count == r.n
    lines = (tmp_path / "a" / "phases.jsonl").read_text().splitlines()
    assert all("n_good" in json.loads(l) for l in lines)


def test_timing_column(tmp_path):
    recs, _ = compare(RunConfig(signers=["random"], grid=[(10, 1)], trials=2, timing=True), tmp_path)
    assert all(r.wall_ms is not None and r.wall_ms >= 0 for r in recs)


def test_failures_become_rows(tmp_path):
    # oracle beyond its cap is not scheduled; a failing signer becomes a NaN row
    cfg = RunConfig(signers=["gkk"], grid=[(1, 1)], trials=1)
    recs, summary = compare(cfg, tmp_path)
    assert math.isnan(recs[0].sup_norm) and "ValidationError" in recs[0].error
    assert summary["cells"][0]["signers"]["gkk"]["failures"] == 1
    assert "nan" in (tmp_path / "results.csv").read_text()
