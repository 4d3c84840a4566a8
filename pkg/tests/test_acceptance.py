"""Acceptance criteria, one test per criterion.

Each check prints (and records for the pytest summary) a single line
``criterion <k>: PASS|FAIL <detail>``.  Run directly with
``python tests/test_acceptance.py`` to get just those lines.
"""
import csv
import math
import os
import sys
import tempfile
import time

os.environ.setdefault("VECBAL_CHECK", "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402
from scipy import stats  # noqa: E402

from vecbal.bench import RunConfig, compare, kk1d, random_signing  # noqa: E402
from vecbal.cli import main as cli_main  # noqa: E402
from vecbal.core import VectorSet, discrepancy  # noqa: E402
from vecbal.dist import sample_instance, triangular, uniform  # noqa: E402
from vecbal.gkk import GkkConfig, gkk_run, tracking_tolerance  # noqa: E402
from vecbal.prdc import initial_state, run_phase  # noqa: E402
from vecbal.reduce import reduce_bound, reduce_full  # noqa: E402
from vecbal.rng import RngStream  # noqa: E402
from vecbal.theory import (  # noqa: E402
    MomentQuery,
    bivariate_rect,
    first_moment_log,
    moment_ratio,
    phi_profile,
    small_ball_checks,
)

pytestmark = pytest.mark.acceptance
LINES = []


def _log(k, ok, detail, sink=None):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    LINES.append(line)
    if sink is not None:
        sink.append(line)
    return ok


# ---------------------------------------------------------------- 1
def criterion_1():
    g = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = -np.inf
    bad = 0
    for _ in range(500):
        m = int(g.integers(1, 9))
        N = int(g.integers(1, 65))
        X = g.uniform(-1, 1, (m, N))
        res = reduce_full(X)
        lhs = discrepancy(VectorSet(X), res.signing).sup_norm
        rhs = reduce_bound(X)
        worst = max(worst, lhs / rhs)
        bad += lhs > rhs
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 10
    return ok, f"violations={bad}/500 max(lhs/bound)={worst:.3f} runtime={dt:.2f}s (limit 10s)"


# ---------------------------------------------------------------- 2
def criterion_2():
    t0 = time.perf_counter()
    gammas = [0.5, 1.0, 2.0]
    cfg = RunConfig(density="gaussian", grid=[(20, 1), (20, 2)], signers=["oracle"], trials=300, seed=1, gammas=gammas)
    _, summary = compare(cfg)
    dt = time.perf_counter() - t0
    worst = 0.0
    parts = []
    for cell in summary["cells"]:
        m = cell["m"]
        frac = cell["signers"]["oracle"]["fraction_below"]
        for gm in gammas:
            emp = frac[repr(gm)]
            target = 1 - math.exp(-2 * gm**m)
            pairs = 1 - math.exp(-(gm**m) / 2)
            worst = max(worst, abs(emp - target))
            parts.append(f"m={m},g={gm}: emp={emp:.3f} target={target:.3f} [g^m/2 law {pairs:.3f}]")
    ok = worst <= 0.15 and dt < 300
    return ok, f"max|emp-target|={worst:.3f} (tol 0.15) runtime={dt:.1f}s; " + "; ".join(parts)


# ---------------------------------------------------------------- 3
def criterion_3():
    t0 = time.perf_counter()
    ratios = {n: moment_ratio(MomentQuery(n, math.isqrt(n), gamma=2.0)) for n in (100, 200, 400, 800)}
    golden = moment_ratio(MomentQuery(500, 25, gamma=2.0))
    dt = time.perf_counter() - t0
    seq = [ratios[n] for n in (100, 200, 400, 800)]
    mono = all(b <= a for a, b in zip(seq, seq[1:]))
    ok = 1 <= ratios[800] <= 2 and mono and 1 <= golden <= 1.5 and dt < 120
    shown = " ".join(f"n={n}:{r:.5f}" for n, r in ratios.items())
    return ok, f"{shown} nonincreasing={mono} (500,25):{golden:.5f} runtime={dt:.2f}s"


# ---------------------------------------------------------------- 4
def criterion_4():
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "phi.csv")
        cli_main(["theory", "phi", "--n", "1000", "--m", str(math.isqrt(1000)), "--eps", repr(1 / 1000), "--out", path])
        with open(path) as fh:
            rows = list(csv.reader(fh))
    a = np.array([float(r[0]) for r in rows[1:]])
    v = np.array([float(r[1]) for r in rows[1:]])
    d2 = v[2:] - 2 * v[1:-1] + v[:-2]
    concave = bool(np.all(d2 < 0))
    sym = float(np.max(np.abs(v - v[::-1]) / np.abs(v)))
    amax = float(a[np.argmax(v)])
    big = phi_profile(MomentQuery(10**5, 316, eps=1e-5))
    curv = big.second_diff_at(0.5) / 10**5
    ok = concave and sym <= 1e-8 and amax == 0.5 and abs(curv / -4 - 1) <= 0.05
    return ok, f"concave={concave} symmetry={sym:.1e} argmax={amax} phi''(1/2)/n at n=1e5={curv:.4f} (target -4 +-5%)"


# ---------------------------------------------------------------- 5
def criterion_5():
    q = MomentQuery(10**4, 100, gamma=0.9)
    r = math.exp(first_moment_log(q)) / 0.9**100
    return 0.95 <= r <= 1.05, f"E[S]/gamma^m={r:.12f} (band [0.95, 1.05])"


# ---------------------------------------------------------------- 6
def criterion_6():
    n, m = 2**16, 2
    rho = uniform(1.0)
    gk, rd, times = [], [], []
    verified = True
    tracked_ok = True
    survival_min = 1.0
    bad_max = 0.0
    where = ""
    for s in range(10):
        X = sample_instance(rho, m, n, RngStream(s, (0,)))
        t0 = time.perf_counter()
        res = gkk_run(X, rho, GkkConfig(), RngStream(s, (1,)))
        times.append(time.perf_counter() - t0)
        again = discrepancy(X, res.signing)
        verified &= abs(again.sup_norm - res.sup_norm) <= 1e-9 * res.sup_norm
        tracked_ok &= res.tracking_error <= tracking_tolerance(X, again.coordinate_sums)
        gk.append(res.sup_norm)
        rd.append(random_signing(X, RngStream(s, (2,))).sup_norm)
        for d in res.phases:
            if d.terminal:
                continue
            if d.survival < survival_min:
                survival_min, where = d.survival, f"seed {s} phase {d.phase}"
            bad_max = max(bad_max, d.bad_fraction)
    g_med, r_med = float(np.median(gk)), float(np.median(rd))
    ok_a = verified and tracked_ok
    ok_b = g_med <= r_med / 100
    ok_c = survival_min >= 0.3 and bad_max <= 0.1
    ok_t = max(times) < 60
    detail = (
        f"(a) reverified={verified} tracked={tracked_ok}; "
        f"(b) median gkk={g_med:.3e} random={r_med:.3e} ratio={r_med / g_med:.3g} (need >=100); "
        f"(c) min survival={survival_min:.3f} at {where} (need >=0.3), max bad fraction={bad_max:.3f} (need <=0.1); "
        f"max runtime={max(times):.2f}s"
    )
    return ok_a and ok_b and ok_c and ok_t, detail


# ---------------------------------------------------------------- 7
def criterion_7():
    n, m = 10**5, 2
    X = sample_instance(uniform(1.0), m, n, RngStream(77, (0,)))
    st, diag = run_phase(initial_state(X, uniform(1.0)), GkkConfig().resolved(n, m).gamma, RngStream(77, (1,)))
    pooled = st.values.ravel()
    p = stats.kstest(pooled, triangular(st.alpha).cdf).pvalue
    return p > 0.001, f"KS p={p:.4f} over {pooled.size} pooled phase-2 coordinates (alpha_2={st.alpha:.4f})"


# ---------------------------------------------------------------- 8
def _mc_rect(rho, z, N, gen, chunk=10**6):
    hits = 0
    c = math.sqrt(1 - rho * rho)
    done = 0
    while done < N:
        k = min(chunk, N - done)
        a, b = gen.standard_normal((2, k))
        y = rho * a + c * b
        hits += int(np.count_nonzero((np.abs(a) <= z) & (np.abs(y) <= z)))
        done += k
    p = hits / N
    return p, math.sqrt(p * (1 - p) / N)


def criterion_8():
    rep = small_ball_checks(np.linspace(0.005, 0.995, 20), np.linspace(-0.495, 0.495, 10))
    gen = RngStream(88).generator()
    worst = 0.0
    for _ in range(20):
        rho = float(gen.uniform(-0.95, 0.95))
        z = float(gen.uniform(0.05, 2.0))
        p, se = _mc_rect(rho, z, 10**7, gen)
        worst = max(worst, abs(bivariate_rect(rho, z) - p) / se)
    ok = rep.ok and worst <= 3
    return ok, f"grid points={rep.checked - 40} bivariate + 40 univariate, violations={len(rep.violations)}; MC max |dev|/SE={worst:.2f} (limit 3)"


# ---------------------------------------------------------------- 9
def criterion_9():
    n = 10**5
    rho = uniform(1.0)
    gk, kk = [], []
    for s in range(20):
        X = sample_instance(rho, 1, n, RngStream(s, (9,)))
        gk.append(gkk_run(X, rho, GkkConfig(), RngStream(s, (10,))).sup_norm)
        kk.append(kk1d(X.data).sup_norm)
    g_med, k_med = float(np.median(gk)), float(np.median(kk))
    ok = g_med <= 10 * k_med
    return ok, f"median gkk={g_med:.3e} kk1d={k_med:.3e} (need gkk <= 10*kk1d)"


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, criterion_log):
    ok, detail = CRITERIA[k]()
    assert _log(k, ok, detail, criterion_log), detail


if __name__ == "__main__":
    results = [_log(k, *CRITERIA[k]()) for k in sorted(CRITERIA)]
    sys.exit(0 if all(results) else 1)
