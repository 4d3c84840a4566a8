import math

import numpy as np
import pytest
from scipy import integrate, stats

from vecbal.dist import (
    check_density,
    density_to_spec,
    load_tabulated,
    parse_density,
    product_density_eval,
    product_lipschitz,
    sample_instance,
    subcube_density_min,
    tabulated,
    triangular,
    truncate_gaussian,
    truncated_gaussian,
    uniform,
)
from vecbal.errors import DomainError, ValidationError
from vecbal.rng import RngStream, generator_from_key

KINDS = [uniform(1.0), triangular(1.0), truncated_gaussian(3.0), tabulated([-1, 0, 1], [0.2, 1.0, 0.2])]


@pytest.mark.parametrize("rho", KINDS, ids=lambda r: r.kind)
def test_density_invariants(rho):
    rep = check_density(rho)
    assert abs(rep["mass"] - 1) < 1e-6
    assert rep["sup_ok"] and rep["lipschitz_ok"]


@pytest.mark.parametrize("rho", KINDS, ids=lambda r: r.kind)
def test_cdf_matches_integrated_pdf(rho):
    for x in (-0.7, 0.0, 0.3, 0.95):
        val, _ = integrate.quad(rho.pdf, -rho.half_width, x, points=[0.0] if x > 0 else None)
        assert float(rho.cdf(x)) == pytest.approx(val, abs=1e-9)


def test_sample_instance_support_and_determinism():
    X = sample_instance(uniform(1.0), 2, 3, RngStream(5))
    Y = sample_instance(uniform(1.0), 2, 3, RngStream(5))
    assert X.data.shape == (2, 3)
    assert np.all(np.abs(X.data) <= 1)
    assert np.array_equal(X.data, Y.data)


def test_sample_instance_column_major():
    g = RngStream(9).generator()
    flat = g.random(6) * 2 - 1
    X = sample_instance(uniform(1.0), 2, 3, RngStream(9))
    assert np.array_equal(X.column(0), flat[:2])
    assert np.array_equal(X.column(2), flat[4:])


def test_triangular_mean_band():
    vals, draws, _ = triangular(1.0).sample(RngStream(1), 100_000)
    assert draws == 200_000
    assert abs(vals.mean()) <= 3 * math.sqrt(1 / 6) / math.sqrt(100_000)


def test_triangular_is_difference_of_uniforms():
    R = 2.0
    a, _, _ = triangular(R / 2).sample(RngStream(2), 100_000)
    g = RngStream(3).generator()
    b = g.random(100_000) * (R / 2) - g.random(100_000) * (R / 2)
    assert stats.ks_2samp(a, b).pvalue > 0.001
    assert stats.kstest(a, lambda x: triangular(R / 2).cdf(x)).pvalue > 0.001


def test_truncated_gaussian_bounds():
    X, rej = truncate_gaussian(10, 10, 10.0, RngStream(4))
    assert rej == 0
    vals, _, _ = truncated_gaussian(3.0).sample(RngStream(4), 10_000)
    assert np.abs(vals).max() <= 3.0


def test_truncated_gaussian_acceptance_rate():
    d = 0.01
    X, rej = truncate_gaussian(1, 2000, d, RngStream(6))
    assert np.abs(X.data).max() <= d
    rate = X.count / (X.count + rej)
    p, _ = integrate.quad(lambda x: math.exp(-x * x / 2) / math.sqrt(2 * math.pi), -d, d)
    assert abs(rate - p) <= 0.1 * p


def test_product_density_examples():
    assert product_density_eval(uniform(1.0), [0.1, -0.9, 0.5]) == pytest.approx(0.125)
    assert product_density_eval(triangular(1.0), [0.0, 0.0]) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        product_density_eval(uniform(1.0), [1.5])


@pytest.mark.parametrize("rho", KINDS[:3], ids=lambda r: r.kind)
def test_product_lipschitz_spot_check(rho):
    g = np.random.default_rng(0)
    m = 3
    L = product_lipschitz(rho, m)
    for _ in range(1000):
        x, y = g.uniform(-rho.half_width, rho.half_width, (2, m))
        gx = product_density_eval(rho, x)
        gy = product_density_eval(rho, y)
        assert abs(gx - gy) <= L * np.abs(x - y).sum() + 1e-12


def test_subcube_min_examples():
    assert subcube_density_min(uniform(2.0), [0.1, 0.2], [0.3, 0.4]) == pytest.approx(1 / 16)
    assert subcube_density_min(triangular(1.0), [0.5], [0.75]) == pytest.approx(0.25)
    assert subcube_density_min(triangular(1.0), [0.5, -0.25], [0.75, 0.0]) == pytest.approx(0.1875)


@pytest.mark.parametrize("rho", KINDS, ids=lambda r: r.kind)
def test_subcube_min_is_a_lower_bound(rho):
    g = np.random.default_rng(1)
    for _ in range(20):
        lo = g.uniform(-rho.half_width, rho.half_width * 0.5, 2)
        hi = lo + g.uniform(0, rho.half_width * 0.5, 2)
        mn = subcube_density_min(rho, lo, hi)
        pts = g.uniform(lo, hi, (1000, 2))
        assert np.all(mn <= rho.pdf(pts).prod(axis=1) + 1e-15)


def test_parse_density_roundtrip(tmp_path):
    assert parse_density("uniform:2").half_width == 2.0
    assert parse_density("triangular:0.5").kind == "triangular"
    g = parse_density("gaussian", n=100)
    assert g.half_width == pytest.approx(3 * math.sqrt(math.log(100)))
    assert parse_density(density_to_spec(truncated_gaussian(3.0, 0.5))).sigma == 0.5
    p = tmp_path / "t.csv"
    p.write_text("-1,0\n0,1\n1,0\n")
    assert load_tabulated(p).pdf(0.0) == pytest.approx(1.0)
    assert parse_density(f"tabulated:{p}").kind == "tabulated"
    with pytest.raises(ValidationError):
        parse_density("cauchy")


def test_streams_are_addressable():
    a = RngStream(1, (2, 3))
    assert a.child(4) == RngStream(1, (2, 3, 4))
    assert np.array_equal(a.generator().random(5), generator_from_key(*a.key).random(5))
    assert not np.array_equal(a.generator().random(5), RngStream(1, (2, 4)).generator().random(5))
