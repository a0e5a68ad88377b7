"""Heat-invariant values, oracles, and spectral extraction."""

import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from qcheat.group import make_quaternionic_spec
from qcheat.invariants import (
    Cn_zeta_series,
    SpectrumFile,
    asymptotic_report,
    bw_sphere_c1_integral,
    c0_zeta_series,
    compute_Cn,
    compute_c0,
    fit_heat_trace,
    spectral_extract,
    sphere_kappa,
)
from qcheat.kernel import heat_kernel_point


def test_c0_n1_closed_form():
    v, err = compute_c0(1)
    assert abs(v - 1.0 / 120.0) < 1e-10
    oracle = c0_zeta_series(1)
    assert abs(oracle - 1.0 / 120.0) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 3])
def test_c0_quadrature_vs_zeta_oracle(n):
    v, err = compute_c0(n)
    oracle = c0_zeta_series(n)
    assert abs(v - oracle) / oracle < 1e-9


@pytest.mark.parametrize("n", [1, 2, 3])
def test_c0_matches_kernel_diagonal(n):
    spec = make_quaternionic_spec(n)
    v, err = compute_c0(n)
    kv = heat_kernel_point(spec, 1.0, [0.0] * spec.m, [0.0] * 3)
    assert abs(v - kv.value) <= err + kv.err_estimate + 1e-14


def test_c0_positive_small_levels():
    for n in range(1, 7):
        v, _ = compute_c0(n)
        assert v > 0


def test_cn_bracket_limit():
    # (sinh y - y cosh y)/(y^2 sinh y) -> -1/3, so the bracket tends to
    # (2n+1)^2 + 2n(2n+1)/3 with no singularity
    from qcheat.invariants import _cn_bracket

    for n in (1, 2):
        lim = (2 * n + 1) ** 2 + 2 * n * (2 * n + 1) / 3.0
        assert float(_cn_bracket(np.array([0.0]), n)[0]) == pytest.approx(lim, rel=1e-12)
        assert float(_cn_bracket(np.array([1e-4]), n)[0]) == pytest.approx(lim, rel=1e-6)
        # both sides of the series/direct switch agree with a 50-digit reference
        import mpmath

        for y in (0.149999, 0.150001):
            with mpmath.workdps(50):
                yy = mpmath.mpf(y)
                ratio = (mpmath.sinh(yy) - yy * mpmath.cosh(yy)) / (yy * yy * mpmath.sinh(yy))
                ref = float((2 * n + 1) ** 2 - 2 * n * (2 * n + 1) * ratio)
            assert float(_cn_bracket(np.array([y]), n)[0]) == pytest.approx(ref, rel=1e-11)


@pytest.mark.parametrize("n", [1, 2])
def test_cn_vs_zeta_series_oracle(n):
    v, err = compute_Cn(n)
    oracle = Cn_zeta_series(n)
    assert abs(v - oracle) / oracle < 1e-9


@pytest.mark.parametrize("n", [1, 2])
def test_sphere_cross_check_independent_quadrature(n):
    # Cn * 16 n (n+2) must equal the sphere c1 integral; the second route is
    # scipy's quadrature, independent of the Gauss-Kronrod production path.
    cn, _ = compute_Cn(n)

    def integrand(y):
        ratio = (math.sinh(y) - y * math.cosh(y)) / (y * y * math.sinh(y))
        return (
            y ** (2 * n + 2)
            / math.sinh(y) ** (2 * n)
            * ((2 * n + 1) ** 2 - 2 * n * (2 * n + 1) * ratio)
        )

    val, _ = quad(integrand, 1e-10, 60.0, limit=200)
    bw = val / (4.0 * math.pi) ** (2 * n + 2)
    assert abs(cn * sphere_kappa(n) - bw) / bw < 1e-8


def test_report_flat_and_linearity():
    rep0 = asymptotic_report(1, 0.0)
    assert rep0.c1 == 0.0 and rep0.Q == 10
    assert rep0.provenance["flat_model"]
    repk = asymptotic_report(1, sphere_kappa(1))
    bw, _ = bw_sphere_c1_integral(1)
    assert repk.c1 == pytest.approx(bw, rel=1e-10)
    rep2 = asymptotic_report(1, 2.0 * sphere_kappa(1))
    assert rep2.c1 == pytest.approx(2.0 * repk.c1, rel=1e-14)
    doc = json.loads(repk.to_json())
    assert doc["Q"] == 10 and doc["kappa"] == sphere_kappa(1)
    with pytest.raises(ValueError):
        asymptotic_report(1, float("nan"))


def test_fit_recovers_synthetic_trace():
    t = np.linspace(0.05, 0.5, 12)
    tr = t ** (-5.0) * (1.0 / 120.0 + 0.01 * t)
    Q, A, B, diag = fit_heat_trace(t, tr)
    assert abs(Q - 10.0) / 10.0 < 1e-4
    assert abs(A - 1.0 / 120.0) * 120.0 < 1e-4
    assert abs(B - 0.01) / 0.01 < 1e-4
    assert diag["condition_number"] < 1e6


def test_identical_spectra_identical_triple():
    ev = tuple(0.5 * k for k in range(0, 120))
    mult = tuple(1 + k * k for k in range(0, 120))
    sp1 = SpectrumFile(eigenvalues=ev, multiplicities=mult, label="a")
    sp2 = SpectrumFile(eigenvalues=ev, multiplicities=mult, label="b")
    grid = np.linspace(0.4, 1.2, 9)
    r1 = spectral_extract(sp1, grid)
    r2 = spectral_extract(sp2, grid)
    assert (r1["Q"], r1["A"], r1["B"]) == (r2["Q"], r2["A"], r2["B"])


def test_spectrum_errors():
    with pytest.raises(ValueError):
        SpectrumFile(eigenvalues=(), multiplicities=())
    with pytest.raises(ValueError):
        SpectrumFile(eigenvalues=(1.0, 0.5), multiplicities=(1, 1))
    with pytest.raises(ValueError):
        SpectrumFile(eigenvalues=(-1.0,), multiplicities=(1,))
    sp = SpectrumFile(eigenvalues=(0.0, 1.0), multiplicities=(1, 2))
    with pytest.raises(ValueError):
        spectral_extract(sp, [0.1, 0.2, 0.4])  # truncated tail far too large
    with pytest.raises(ValueError):
        fit_heat_trace([0.1, 0.2], [1.0, 2.0])  # too few points


def test_spectrum_parse_round_trip():
    txt = "# test spectrum\n0.0 1\n1.25 4\n2.5 6\n"
    sp = SpectrumFile.parse(txt, label="fixture")
    assert sp.eigenvalues == (0.0, 1.25, 2.5)
    assert sp.multiplicities == (1, 4, 6)
    back = SpectrumFile.parse(sp.dump())
    assert back.eigenvalues == sp.eigenvalues and back.multiplicities == sp.multiplicities
    with pytest.raises(ValueError):
        SpectrumFile.parse("1.0 2 3\n")
