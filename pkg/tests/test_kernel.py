import math
import warnings

import numpy as np
import pytest
from oracles import damped_oscillator, pauli

from memk.errors import ExtractionUnstable, GridMismatch, SignalStartsAtZero, StepTooLarge, ZeroNormObservable
from memk.grid import Signal, TimeGrid
from memk.kernel import (
    KernelModel,
    check_laplace_shift,
    damp_kernel,
    default_s_samples,
    derivative,
    extract_kernel,
    fit_decay_rate,
    kernel_laplace,
    laplace_of_signal,
    mori_from_energies,
    mori_initial_value,
    predict_integral,
    predict_scheme,
    solve_volterra,
    zeno_approximation,
)


def sig(func, horizon, dt):
    grid = TimeGrid.covering(horizon, dt)
    return Signal(grid, func(grid.times))


def test_derivative_stencils_exact_for_cubics():
    grid = TimeGrid(0.1, 20)
    t = grid.times
    d = derivative(1 + 2 * t - t**2 + 0.5 * t**3, 0.1)
    exact = 2 - 2 * t + 1.5 * t**2
    assert abs(d[0] - exact[0]) < 1e-12
    # central and backward stencils are exact for quadratics
    q = derivative(1 + 2 * t - t**2, 0.1)
    np.testing.assert_allclose(q, 2 - 2 * t, atol=1e-12)


# --- solve_volterra -----------------------------------------------------------


def test_zero_kernel_gives_constant():
    grid = TimeGrid(0.01, 100)
    a = solve_volterra(KernelModel.constant(0.0, grid), 1.0, grid)
    np.testing.assert_array_equal(a.values, 1.0)


def test_constant_kernel_gives_cosine():
    # [DERIVED] a'' = -4a, a'(0)=0
    grid = TimeGrid.covering(10, 1e-3)
    a = solve_volterra(KernelModel.constant(4.0, grid), 1.0, grid)
    assert np.max(np.abs(a.values - np.cos(2 * grid.times))) <= 1e-5


def test_delta_kernel_gives_exponential():
    grid = TimeGrid.covering(10, 1e-3)
    a = solve_volterra(KernelModel.delta(0.3, grid), 2.0, grid)
    assert a.values[0] == 2.0
    np.testing.assert_allclose(a.values, 2.0 * np.exp(-0.3 * grid.times), atol=1e-7)


def test_grid_mismatch():
    with pytest.raises(GridMismatch):
        solve_volterra(KernelModel.constant(1.0, TimeGrid(0.1, 10)), 1.0, TimeGrid(0.05, 10))


# --- extract_kernel ------------------------------------------------------------


def test_exponential_gives_delta_weight():
    beta = 0.2
    a = sig(lambda t: np.exp(-beta * t), 20, (1 / beta) / 500)
    k = extract_kernel(a)
    assert k.delta_weight == pytest.approx(beta, rel=1e-6)
    assert np.max(np.abs(k.smooth.values)) <= 1e-3 * beta


def test_cosine_gives_constant_kernel():
    a = sig(lambda t: np.cos(2 * t), 3, 1e-3)
    k = extract_kernel(a)
    assert k.delta_weight == pytest.approx(0.0, abs=1e-9)
    lags = k.smooth.times
    assert np.max(np.abs(k.smooth.values[lags <= 1] - 4.0)) <= 1e-3


def test_extraction_errors():
    with pytest.raises(SignalStartsAtZero):
        extract_kernel(sig(lambda t: np.sin(t), 1, 0.01))
    rng = np.random.default_rng(0)
    grid = TimeGrid(0.01, 400)
    noisy = Signal(grid, np.cos(grid.times) + 1e-2 * rng.standard_normal(len(grid)))
    with pytest.raises(ExtractionUnstable):
        extract_kernel(noisy)
    with pytest.raises(ExtractionUnstable):
        extract_kernel(Signal(grid, np.where(grid.times < 1, 1.0, 0.0)))
    with pytest.raises(ValueError):
        extract_kernel(Signal(TimeGrid(0.1, 2), np.ones(3)))


def test_extraction_floor_truncates():
    a = sig(lambda t: np.exp(-t), 20, 0.01)
    k = extract_kernel(a, floor=1e-3)
    assert len(k.smooth) < len(a)
    assert a.values[len(k.smooth)] < 1e-3


@pytest.mark.parametrize("func", [lambda t: np.cos(2 * t), lambda t: np.exp(-0.3 * t) * np.cos(t),
                                  lambda t: 0.5 * (1 + np.exp(-t**2))])
def test_roundtrip_second_order(func):
    errs = []
    for dt in (0.02, 0.01):
        a = sig(func, 10, dt)
        back = solve_volterra(extract_kernel(a), a.values[0], a.grid)
        errs.append(back.max_abs_diff(a))
    assert 3.0 <= errs[0] / errs[1] <= 5.0


# --- damping and prediction ----------------------------------------------------------


def test_damp_kernel():
    grid = TimeGrid(0.01, 100)
    k = KernelModel.constant(4.0, grid, delta_weight=0.3)
    assert damp_kernel(k, 0.0).smooth.max_abs_diff(k.smooth) == 0.0
    d = damp_kernel(k, 2.0)
    np.testing.assert_allclose(d.smooth.values, 4 * np.exp(-2 * grid.times))
    assert d.delta_weight == 0.3
    delta = KernelModel.delta(0.5, grid)
    assert damp_kernel(delta, 7.0).smooth.max_abs_diff(delta.smooth) == 0.0


def test_predict_scheme_two_level():
    # [DERIVED] damped oscillator closed form
    a = sig(lambda t: np.cos(2 * t), 10, 1e-3)
    out = predict_scheme(a, 1.0)
    assert np.max(np.abs(out.values - damped_oscillator(a.times, 1.0))) <= 1e-4


def test_predict_scheme_gamma_zero_is_roundtrip():
    a = sig(lambda t: np.exp(-0.1 * t) * np.cos(t), 20, 0.01)
    assert predict_scheme(a, 0.0).max_abs_diff(a) < 1e-4


def test_predict_scheme_keeps_exponential():
    # [PAPER] Corollary 1: exponential relaxation is unaltered
    a = sig(lambda t: np.exp(-0.07 * t), 30, 0.05)
    for gamma in (0.01, 1.0, 30.0):
        assert predict_scheme(a, gamma).max_abs_diff(a) < 1e-5


def test_predict_integral_routes():
    a = sig(lambda t: np.cos(2 * t), 10, 1e-3)
    np.testing.assert_array_equal(predict_integral(a, a, 0.0).values, a.values)
    for gamma in (0.5, 20.0):
        integral = predict_integral(a, a, gamma)
        assert np.max(np.abs(integral.values - damped_oscillator(a.times, gamma))) <= 1e-4
        assert integral.max_abs_diff(predict_scheme(a, gamma)) <= 1e-4
    with pytest.raises(StepTooLarge):
        predict_integral(a, a, 3000.0)


def test_integral_and_scheme_converge_together():
    # cross-deviation shrinks ~4x when dt halves
    devs = []
    for dt in (0.02, 0.01):
        a = sig(lambda t: np.exp(-0.2 * t) * np.cos(1.5 * t), 10, dt)
        g = a.scaled(1.0 / a.values[0])
        devs.append(predict_scheme(a, 0.7).max_abs_diff(predict_integral(a, g, 0.7)))
    assert 3.0 <= devs[0] / devs[1] <= 5.0


# --- Mori, Zeno ------------------------------------------------------------------


def test_mori_two_level():
    # [DERIVED] [sx,[sx,sz]] = 4 sz
    sx, _, sz = pauli()
    assert mori_initial_value(sx, sz) == pytest.approx(4.0)
    assert mori_initial_value(np.diag([1.0, 2.0]), np.diag([3.0, -1.0])) == 0.0
    with pytest.raises(ZeroNormObservable):
        mori_initial_value(sx, np.zeros((2, 2)))


def test_mori_from_energies_matches_commutator():
    rng = np.random.default_rng(7)
    e = np.sort(rng.uniform(-2, 2, 6))
    m = rng.standard_normal((6, 6))
    m = m + m.T
    assert mori_from_energies(e, m) == pytest.approx(mori_initial_value(np.diag(e), m))


def test_zeno_formula():
    grid = TimeGrid(0.1, 100)
    z = zeno_approximation(4.0, 20.0, 1.0, grid)
    np.testing.assert_allclose(z.values, np.exp(-0.2 * grid.times))
    frozen = zeno_approximation(4.0, 1e9, 0.7, grid)
    np.testing.assert_allclose(frozen.values, 0.7, rtol=1e-7)
    with pytest.warns(RuntimeWarning):
        zeno_approximation(4.0, 1.0, 1.0, grid)


def test_zeno_two_level_oracle_curve():
    # overdamped regime: scheme output against exp(-4t/gamma)
    a = sig(lambda t: np.cos(2 * t), 10, 1e-3)
    out = predict_scheme(a, 20.0)
    assert out.max_abs_diff(zeno_approximation(4.0, 20.0, 1.0, a.grid)) <= 0.02
    assert fit_decay_rate(out) == pytest.approx(0.2, rel=0.1)


def test_fit_decay_rate():
    a = sig(lambda t: 3 * np.exp(-0.4 * t), 10, 0.01)
    assert fit_decay_rate(a) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        fit_decay_rate(Signal(TimeGrid(0.1, 3), np.zeros(4)))


# --- Laplace -------------------------------------------------------------------------


def test_laplace_constant_and_exponential():
    a = sig(np.ones_like, 20, 0.05)
    for s in (0.3, 1.0, 2.5):
        assert laplace_of_signal(a, s) == pytest.approx((1 - math.exp(-s * 20)) / s, rel=1e-12)
    b = sig(lambda t: np.exp(-0.4 * t), 30, 0.01)
    for s in (0.5, 1.0):
        assert laplace_of_signal(b, s) == pytest.approx(1 / (s + 0.4), abs=math.exp(-5) / s)
    with pytest.raises(ValueError):
        laplace_of_signal(a, -1.0)
    with pytest.warns(RuntimeWarning):
        laplace_of_signal(a, 0.1)


def test_laplace_complex_s():
    b = sig(lambda t: np.exp(-0.4 * t), 40, 0.01)
    s = 0.8 + 1.3j
    assert abs(laplace_of_signal(b, s) - 1 / (s + 0.4)) < 1e-5


def test_kernel_transform_of_cosine():
    # [DERIVED] K = 4 -> kappa(s) = 4/s
    a = sig(lambda t: np.cos(2 * t), 10, 1e-3)
    assert kernel_laplace(a, 2.0) == pytest.approx(2.0, rel=0.01)


def test_laplace_shift_identity():
    a = sig(lambda t: np.cos(2 * t), 10, 1e-3)
    samples = default_s_samples(a.grid, 1.0)
    assert len(samples) >= 5
    assert check_laplace_shift(a, a, 0.0, samples) == pytest.approx(0.0, abs=1e-12)
    for gamma in (0.5, 2.0):
        assert check_laplace_shift(a, predict_scheme(a, gamma), gamma, samples) <= 0.02


def test_default_s_samples_window():
    grid = TimeGrid.covering(30, 0.05)
    s = default_s_samples(grid, 30.0)
    assert s[0] == pytest.approx(5 / 30) and s[-1] == pytest.approx(2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        laplace_of_signal(Signal(grid, np.ones(len(grid))), s[0])
