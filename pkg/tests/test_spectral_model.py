import math

import numpy as np
import pytest
from scipy.integrate import quad
from oracles import fourier_by_quadrature, triangle_fourier

from memk.errors import DegenerateObservable, DimensionMismatch, NegativeSpectralDensity
from memk.spectral_model import (
    PROBE_TARGETS,
    EthEnsemble,
    EthEnsembleConfig,
    EthObservable,
    ReferenceFunction,
    ReferenceKind,
    Spectrum,
    build_observable,
    sample_spectrum,
    select_initial_levels,
    spectral_density_of_g,
    spectral_filter,
    two_level_benchmark,
)

TAU = 10.0


@pytest.mark.parametrize("kind", ["exponential", "oscillation", "linear"])
def test_reference_is_one_at_origin(kind):
    assert ReferenceFunction(kind)(0.0) == 1.0


def test_table_values():
    # [PAPER] Table I forms at tau = 10, v = 0.016
    t = 7.3
    assert ReferenceFunction("exponential")(t) == pytest.approx(math.exp(-math.log(2) / TAU * t))
    assert ReferenceFunction("oscillation")(t) == pytest.approx(math.cos(2 * math.pi / TAU * t) * math.exp(-t / 20))
    assert ReferenceFunction("linear")(t) == pytest.approx(1 - t / 20)
    assert ReferenceFunction("linear")(25.0) == 0.0
    rec = ReferenceFunction("recurrence")
    assert rec(0.0) == pytest.approx(1 + math.exp(-100 / 0.016))
    assert rec(TAU) == pytest.approx(0.5 + math.exp(-100 / 0.016) + 0.5 * math.exp(-400 / 0.016))
    assert ReferenceFunction("exponential")(TAU) == pytest.approx(0.5)


@pytest.mark.parametrize("kind", list(ReferenceKind))
def test_reference_is_even(kind):
    g = ReferenceFunction(kind)
    t = np.linspace(0, 40, 301)
    np.testing.assert_array_equal(g(t), g(-t))


@pytest.mark.parametrize("kind,support", [("exponential", 800.0), ("oscillation", 800.0), ("linear", 20.0)])
@pytest.mark.parametrize("omega", [0.0, 0.07, 0.3, 0.63, 1.7])
def test_fourier_matches_quadrature(kind, support, omega):
    g = ReferenceFunction(kind)
    expected = fourier_by_quadrature(g, omega, support)
    assert float(g.fourier(omega)) == pytest.approx(expected, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("omega", [0.0, 0.5, 3.0, 10.0])
def test_recurrence_fourier_matches_quadrature(omega):
    g = ReferenceFunction("recurrence")
    # the peaks are narrow, so integrate around each one separately
    expected = 2 * sum(quad(lambda t: g(t) * math.cos(omega * t), lo, hi)[0] for lo, hi in ((0, 1), (9, 11)))
    assert float(g.fourier(omega)) == pytest.approx(expected, rel=1e-6)


def test_linear_fourier_oracle():
    w = np.linspace(0, 3, 50)
    np.testing.assert_allclose(ReferenceFunction("linear").fourier(w), triangle_fourier(w, 20.0), rtol=1e-12)


def test_spectrum_invariants():
    with pytest.raises(ValueError):
        Spectrum(np.array([1.0, 0.0]), 2.0)
    with pytest.raises(ValueError):
        Spectrum(np.array([0.0, 3.0]), 2.0)
    with pytest.raises(ValueError):
        Spectrum(np.array([0.0]), 2.0)


def test_sample_spectrum_is_deterministic_and_inside_band():
    cfg = EthEnsembleConfig(dimension=500, seed=11)
    a, b = sample_spectrum(cfg), sample_spectrum(cfg)
    np.testing.assert_array_equal(a.energies, b.energies)
    assert np.all(np.diff(a.energies) >= 0)
    assert np.all(np.abs(a.energies) <= 30.0)
    assert not np.array_equal(a.energies, sample_spectrum(cfg.with_(seed=12)).energies)


def test_config_validation():
    with pytest.raises(ValueError):
        EthEnsembleConfig(dimension=1)
    with pytest.raises(ValueError):
        EthEnsembleConfig(spectral_cutoff=2.5)
    with pytest.raises(ValueError):
        EthEnsembleConfig(seed=-1)
    with pytest.raises(ValueError):
        EthEnsembleConfig(seed=2**64)


def test_spectral_density_rejects_negative_transform():
    class Bad(ReferenceFunction):
        def fourier(self, omega):
            return np.cos(np.asarray(omega, dtype=float))

    with pytest.raises(NegativeSpectralDensity):
        spectral_density_of_g(Bad("exponential"), np.array([0.0, 3.0]))


def test_spectral_filter_cutoff_and_range():
    spec = Spectrum(np.array([-30.0, 30.0]), 30.0)
    ref = ReferenceFunction("exponential")
    assert spectral_filter(ref, spec, 46.0) == 0.0
    assert spectral_filter(ref, spec, 10.0) > 0.0
    with pytest.raises(ValueError):
        spectral_filter(ref, spec, 61.0)
    # f^2 * nu reproduces g-hat inside the cutoff
    w = 5.0
    assert spectral_filter(ref, spec, w) ** 2 * spec.pair_density(w) == pytest.approx(ref.fourier(w))


@pytest.fixture(scope="module")
def ensemble():
    cfg = EthEnsembleConfig(dimension=400, reference=ReferenceFunction("oscillation"), seed=5)
    spec = sample_spectrum(cfg)
    return cfg, spec, build_observable(spec, cfg)


def test_observable_invariants(ensemble):
    _, _, obs = ensemble
    a = obs.matrix
    np.testing.assert_array_equal(a, a.T)
    assert np.max(np.abs(obs.eigenvalues)) == pytest.approx(1.0, abs=1e-14)
    b = obs.eigenbasis
    assert np.max(np.abs(b.T @ b - np.eye(len(b)))) <= 1e-10
    assert np.max(np.abs((b * obs.eigenvalues) @ b.T - a)) <= 1e-8
    off_scale = np.sqrt(np.mean(a[~np.eye(len(a), dtype=bool)] ** 2))
    assert abs(np.trace(a)) <= 5 * math.sqrt(len(a)) * off_scale


def test_observable_is_reproducible(ensemble):
    cfg, spec, obs = ensemble
    again = build_observable(spec, cfg)
    np.testing.assert_array_equal(obs.matrix, again.matrix)
    np.testing.assert_array_equal(obs.eigenbasis, again.eigenbasis)


def test_build_observable_dimension_mismatch(ensemble):
    cfg, spec, _ = ensemble
    with pytest.raises(DimensionMismatch):
        build_observable(spec, cfg.with_(dimension=10))


def test_degenerate_observable_rejected():
    with pytest.raises(DegenerateObservable):
        EthObservable.from_matrix(np.eye(3))


def test_select_initial_levels():
    obs = EthObservable.from_matrix(np.diag([-1.0, 0.2, 0.3, 0.9]))
    assert select_initial_levels(obs, [0.25, 1.0, -2 / 3]) == [1, 3, 0]
    with pytest.raises(ValueError):
        select_initial_levels(obs, [1.5])


def test_two_level_benchmark_layout():
    spec, obs = two_level_benchmark()
    np.testing.assert_array_equal(spec.energies, [-1.0, 1.0])
    np.testing.assert_allclose(obs.eigenvalues, [-1.0, 1.0])
    # H in the A basis is -sigma_x for the (down, up) ordering
    h = obs.hamiltonian_in_eigenbasis(spec)
    np.testing.assert_allclose(np.abs(h), [[0, 1], [1, 0]], atol=1e-15)
    assert np.allclose(np.diag(h), 0.0)


def test_estimator_wrapper():
    est = EthEnsemble(dimension=50, reference="linear", seed=2).fit()
    assert est.observable_.dimension == 50
    assert est.config_.reference.kind is ReferenceKind.LINEAR
    assert len(est.probe_levels()) == len(PROBE_TARGETS)
    assert est.get_params()["dimension"] == 50
