"""Property tests for the invariants of the model and the numerics."""

import tempfile
from pathlib import Path

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from memk import io
from memk.grid import DiagonalState, Signal, TimeGrid
from memk.kernel import KernelModel, damp_kernel, extract_kernel, solve_volterra
from memk.open_dynamics import lindblad_rhs
from memk.spectral_model import ReferenceFunction, ReferenceKind

finite = st.floats(-1e3, 1e3, allow_nan=False)
kinds = st.sampled_from(list(ReferenceKind))


@given(kinds, st.floats(0.5, 50), st.floats(0.005, 0.5), st.floats(0, 200))
def test_reference_even_and_normalized(kind, tau, v, t):
    g = ReferenceFunction(kind, tau, v)
    assert g(t) == g(-t)
    assert abs(g(0.0) - 1.0) < 1e-12 or kind is ReferenceKind.RECURRENCE
    assert abs(g(t)) <= 2.0 + 1e-12  # main peak plus two echoes of height 1/2


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.0, 3.0), st.floats(0.2, 3.0))
def test_roundtrip_identity(a0, decay, freq):
    # smooth signals with a'(0)=0 come back to discretization accuracy
    grid = TimeGrid.covering(5.0, 0.005)
    t = grid.times
    a = Signal(grid, a0 * np.exp(-decay * t**2) * np.cos(freq * t))
    back = solve_volterra(extract_kernel(a), a.values[0], grid)
    assert back.max_abs_diff(a) <= 1e-3 * a0


@given(arrays(float, st.integers(2, 50), elements=finite), st.floats(0, 10))
def test_damping_identity_and_delta(values, beta):
    kernel = KernelModel(beta, Signal(TimeGrid(0.1, len(values) - 1), values))
    same = damp_kernel(kernel, 0.0)
    np.testing.assert_array_equal(same.smooth.values, values)
    damped = damp_kernel(kernel, 1.0)
    assert damped.delta_weight == beta
    assert np.all(np.abs(damped.smooth.values) <= np.abs(values))


@given(arrays(float, st.integers(1, 30), elements=st.floats(0, 1)))
def test_diagonal_state_validation(weights):
    total = weights.sum()
    if total == 0:
        return
    normalized = weights / total
    if abs(normalized.sum() - 1) > 1e-12:
        return
    state = DiagonalState(normalized)
    assert state.dimension == len(weights)
    try:
        DiagonalState(normalized * 1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("unnormalized weights accepted")


def _random_state(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = m @ m.conj().T
    return rho / np.trace(rho).real, rng


@given(st.integers(2, 12), st.integers(0, 2**31), st.floats(0, 5))
def test_master_equation_preserves_trace_and_hermiticity(n, seed, gamma):
    rho, rng = _random_state(n, seed)
    h = rng.standard_normal((n, n))
    h = h + h.T
    d = lindblad_rhs(rho, h, gamma)
    assert abs(np.trace(d)) < 1e-10 * (1 + np.abs(h).max())
    np.testing.assert_allclose(d, d.conj().T, atol=1e-12 * (1 + np.abs(h).max()))


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture], deadline=None)
@given(arrays(float, st.integers(2, 40), elements=st.floats(-1e6, 1e6, allow_subnormal=True)),
       st.floats(1e-6, 10))
def test_signal_csv_roundtrip_bit_identical(values, dt):
    signal = Signal(TimeGrid(dt, len(values) - 1), values)
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "s.csv"
        io.write_signal(path, signal)
        back = io.read_signal(path)
    assert back.values.tobytes() == signal.values.tobytes()
    assert back.grid.dt == signal.grid.dt
