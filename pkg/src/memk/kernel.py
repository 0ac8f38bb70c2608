"""Memory kernels of scalar signals and their damping by dephasing.

A signal ``a(t)`` and its kernel ``K`` are tied by

    a'(t) = -β a(t) - ∫_0^t K_s(t - t') a(t') dt'

where the kernel is split into an instantaneous part ``β δ(τ)`` and a smooth
sampled part ``K_s``. All quadratures are trapezoidal on a uniform grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_scalar, check_signal_array, check_square
from .errors import ExtractionUnstable, GridMismatch, SignalStartsAtZero, StepTooLarge, ZeroNormObservable
from .grid import Signal, TimeGrid, require_same_grid

__all__ = [
    "KernelModel",
    "derivative",
    "extract_kernel",
    "solve_volterra",
    "damp_kernel",
    "predict_scheme",
    "predict_integral",
    "mori_initial_value",
    "mori_from_energies",
    "zeno_approximation",
    "fit_decay_rate",
    "laplace_of_signal",
    "kernel_laplace",
    "default_s_samples",
    "check_laplace_shift",
    "MemoryKernel",
    "DecoherenceFilter",
]

MIN_INITIAL_VALUE = 1e-6
_RUNAWAY = 1e6


@dataclass(frozen=True, eq=False)
class KernelModel:
    """Memory kernel ``β δ(τ) + K_s(τ)`` with ``K_s`` sampled on a lag grid."""

    delta_weight: float
    smooth: Signal

    def __post_init__(self):
        if not math.isfinite(self.delta_weight):
            raise ValueError("delta_weight must be finite")

    @property
    def dt(self):
        return self.smooth.grid.dt

    @classmethod
    def constant(cls, value, grid, delta_weight=0.0):
        return cls(float(delta_weight), Signal(grid, np.full(len(grid), float(value))))

    @classmethod
    def delta(cls, weight, grid):
        return cls.constant(0.0, grid, delta_weight=weight)


def derivative(values, dt):
    """First derivative: one-sided 4-point stencil at ``t=0`` (O(dt³)), central inside, 3-point backward at the end."""
    a = np.asarray(values, dtype=float)
    d = np.empty_like(a)
    d[0] = (-11.0 * a[0] + 18.0 * a[1] - 9.0 * a[2] + 2.0 * a[3]) / (6.0 * dt)
    d[1:-1] = (a[2:] - a[:-2]) / (2.0 * dt)
    d[-1] = (3.0 * a[-1] - 4.0 * a[-2] + a[-3]) / (2.0 * dt)
    return d


def _second_derivative_at_zero(a, dt):
    return (2.0 * a[0] - 5.0 * a[1] + 4.0 * a[2] - a[3]) / dt**2


def extract_kernel(a: Signal, floor=None) -> KernelModel:
    """Invert the kernel equation for the memory kernel of ``a``.

    The instantaneous weight is ``max(0, -a'(0+)/a(0))``: the convolution
    vanishes at ``t = 0+`` so any initial slope has to come from it. ``K_s(0)``
    follows from the second derivative at zero; later samples are solved one
    by one from the trapezoid-discretized equation (a first-kind Volterra
    problem), each step dividing by ``a(0)``.

    Parameters
    ----------
    a : Signal
    floor : float, optional
        Stop the extraction at the first sample with ``|a(t_k)| < floor * |a(0)|``;
        the returned kernel is then shorter than ``a``.

    Raises
    ------
    SignalStartsAtZero
        If ``|a(0)| < 1e-6``.
    ExtractionUnstable
        If the deconvolution runs away (``|K_k| > 1e6 |K_0| + 1e6``).
    """
    values = np.asarray(a.values, dtype=float)
    if len(values) < 4:
        raise ValueError("extraction needs at least 4 samples")
    a0 = values[0]
    if abs(a0) < MIN_INITIAL_VALUE:
        raise SignalStartsAtZero(f"|a(0)| = {abs(a0):.3e} < {MIN_INITIAL_VALUE}")
    dt = a.grid.dt
    d = derivative(values, dt)
    beta = max(0.0, -d[0] / a0)
    if beta > 0.0:
        # keep the t=0 equation consistent: a'(0) = -β a(0)
        d[0] = -beta * a0

    n = len(values)
    if floor is not None:
        small = np.nonzero(np.abs(values[1:]) < floor * abs(a0))[0]
        if small.size:
            n = int(small[0]) + 1
    n = max(n, 2)

    kern = np.zeros(n)
    kern[0] = -(_second_derivative_at_zero(values, dt) + beta * d[0]) / a0
    limit = _RUNAWAY * abs(kern[0]) + _RUNAWAY
    for k in range(1, n):
        rhs = -(d[k] + beta * values[k]) / dt - 0.5 * kern[0] * values[k]
        if k > 1:
            rhs -= np.dot(kern[1:k], values[k - 1:0:-1])
        kern[k] = 2.0 * rhs / a0
        if abs(kern[k]) > limit:
            raise ExtractionUnstable(f"kernel runaway at t={k * dt:.4g}: |K|={abs(kern[k]):.3e}")
    return KernelModel(float(beta), Signal(TimeGrid(dt, n - 1), kern))


def solve_volterra(kernel: KernelModel, a0, grid: TimeGrid) -> Signal:
    """Integrate ``a' = -β a - K_s * a`` from ``a(0) = a0`` (second order).

    Trapezoidal time stepping with a trapezoidal convolution; the smooth kernel
    is taken as zero beyond its last sample.
    """
    if not math.isclose(kernel.dt, grid.dt, rel_tol=1e-12):
        raise GridMismatch(f"kernel spacing {kernel.dt} differs from grid spacing {grid.dt}")
    n = len(grid)
    dt = grid.dt
    beta = kernel.delta_weight
    kern = np.zeros(n)
    m = min(n, len(kernel.smooth))
    kern[:m] = kernel.smooth.values[:m]

    a = np.empty(n)
    a[0] = a0
    rate = -beta * a0
    denom = 1.0 + 0.5 * dt * beta + 0.25 * dt * dt * kern[0]
    for k in range(n - 1):
        known = 0.5 * kern[k + 1] * a0
        if k > 0:
            known += np.dot(kern[1:k + 1], a[k:0:-1])
        a[k + 1] = (a[k] + 0.5 * dt * rate - 0.5 * dt * dt * known) / denom
        rate = -beta * a[k + 1] - dt * (0.5 * kern[0] * a[k + 1] + known)
    return Signal(grid, a)


def damp_kernel(kernel: KernelModel, gamma) -> KernelModel:
    """Multiply the smooth part by ``exp(-γτ)``; the instantaneous part is unaffected."""
    check_scalar(gamma, "gamma", min_val=0.0)
    lags = kernel.smooth.times
    return KernelModel(kernel.delta_weight, Signal(kernel.smooth.grid, kernel.smooth.values * np.exp(-gamma * lags)))


def predict_scheme(a: Signal, gamma, floor=None) -> Signal:
    """Decohered dynamics through the kernel: extract, damp, solve forward."""
    kernel = extract_kernel(a, floor=floor)
    return solve_volterra(damp_kernel(kernel, gamma), a.values[0], a.grid)


def _exponential_trapezoid_weights(rate, h):
    """Weights ``(w0, w1)`` with ``∫_0^h e^{-rate s} f(s) ds = w0 f(0) + w1 f(h)`` for linear ``f``.

    ``rate`` may be complex.
    """
    x = rate * h
    if abs(x) < 1e-4:
        i0 = h * (1.0 - x / 2.0 + x * x / 6.0)
        i1 = h * (0.5 - x / 3.0 + x * x / 8.0)
    else:
        i0 = h * -np.expm1(-x) / x
        i1 = h * (-np.expm1(-x) - x * np.exp(-x)) / (x * x)
    if np.iscomplexobj(x):
        return complex(i0 - i1), complex(i1)
    return float(i0 - i1), float(i1)


def predict_integral(a: Signal, g: Signal, gamma) -> Signal:
    """Decohered dynamics from the second-kind integral equation

        ã(t) = a(t) e^{-γt} + γ ∫_0^t ã(t') g(t - t') e^{-γ(t - t')} dt'

    solved by forward substitution. The product ``ã g`` is interpolated
    linearly on each step and integrated exactly against the exponential, which
    reduces to the plain trapezoidal rule at ``γ = 0`` and stays second order
    without a ``γ² dt²`` error term when ``γ`` is large.

    Raises
    ------
    StepTooLarge
        If ``γ dt g(0) / 2 >= 1`` (the implicit diagonal term is not solvable).
    """
    require_same_grid(a, g)
    check_scalar(gamma, "gamma", min_val=0.0)
    dt = a.grid.dt
    t = a.times
    damping = np.exp(-gamma * t)
    if 0.5 * gamma * dt * abs(g.values[0]) >= 1.0:
        raise StepTooLarge(f"gamma*dt*g(0)/2 = {0.5 * gamma * dt * g.values[0]:.3g} >= 1; reduce dt")
    w0, w1 = _exponential_trapezoid_weights(gamma, dt)
    # weight of lag m: interval [m, m+1] contributes w0, interval [m-1, m] contributes w1
    inner = g.values * (damping * w0 + np.concatenate(([0.0], damping[:-1])) * w1)
    edge = g.values * np.concatenate(([0.0], damping[:-1])) * w1
    diag = gamma * w0 * g.values[0]
    forcing = a.values * damping
    out = np.empty(len(t))
    out[0] = a.values[0]
    for k in range(1, len(t)):
        acc = edge[k] * out[0]
        if k > 1:
            acc += np.dot(out[1:k], inner[k - 1:0:-1])
        out[k] = (forcing[k] + gamma * acc) / (1.0 - diag)
    return Signal(a.grid, out)


def mori_initial_value(hamiltonian, observable):
    """``Tr{A [H, [H, A]]} / Tr{A²}``, the zero-lag value of the kernel."""
    h = check_square(hamiltonian, "hamiltonian")
    a = check_square(observable, "observable")
    if h.shape != a.shape:
        raise ValueError(f"shapes differ: {h.shape} vs {a.shape}")
    norm = float(np.real(np.trace(a @ a)))
    if norm <= 1e-14:
        raise ZeroNormObservable(f"Tr(A^2) = {norm:.3e}")
    c1 = h @ a - a @ h
    c2 = h @ c1 - c1 @ h
    return float(np.real(np.trace(a @ c2))) / norm


def mori_from_energies(energies, matrix):
    """Same ratio for ``H = diag(energies)``: ``Σ ω_jl² a_jl² / Σ a_jl²``."""
    e = np.asarray(energies, dtype=float)
    sq = np.abs(np.asarray(matrix)) ** 2
    norm = float(sq.sum())
    if norm <= 1e-14:
        raise ZeroNormObservable(f"Tr(A^2) = {norm:.3e}")
    return float(((e[:, None] - e[None, :]) ** 2 * sq).sum()) / norm


def zeno_approximation(k0, gamma, a0, grid: TimeGrid) -> Signal:
    """Strong-dephasing limit ``a0 exp(-k0 t / γ)``; warns unless ``γ² >= 10 k0``."""
    check_scalar(k0, "k0", min_val=0.0)
    check_scalar(gamma, "gamma", min_val=0.0, include_min=False)
    if gamma**2 < 10.0 * k0:
        warnings.warn(f"gamma^2 = {gamma**2:.3g} is not >> K(0) = {k0:.3g}; Zeno form is unreliable",
                      RuntimeWarning, stacklevel=2)
    return Signal(grid, a0 * np.exp(-k0 * grid.times / gamma))


def fit_decay_rate(signal: Signal, t_min=0.0, rel_floor=1e-12):
    """Least-squares slope of ``-log|a(t)|`` over ``t >= t_min``."""
    t = signal.times
    v = np.abs(signal.values)
    mask = (t >= t_min) & (v > rel_floor * np.max(v))
    if mask.sum() < 2:
        raise ValueError("not enough samples above the floor to fit a rate")
    slope, _ = np.polyfit(t[mask], np.log(v[mask]), 1)
    return float(-slope)


def laplace_of_signal(a: Signal, s):
    """Truncated transform ``∫_0^T e^{-st} a(t) dt`` over the signal's window.

    ``a`` is interpolated linearly between samples (the trapezoidal model) and
    each piece is integrated exactly against the exponential, so the result
    carries no ``(s dt)²`` error. The truncation error is at most
    ``e^{-Re(s) T} max|a| / Re(s)``; a warning is issued when ``Re(s) T < 5``.
    """
    s = complex(s)
    if s.real <= 0:
        raise ValueError("Re(s) must be positive")
    if s.real * a.grid.horizon < 5.0:
        warnings.warn(f"Re(s)*horizon = {s.real * a.grid.horizon:.3g} < 5; truncation error not controlled",
                      RuntimeWarning, stacklevel=2)
    h = a.grid.dt
    w0, w1 = _exponential_trapezoid_weights(s, h)
    v = a.values
    val = np.sum(np.exp(-s * a.times[:-1]) * (w0 * v[:-1] + w1 * v[1:]))
    return val.real if s.imag == 0 else complex(val)


def kernel_laplace(a: Signal, s):
    """Kernel transform from ``s A(s) - a0 = -κ(s) A(s)``."""
    big_a = laplace_of_signal(a, s)
    return (a.values[0] - s * big_a) / big_a


def default_s_samples(grid: TimeGrid, half_width, count=6):
    """Real samples in ``[5/T, min(half_width, 0.1/dt)]``."""
    lo = 5.0 / grid.horizon
    hi = min(float(half_width), 0.1 / grid.dt)
    if hi <= lo:
        hi = 2.0 * lo
    return list(np.linspace(lo, hi, count))


def check_laplace_shift(a: Signal, a_tilde: Signal, gamma, s_samples):
    """Largest relative gap between ``κ̃(s)`` (from ``ã``) and ``κ(s + γ)`` (from ``a``)."""
    require_same_grid(a, a_tilde)
    worst = 0.0
    for s in s_samples:
        shifted = kernel_laplace(a, s + gamma)
        damped = kernel_laplace(a_tilde, s)
        worst = max(worst, abs(damped - shifted) / (abs(shifted) + 1e-12))
    return float(worst)


class MemoryKernel(BaseEstimator):
    """Memory-kernel estimator for a single sampled signal.

    ``fit`` extracts the kernel, ``predict`` integrates it forward again.

    Parameters
    ----------
    dt : float
        Sampling interval of the signals passed to ``fit``.
    floor : float or None
        Relative amplitude at which extraction is truncated.
    """

    def __init__(self, dt=0.05, floor=None):
        self.dt = dt
        self.floor = floor

    def fit(self, X, y=None):
        values = check_signal_array(X)
        if values.shape[0] != 1:
            raise ValueError("MemoryKernel fits one signal at a time")
        check_scalar(self.dt, "dt", min_val=0.0, include_min=False)
        signal = Signal(TimeGrid(self.dt, values.shape[1] - 1), values[0])
        self.kernel_ = extract_kernel(signal, floor=self.floor)
        self.delta_weight_ = self.kernel_.delta_weight
        self.smooth_ = self.kernel_.smooth.values
        self.a0_ = float(values[0, 0])
        self.n_features_in_ = values.shape[1]
        return self

    def predict(self, n_steps=None, a0=None, gamma=0.0):
        """Forward solution of the (optionally damped) fitted kernel."""
        check_is_fitted(self, "kernel_")
        steps = self.n_features_in_ - 1 if n_steps is None else int(n_steps)
        kernel = damp_kernel(self.kernel_, gamma) if gamma else self.kernel_
        out = solve_volterra(kernel, self.a0_ if a0 is None else a0, TimeGrid(self.dt, steps))
        return np.array(out.values)


class DecoherenceFilter(TransformerMixin, BaseEstimator):
    """Map closed-system signals (rows of ``X``) to their dephased counterparts.

    Parameters
    ----------
    gamma : float
        Dephasing rate.
    dt : float
        Sampling interval of the rows of ``X``.
    method : {"scheme", "integral"}
        ``"scheme"`` goes through the damped memory kernel; ``"integral"``
        solves the second-kind integral equation with ``g = a / a(0)``.
    floor : float or None
        Extraction truncation, ``"scheme"`` only.
    """

    def __init__(self, gamma=0.0, dt=0.05, method="scheme", floor=None):
        self.gamma = gamma
        self.dt = dt
        self.method = method
        self.floor = floor

    def fit(self, X, y=None):
        values = check_signal_array(X)
        check_scalar(self.gamma, "gamma", min_val=0.0)
        check_scalar(self.dt, "dt", min_val=0.0, include_min=False)
        if self.method not in ("scheme", "integral"):
            raise ValueError(f"method must be 'scheme' or 'integral', got {self.method!r}")
        self.n_features_in_ = values.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        values = check_signal_array(X)
        if values.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {values.shape[1]} samples per row, expected {self.n_features_in_}")
        grid = TimeGrid(self.dt, values.shape[1] - 1)
        out = np.empty_like(values)
        for i, row in enumerate(values):
            a = Signal(grid, row)
            if self.method == "scheme":
                out[i] = predict_scheme(a, self.gamma, floor=self.floor).values
            else:
                if abs(row[0]) < MIN_INITIAL_VALUE:
                    raise SignalStartsAtZero(f"|a(0)| = {abs(row[0]):.3e} < {MIN_INITIAL_VALUE}")
                out[i] = predict_integral(a, a.scaled(1.0 / row[0]), self.gamma).values
        return out
