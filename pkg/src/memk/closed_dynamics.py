"""Exact propagation of the isolated system by per-time-point phase evolution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_same_dimension
from .errors import ProbeTooSmall
from .grid import DiagonalState, Signal, TimeGrid, require_same_grid
from .spectral_model import EthObservable, Spectrum

__all__ = [
    "expectation_closed",
    "expectation_probes",
    "autocorrelation",
    "check_condition2",
    "CollapseReport",
    "PROBE_FLOOR",
]

PROBE_FLOOR = 0.05

# complex phase matrix budget per chunk (N * n_times entries)
_CHUNK_ENTRIES = 2_000_000


def _phase_quadratic_form(weights, energies, times):
    """``Σ_mn W_mn cos((E_m - E_n) t)`` for every ``t``, for real symmetric ``W``.

    Equivalent to ``v(t)^H W v(t)`` with ``v_n = exp(-i E_n t)``; exact at each
    time point, no stepping involved.
    """
    n = energies.shape[0]
    out = np.empty(times.shape[0])
    chunk = max(1, _CHUNK_ENTRIES // n)
    for start in range(0, times.shape[0], chunk):
        t = times[start:start + chunk]
        phase = np.outer(energies, t)
        c = np.cos(phase)
        s = np.sin(phase)
        out[start:start + chunk] = np.einsum("nt,nt->t", c, weights @ c) + np.einsum("nt,nt->t", s, weights @ s)
    return out


def expectation_closed(spectrum: Spectrum, observable: EthObservable, state: DiagonalState, grid: TimeGrid) -> Signal:
    """``a(t) = Σ_j c_j ⟨j|A(t)|j⟩`` for a state diagonal in the A-eigenbasis.

    With ``ρ0`` written in the energy basis, ``a(t) = Σ_mn a_mn ρ0_mn cos(ω_mn t)``.
    For a pure probe ``ψ`` this is ``(e^{-iEt}ψ)^† A (e^{-iEt}ψ)``.
    """
    check_same_dimension(("spectrum", spectrum.dimension), ("observable", observable.dimension),
                         ("state", state.dimension))
    rho0 = observable.in_energy_basis(state.weights)
    values = _phase_quadratic_form(observable.matrix * rho0, spectrum.energies, grid.times)
    # A(0) = A is diagonal in the A-basis; the t = 0 value is known exactly
    values[0] = float(state.weights @ observable.eigenvalues)
    return Signal(grid, values)


def expectation_probes(spectrum, observable, levels, grid):
    """Pure-state signals ``⟨j|A(t)|j⟩`` for each level index."""
    return [expectation_closed(spectrum, observable, DiagonalState.pure(j, observable.dimension), grid)
            for j in levels]


def autocorrelation(spectrum: Spectrum, observable: EthObservable, grid: TimeGrid) -> Signal:
    """Normalized autocorrelation ``Tr{A(t) A} / Tr{A²}``."""
    check_same_dimension(("spectrum", spectrum.dimension), ("observable", observable.dimension))
    sq = observable.matrix**2
    values = _phase_quadratic_form(sq, spectrum.energies, grid.times) / sq.sum()
    values[0] = 1.0
    return Signal(grid, values)


@dataclass(frozen=True)
class CollapseReport:
    """Per-probe ``max_t |a_j(t)/a_j - g(t)|`` and the worst of them."""

    probe_values: tuple
    deviations: tuple

    @property
    def worst(self):
        return max(self.deviations)

    def passes(self, tolerance):
        return self.worst <= tolerance


def check_condition2(signals, g: Signal) -> CollapseReport:
    """Compare each probe signal, rescaled by its eigenvalue, to the relaxation function.

    ``signals`` is a sequence of ``(Signal, a_j)`` pairs.
    """
    values, devs = [], []
    for sig, a_j in signals:
        if abs(a_j) < PROBE_FLOOR:
            raise ProbeTooSmall(f"probe eigenvalue {a_j} below {PROBE_FLOOR}")
        require_same_grid(sig, g)
        values.append(float(a_j))
        devs.append(float(np.max(np.abs(sig.values / a_j - g.values))))
    return CollapseReport(tuple(values), tuple(devs))
