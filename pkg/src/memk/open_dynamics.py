"""Brute-force propagation of the dephasing master equation for dense density matrices.

Everything here works in the eigenbasis of the observable ``A``, where the
jump operators ``L_j = |j⟩⟨j|`` are the coordinate projectors and the
dissipator reduces to damping of the off-diagonal entries.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np

from ._validation import check_same_dimension, check_scalar, check_square
from .errors import DimensionMismatch, DimensionTooLarge, PositivityLost
from .grid import DiagonalState, Signal, TimeGrid
from .spectral_model import EthObservable, Spectrum

__all__ = [
    "Stepper",
    "LindbladConfig",
    "Hygiene",
    "LindbladRun",
    "density_matrix_defects",
    "lindblad_rhs",
    "propagate_lindblad",
    "step_discrete_map",
    "one_step_propagator",
    "oracle_decohered",
    "ORACLE_MAX_DIMENSION",
]

ORACLE_MAX_DIMENSION = 1024
RK4_STEP_BOUND = 0.1
DISCRETE_STEP_BOUND = 0.1
POSITIVITY_FLOOR = -1e-6


class Stepper(str, enum.Enum):
    RK4 = "rk4"
    DISCRETE_MAP = "discrete"


@dataclass(frozen=True)
class LindbladConfig:
    """Dephasing rate, output grid and integration scheme.

    ``substeps`` internal steps are taken per grid interval; ``None`` picks the
    smallest count with ``h * (‖H‖ + γ) <= step_bound`` for RK4 (one substep
    for the discrete map).
    """

    gamma: float
    grid: TimeGrid
    stepper: Stepper = Stepper.RK4
    substeps: int | None = None
    step_bound: float = RK4_STEP_BOUND
    check_every: int = 100

    def __post_init__(self):
        check_scalar(self.gamma, "gamma", min_val=0.0)
        check_scalar(self.step_bound, "step_bound", min_val=0.0, max_val=RK4_STEP_BOUND, include_min=False)
        object.__setattr__(self, "stepper", Stepper(self.stepper))
        if self.stepper is Stepper.DISCRETE_MAP:
            h = self.grid.dt / (self.substeps or 1)
            if self.gamma * h > DISCRETE_STEP_BOUND:
                raise ValueError(f"discrete map needs gamma*T <= {DISCRETE_STEP_BOUND}, got {self.gamma * h}")

    def resolve_substeps(self, spectral_radius):
        if self.substeps is not None:
            return int(self.substeps)
        if self.stepper is Stepper.DISCRETE_MAP:
            return 1
        return max(1, math.ceil(self.grid.dt * (spectral_radius + self.gamma) / self.step_bound - 1e-12))


@dataclass(frozen=True)
class Hygiene:
    """Worst invariant defects seen along a trajectory."""

    trace_drift: float = 0.0
    hermiticity_defect: float = 0.0
    min_eigenvalue: float = math.inf

    def merge(self, other):
        return Hygiene(max(self.trace_drift, other.trace_drift),
                       max(self.hermiticity_defect, other.hermiticity_defect),
                       min(self.min_eigenvalue, other.min_eigenvalue))

    def as_dict(self):
        return {"trace_drift": self.trace_drift, "hermiticity_defect": self.hermiticity_defect,
                "min_eigenvalue": self.min_eigenvalue}


def density_matrix_defects(rho, check_positivity=True):
    rho = np.asarray(rho)
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    drift = float(abs(np.trace(rho) - 1.0))
    min_eig = math.inf
    if check_positivity:
        min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    return Hygiene(drift, herm, min_eig)


def lindblad_rhs(rho, hamiltonian, gamma):
    """Right-hand side of the dephasing master equation in the observable's eigenbasis.

    With ``L_j = |j⟩⟨j|`` we have ``Σ_j L_j ρ L_j† = P̂ρ`` (keep only the
    diagonal) and ``Σ_j L_j† L_j = 1``, so the dissipator
    ``(γ/2) Σ_j (2 L_j ρ L_j† - L_j† L_j ρ - ρ L_j† L_j)`` collapses to
    ``γ (P̂ρ - ρ)``.
    """
    rho = check_square(rho, "rho")
    hamiltonian = check_square(hamiltonian, "hamiltonian")
    if rho.shape != hamiltonian.shape:
        raise DimensionMismatch(f"rho {rho.shape} and hamiltonian {hamiltonian.shape} differ")
    hr = hamiltonian @ rho
    out = -1j * (hr - rho @ hamiltonian)
    out += gamma * (np.diag(np.diag(rho)) - rho)
    return out


@numba.njit(cache=True)
def _split_derivative(prod, z, gamma, out):
    # z = [X | Y] with rho = X + iY, X symmetric, Y antisymmetric, prod = H @ z, H real symmetric.
    # [H, rho] = (HX - (HX)^T) + i (HY + (HY)^T), so dX = HY + (HY)^T and dY = (HX)^T - HX;
    # the dissipator damps every off-diagonal entry at rate gamma (Y has no diagonal).
    n = z.shape[0]
    for i in range(n):
        for j in range(n):
            out[i, j] = prod[i, n + j] + prod[j, n + i] - gamma * z[i, j]
            out[i, n + j] = prod[j, i] - prod[i, j] - gamma * z[i, n + j]
        out[i, i] += gamma * z[i, i]


@numba.njit(cache=True)
def _axpy(z, alpha, k, out):
    for i in range(z.shape[0]):
        for j in range(z.shape[1]):
            out[i, j] = z[i, j] + alpha * k[i, j]


@numba.njit(cache=True)
def _rk4_combine(z, dt, k1, k2, k3, k4, out):
    c = dt / 6.0
    for i in range(z.shape[0]):
        for j in range(z.shape[1]):
            out[i, j] = z[i, j] + c * (k1[i, j] + 2.0 * (k2[i, j] + k3[i, j]) + k4[i, j])


class _SplitRK4:
    """Classic RK4 on the stacked real representation ``[Re ρ | Im ρ]``."""

    def __init__(self, hamiltonian, gamma):
        self.h = np.ascontiguousarray(hamiltonian, dtype=float)
        self.gamma = float(gamma)
        n = self.h.shape[0]
        self._prod = np.empty((n, 2 * n))
        self._stage = np.empty((n, 2 * n))
        self._k = [np.empty((n, 2 * n)) for _ in range(4)]

    def _deriv(self, z, out):
        np.matmul(self.h, z, out=self._prod)
        _split_derivative(self._prod, z, self.gamma, out)

    def step(self, z, dt, out):
        k1, k2, k3, k4 = self._k
        tmp = self._stage
        self._deriv(z, k1)
        _axpy(z, 0.5 * dt, k1, tmp)
        self._deriv(tmp, k2)
        _axpy(z, 0.5 * dt, k2, tmp)
        self._deriv(tmp, k3)
        _axpy(z, dt, k3, tmp)
        self._deriv(tmp, k4)
        _rk4_combine(z, dt, k1, k2, k3, k4, out)
        return out

    @staticmethod
    def pack(rho):
        herm = 0.5 * (rho + rho.conj().T)
        return np.ascontiguousarray(np.hstack((herm.real, herm.imag)))

    @staticmethod
    def unpack(z):
        n = z.shape[0]
        return z[:, :n] + 1j * z[:, n:]


def _rk4_complex(rho, h, gamma, dt):
    k1 = lindblad_rhs(rho, h, gamma)
    k2 = lindblad_rhs(rho + 0.5 * dt * k1, h, gamma)
    k3 = lindblad_rhs(rho + 0.5 * dt * k2, h, gamma)
    k4 = lindblad_rhs(rho + dt * k3, h, gamma)
    return rho + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def one_step_propagator(hamiltonian, step):
    """``exp(-i H T)`` for a Hermitian ``H``."""
    w, v = np.linalg.eigh(hamiltonian)
    return (v * np.exp(-1j * w * step)) @ v.conj().T


def step_discrete_map(rho, propagator, gamma, step):
    """``(1 - γT) UρU† + γT P̂(UρU†)``."""
    if not gamma * step < 1.0:
        raise ValueError(f"discrete map needs gamma*T < 1, got {gamma * step}")
    sigma = propagator @ rho @ propagator.conj().T
    out = (1.0 - gamma * step) * sigma
    out[np.diag_indices_from(out)] += gamma * step * np.diag(sigma)
    return out


@dataclass(frozen=True, eq=False)
class LindbladRun:
    """Output of :func:`propagate_lindblad`.

    ``snapshots`` holds one density matrix per grid point (``None`` when not
    kept); ``populations`` the diagonals, which is all an observable diagonal
    in this basis needs.
    """

    grid: TimeGrid
    populations: np.ndarray
    snapshots: list | None
    hygiene: Hygiene
    substeps: int

    def expectation(self, diagonal):
        return Signal(self.grid, self.populations.real @ np.asarray(diagonal, dtype=float))


def propagate_lindblad(rho0, hamiltonian, config: LindbladConfig, keep_snapshots=False) -> LindbladRun:
    """Integrate the master equation from ``rho0`` and sample it on ``config.grid``.

    Invariants (trace, Hermiticity, positivity) are checked every
    ``config.check_every`` internal steps and at the end.

    Raises
    ------
    PositivityLost
        If the smallest eigenvalue of a checked snapshot drops below -1e-6.
    """
    rho0 = np.asarray(check_square(rho0, "rho0"), dtype=complex)
    hamiltonian = check_square(hamiltonian, "hamiltonian")
    if rho0.shape != hamiltonian.shape:
        raise DimensionMismatch(f"rho0 {rho0.shape} and hamiltonian {hamiltonian.shape} differ")
    gamma = float(config.gamma)
    grid = config.grid
    spectral_radius = float(np.max(np.abs(np.linalg.eigvalsh(hamiltonian))))
    substeps = config.resolve_substeps(spectral_radius)
    h_step = grid.dt / substeps

    n = rho0.shape[0]
    populations = np.empty((len(grid), n))
    snapshots = [] if keep_snapshots else None
    hygiene = Hygiene()

    real_h = not np.iscomplexobj(hamiltonian) or not np.any(np.imag(hamiltonian))
    discrete = config.stepper is Stepper.DISCRETE_MAP
    split = real_h and not discrete
    rho = rho0.copy()
    if discrete:
        propagator = one_step_propagator(hamiltonian, h_step)
    elif split:
        stepper = _SplitRK4(np.real(hamiltonian), gamma)
        z = stepper.pack(rho0)
        z_next = np.empty_like(z)

    def current():
        return stepper.unpack(z) if split else rho

    def record(k, state):
        populations[k] = np.diag(state).real
        if keep_snapshots:
            snap = state.copy()
            snap.setflags(write=False)
            snapshots.append(snap)

    def check(state):
        nonlocal hygiene
        defects = density_matrix_defects(state)
        hygiene = hygiene.merge(defects)
        if defects.min_eigenvalue < POSITIVITY_FLOOR:
            raise PositivityLost(f"min eigenvalue {defects.min_eigenvalue:.3e}; reduce the step")

    check(rho0)
    record(0, rho0)
    count = 0
    for k in range(1, len(grid)):
        for _ in range(substeps):
            if discrete:
                rho = step_discrete_map(rho, propagator, gamma, h_step)
            elif split:
                z, z_next = stepper.step(z, h_step, z_next), z
            else:
                rho = _rk4_complex(rho, hamiltonian, gamma, h_step)
            count += 1
            if count % config.check_every == 0:
                check(current())
        if split:
            populations[k] = np.diag(z)
            if keep_snapshots:
                record(k, current())
        else:
            record(k, current())
    check(current())
    return LindbladRun(grid, populations, snapshots, hygiene, substeps)


def oracle_decohered(observable: EthObservable, spectrum: Spectrum, state: DiagonalState, config: LindbladConfig):
    """Decohered expectation value ``ã(t) = Tr{A ρ(t)}`` by direct integration.

    Returns ``(signal, hygiene)``.

    Raises
    ------
    DimensionTooLarge
        Above 1024 levels.
    """
    n = observable.dimension
    if n > ORACLE_MAX_DIMENSION:
        raise DimensionTooLarge(f"oracle limited to N <= {ORACLE_MAX_DIMENSION}, got {n}")
    check_same_dimension(("observable", n), ("spectrum", spectrum.dimension), ("state", state.dimension))
    hamiltonian = observable.hamiltonian_in_eigenbasis(spectrum)
    run = propagate_lindblad(np.diag(state.weights).astype(complex), hamiltonian, config)
    return run.expectation(observable.eigenvalues), run.hygiene
