"""Random-matrix (H, A) pairs whose autocorrelation follows a target relaxation function.

The Hamiltonian is diagonal with i.i.d. uniform levels; the observable is built
in that energy basis as ``a_jl = f(E_j - E_l) * R_jl`` with symmetric standard
normal ``R``. The envelope ``f`` is chosen so that ``Tr{A(t) A}`` reproduces the
requested reference function ``g(t)`` in the large-N mean.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_scalar
from .errors import DegenerateObservable, DimensionMismatch, NegativeSpectralDensity

__all__ = [
    "ReferenceKind",
    "ReferenceFunction",
    "Spectrum",
    "EthEnsembleConfig",
    "EthObservable",
    "sample_spectrum",
    "spectral_density_of_g",
    "spectral_filter",
    "build_observable",
    "select_initial_levels",
    "two_level_benchmark",
    "EthEnsemble",
    "PROBE_TARGETS",
]

PROBE_TARGETS = (0.25, 0.5, 0.75, 0.9)

_CLAMP_RTOL = 1e-12
_NEGATIVE_RTOL = 1e-9
_PAIR_DENSITY_FLOOR = 1e-6


class ReferenceKind(str, enum.Enum):
    EXPONENTIAL = "exponential"
    OSCILLATION = "oscillation"
    LINEAR = "linear"
    RECURRENCE = "recurrence"


@dataclass(frozen=True)
class ReferenceFunction:
    """One of the four target relaxation functions ``g(t)``.

    ``tau`` sets the timescale of every kind; ``v`` is the squared width of the
    Gaussian peaks of the recurrence kind and ignored otherwise.
    """

    kind: ReferenceKind
    tau: float = 10.0
    v: float = 0.016

    def __post_init__(self):
        object.__setattr__(self, "kind", ReferenceKind(self.kind))
        check_scalar(self.tau, "tau", min_val=0.0, include_min=False)
        check_scalar(self.v, "v", min_val=0.0, include_min=False)

    @classmethod
    def all_kinds(cls, tau=10.0, v=0.016):
        return [cls(kind, tau, v) for kind in ReferenceKind]

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        tau = self.tau
        if self.kind is ReferenceKind.EXPONENTIAL:
            return np.exp(-math.log(2.0) / tau * t)
        if self.kind is ReferenceKind.OSCILLATION:
            return np.cos(2.0 * math.pi / tau * t) * np.exp(-t / (2.0 * tau))
        if self.kind is ReferenceKind.LINEAR:
            return np.where(t <= 2.0 * tau, 1.0 - t / (2.0 * tau), 0.0)
        v = self.v
        return np.exp(-t**2 / v) + 0.5 * np.exp(-((t - tau) ** 2) / v) + 0.5 * np.exp(-((t + tau) ** 2) / v)

    def fourier(self, omega):
        """Closed-form ``ĝ(ω) = ∫ g(t) exp(-iωt) dt`` (real and even)."""
        w = np.asarray(omega, dtype=float)
        tau = self.tau
        if self.kind is ReferenceKind.EXPONENTIAL:
            lam = math.log(2.0) / tau
            return 2.0 * lam / (lam**2 + w**2)
        if self.kind is ReferenceKind.OSCILLATION:
            mu = 1.0 / (2.0 * tau)
            w0 = 2.0 * math.pi / tau
            return mu / (mu**2 + (w - w0) ** 2) + mu / (mu**2 + (w + w0) ** 2)
        if self.kind is ReferenceKind.LINEAR:
            # triangle of half-width 2*tau; np.sinc(x) = sin(pi x) / (pi x)
            return 2.0 * tau * np.sinc(w * tau / math.pi) ** 2
        v = self.v
        return math.sqrt(math.pi * v) * np.exp(-v * w**2 / 4.0) * (1.0 + np.cos(w * tau))


@dataclass(frozen=True)
class Spectrum:
    """Sorted energy levels of the Hamiltonian, all inside ``[-half_width, half_width]``."""

    energies: np.ndarray = field(repr=False)
    half_width: float

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        if e.ndim != 1 or e.shape[0] < 2:
            raise ValueError("a spectrum needs at least two levels")
        if np.any(np.diff(e) < 0):
            raise ValueError("energies must be sorted ascending")
        check_scalar(self.half_width, "half_width", min_val=0.0, include_min=False)
        if np.any(np.abs(e) > self.half_width):
            raise ValueError("energies must lie inside [-half_width, half_width]")
        e.setflags(write=False)
        object.__setattr__(self, "energies", e)

    @property
    def dimension(self):
        return self.energies.shape[0]

    def gaps(self):
        """Matrix of level differences ``E_j - E_l``."""
        return self.energies[:, None] - self.energies[None, :]

    def pair_density(self, omega):
        """Density of level pairs at gap ``omega`` for uniform levels (triangular, unit mass)."""
        width = 2.0 * self.half_width
        w = np.abs(np.asarray(omega, dtype=float))
        return np.clip(width - w, 0.0, None) / width**2


@dataclass(frozen=True)
class EthEnsembleConfig:
    dimension: int = 2000
    half_width: float = 30.0
    reference: ReferenceFunction = field(default_factory=lambda: ReferenceFunction(ReferenceKind.EXPONENTIAL))
    seed: int = 0
    spectral_cutoff: float = 1.5
    include_diagonal: bool = False

    def __post_init__(self):
        if isinstance(self.dimension, bool) or int(self.dimension) != self.dimension or self.dimension < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.dimension}")
        object.__setattr__(self, "dimension", int(self.dimension))
        check_scalar(self.half_width, "half_width", min_val=0.0, include_min=False)
        check_scalar(self.spectral_cutoff, "spectral_cutoff", min_val=0.0, max_val=2.0, include_min=False)
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))
        if not isinstance(self.reference, ReferenceFunction):
            raise TypeError("reference must be a ReferenceFunction")

    def with_(self, **changes):
        return replace(self, **changes)

    def _streams(self):
        spectrum_seq, matrix_seq = np.random.SeedSequence(self.seed).spawn(2)
        return np.random.default_rng(spectrum_seq), np.random.default_rng(matrix_seq)


@dataclass(frozen=True, eq=False)
class EthObservable:
    """Observable ``A`` in the energy basis with its eigendecomposition.

    ``eigenbasis[:, j]`` is the eigenvector of ``eigenvalues[j]``; eigenvalues
    are sorted ascending and normalized to spectral radius one. ``scale`` is the
    factor the raw construction was divided by.
    """

    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenbasis: np.ndarray = field(repr=False)
    scale: float = 1.0

    def __post_init__(self):
        for name in ("matrix", "eigenvalues", "eigenbasis"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.eigenvalues.shape[0]
        if self.matrix.shape != (n, n) or self.eigenbasis.shape != (n, n):
            raise DimensionMismatch("matrix, eigenvalues and eigenbasis sizes disagree")

    @classmethod
    def from_matrix(cls, matrix, normalize=False):
        """Diagonalize a real symmetric matrix given in the energy basis."""
        a = np.asarray(matrix, dtype=float)
        if not np.array_equal(a, a.T):
            a = 0.5 * (a + a.T)
        w, vecs = np.linalg.eigh(a)
        scale = 1.0
        if normalize:
            scale = float(np.max(np.abs(w)))
            a = a / scale
            w = w / scale
        vecs = _fix_signs(vecs)
        gaps = np.diff(w)
        if gaps.size and np.min(gaps) < 1e-12:
            raise DegenerateObservable(f"observable has near-degenerate eigenvalues (min gap {np.min(gaps):.3e})")
        return cls(a, w, vecs, scale)

    @property
    def dimension(self):
        return self.eigenvalues.shape[0]

    def in_energy_basis(self, weights):
        """``B diag(weights) B^T``: a matrix diagonal in the A-basis, expressed in the energy basis."""
        b = self.eigenbasis
        return (b * np.asarray(weights, dtype=float)) @ b.T

    def hamiltonian_in_eigenbasis(self, spectrum):
        """``B^T diag(E) B``: the Hamiltonian expressed in the eigenbasis of ``A``."""
        b = self.eigenbasis
        h = b.T @ (spectrum.energies[:, None] * b)
        return 0.5 * (h + h.T)


def _fix_signs(vecs):
    # make each column's largest-magnitude entry positive so stored bases are reproducible
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def sample_spectrum(config: EthEnsembleConfig) -> Spectrum:
    rng, _ = config._streams()
    energies = np.sort(rng.uniform(-config.half_width, config.half_width, config.dimension))
    return Spectrum(energies, config.half_width)


def spectral_density_of_g(reference: ReferenceFunction, omega):
    """Nonnegative Fourier transform of the reference function.

    Raises
    ------
    NegativeSpectralDensity
        If the transform dips below ``-1e-9 * ĝ(0)`` at any requested frequency.
    """
    ghat = np.asarray(reference.fourier(omega), dtype=float)
    g0 = float(reference.fourier(0.0))
    if np.any(ghat < -_NEGATIVE_RTOL * g0):
        raise NegativeSpectralDensity(f"{reference.kind.value}: Fourier transform is negative (min {ghat.min():.3e})")
    ghat = np.where(ghat < _CLAMP_RTOL * g0, 0.0, ghat)
    return ghat if ghat.ndim else float(ghat)


def spectral_filter(reference: ReferenceFunction, spectrum: Spectrum, omega, spectral_cutoff=1.5):
    """Envelope ``f(ω) = sqrt(ĝ(ω) / ν(ω))`` with ``ν`` the pair-gap density.

    Zero beyond ``spectral_cutoff * half_width`` and wherever ``ν`` drops below
    1e-6 of its peak.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(np.abs(w) > 2.0 * spectrum.half_width * (1 + 1e-12)):
        raise ValueError("|omega| must not exceed twice the spectral half-width")
    ghat = spectral_density_of_g(reference, w)
    nu = spectrum.pair_density(w)
    peak = spectrum.pair_density(0.0)
    keep = (np.abs(w) <= spectral_cutoff * spectrum.half_width) & (nu >= _PAIR_DENSITY_FLOOR * peak)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(keep, np.sqrt(np.where(keep, ghat / nu, 0.0)), 0.0)
    return f if f.ndim else float(f)


def build_observable(spectrum: Spectrum, config: EthEnsembleConfig) -> EthObservable:
    """Draw ``a_jl = f(E_j - E_l) R_jl`` and normalize to spectral radius one."""
    if spectrum.dimension != config.dimension:
        raise DimensionMismatch(f"spectrum has {spectrum.dimension} levels, config expects {config.dimension}")
    _, rng = config._streams()
    n = config.dimension
    envelope = spectral_filter(config.reference, spectrum, spectrum.gaps(), config.spectral_cutoff)
    r = np.triu(rng.standard_normal((n, n)))
    r = r + np.triu(r, 1).T
    if not config.include_diagonal:
        # the N diagonal draws carry a weight ~ (level spacing) * ĝ(0) that the
        # continuum pair density does not have; it shows up as a constant offset in C(t)
        np.fill_diagonal(r, 0.0)
    return EthObservable.from_matrix(envelope * r, normalize=True)


def select_initial_levels(observable: EthObservable, targets):
    """Index of the eigenvalue closest to each target (ties go to the smaller index)."""
    a = observable.eigenvalues
    out = []
    for target in np.atleast_1d(np.asarray(targets, dtype=float)):
        if not -1.0 <= target <= 1.0:
            raise ValueError(f"probe target {target} outside [-1, 1]")
        out.append(int(np.argmin(np.abs(a - target))))
    return out


def two_level_benchmark():
    """``H = σ_x``, ``A = σ_z`` expressed in the eigenbasis of ``H``.

    Returns ``(spectrum, observable)``; the A-eigenbasis is ordered as
    ``(|↓⟩, |↑⟩)`` so that ``eigenvalues == [-1, 1]``.
    """
    spectrum = Spectrum(np.array([-1.0, 1.0]), half_width=1.0)
    # H eigenvectors (|↑⟩ - |↓⟩)/√2 and (|↑⟩ + |↓⟩)/√2 turn σ_z into σ_x
    observable = EthObservable.from_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    return spectrum, observable


class EthEnsemble(BaseEstimator):
    """Estimator-style wrapper: ``fit()`` draws the spectrum and the observable.

    Parameters mirror :class:`EthEnsembleConfig`; the reference function is
    given by ``reference`` (a kind name), ``tau`` and ``v``.

    Attributes
    ----------
    spectrum_ : Spectrum
    observable_ : EthObservable
    config_ : EthEnsembleConfig
    """

    def __init__(self, dimension=2000, reference="exponential", tau=10.0, v=0.016, half_width=30.0,
                 spectral_cutoff=1.5, seed=0, include_diagonal=False):
        self.dimension = dimension
        self.reference = reference
        self.tau = tau
        self.v = v
        self.half_width = half_width
        self.spectral_cutoff = spectral_cutoff
        self.seed = seed
        self.include_diagonal = include_diagonal

    def fit(self, X=None, y=None):
        self.config_ = EthEnsembleConfig(
            dimension=self.dimension,
            half_width=self.half_width,
            reference=ReferenceFunction(self.reference, self.tau, self.v),
            seed=self.seed,
            spectral_cutoff=self.spectral_cutoff,
            include_diagonal=self.include_diagonal,
        )
        self.spectrum_ = sample_spectrum(self.config_)
        self.observable_ = build_observable(self.spectrum_, self.config_)
        return self

    def probe_levels(self, targets=PROBE_TARGETS):
        return select_initial_levels(self.observable_, targets)
