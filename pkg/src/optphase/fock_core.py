"""Pure states in the photon-number basis and their canonical phase statistics.

States are kept real and nonnegative: for phase encoding any relative phase
between neighbouring amplitudes only lowers ``mu``, so a common phase step
can be removed without loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc, gammaln

from optphase.errors import DegenerateFilterError, InvalidArgumentError

NORM_TOL = 1e-9
CLIP_TOL = 1e-10
DEFAULT_TAIL_TOL = 1e-12
MIN_SUCCESS_PROB = 1e-30


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FockVector:
    """Normalized real amplitudes ``c_0..c_M`` of a truncated pure state."""

    coeffs: np.ndarray
    tail_mass_bound: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise InvalidArgumentError("coefficients must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(c)):
            raise InvalidArgumentError("coefficients must be finite")
        if np.any(c < 0):
            raise InvalidArgumentError("coefficients must be real and nonnegative")
        norm = float(np.sum(c * c))
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidArgumentError(f"state not normalized: sum c_n^2 = {norm!r}")
        if self.tail_mass_bound < 0:
            raise InvalidArgumentError("tail_mass_bound must be >= 0")
        object.__setattr__(self, "coeffs", _frozen(c))

    @classmethod
    def from_amplitudes(cls, amps, tail_mass_bound: float = 0.0) -> "FockVector":
        """Normalize ``amps`` and wrap them."""
        a = np.asarray(amps, dtype=float)
        norm = math.sqrt(float(np.sum(a * a)))
        if norm == 0.0:
            raise InvalidArgumentError("cannot normalize the zero vector")
        return cls(a / norm, tail_mass_bound)

    @property
    def trunc_dim(self) -> int:
        return int(self.coeffs.size)

    @property
    def populations(self) -> np.ndarray:
        return self.coeffs * self.coeffs

    def __len__(self):
        return self.trunc_dim

    def __eq__(self, other):
        if not isinstance(other, FockVector):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs) and self.tail_mass_bound == other.tail_mass_bound

    def __hash__(self):
        return hash((self.coeffs.tobytes(), self.tail_mass_bound))


@dataclass(frozen=True)
class PhaseStats:
    mu: float
    variance: float  # math.inf when mu == 0

    @classmethod
    def from_mu(cls, mu: float) -> "PhaseStats":
        return cls(mu, 1.0 / mu**2 - 1.0 if mu > 0 else math.inf)


@dataclass(frozen=True, eq=False)
class Filter:
    """Fock-diagonal transmissions ``f_0..f_{N-1}``; ``f_n = 1`` for ``n >= N``."""

    f: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float).reshape(-1)
        if np.any(f < -CLIP_TOL) or np.any(f > 1.0 + CLIP_TOL):
            raise InvalidArgumentError("filter transmissions must lie in [0, 1]")
        object.__setattr__(self, "f", _frozen(np.clip(f, 0.0, 1.0)))

    @classmethod
    def identity(cls, threshold: int = 0) -> "Filter":
        return cls(np.ones(threshold))

    @property
    def threshold(self) -> int:
        return int(self.f.size)

    def padded(self, dim: int) -> np.ndarray:
        """Transmissions for levels ``0..dim-1``."""
        if dim <= self.f.size:
            return np.array(self.f[:dim])
        return np.concatenate([self.f, np.ones(dim - self.f.size)])

    def __eq__(self, other):
        if not isinstance(other, Filter):
            return NotImplemented
        return np.array_equal(self.f, other.f)

    def __hash__(self):
        return hash(self.f.tobytes())


def coherent_state(alpha: float, tail_tol: float = DEFAULT_TAIL_TOL, dim: int | None = None) -> FockVector:
    """Coherent state ``|alpha>`` with real ``alpha >= 0``, truncated and renormalized.

    Without ``dim`` the smallest support whose discarded Poisson mass is below
    ``tail_tol`` is kept. With ``dim`` the first ``dim`` levels are kept and the
    discarded mass is recorded in ``tail_mass_bound``.
    """
    if not alpha >= 0 or not math.isfinite(alpha):
        raise InvalidArgumentError(f"alpha must be real and >= 0, got {alpha!r}")
    mean = alpha * alpha
    if dim is None:
        if not 0 < tail_tol < 1:
            raise InvalidArgumentError("tail_tol must lie in (0, 1)")
        dim = 1
        # P(n >= dim) for Poisson(mean) is the regularized lower gamma P(dim, mean)
        while gammainc(dim, mean) >= tail_tol:
            dim += 1
    elif dim < 1:
        raise InvalidArgumentError("dim must be >= 1")
    n = np.arange(dim)
    if alpha == 0:
        amps = (n == 0).astype(float)
    else:
        amps = np.exp(-0.5 * mean + n * math.log(alpha) - 0.5 * gammaln(n + 1))
    tail = float(gammainc(dim, mean)) if alpha > 0 else 0.0
    return FockVector.from_amplitudes(amps, tail_mass_bound=tail)


def compute_mu(state: FockVector) -> float:
    """``|<exp(i theta)>|`` of the canonical phase distribution."""
    c = state.coeffs
    return float(np.dot(c[:-1], c[1:]))


def phase_stats(state: FockVector) -> PhaseStats:
    return PhaseStats.from_mu(compute_mu(state))


def canonical_distribution(state: FockVector, theta):
    """Canonical phase density ``|sum_n c_n exp(i n theta)|^2 / 2 pi``."""
    theta = np.asarray(theta, dtype=float)
    n = np.arange(state.trunc_dim)
    amp = np.exp(1j * np.multiply.outer(theta, n)) @ state.coeffs
    return (np.abs(amp) ** 2 / (2 * math.pi))[()]


def apply_filter(state: FockVector, filt: Filter) -> tuple[FockVector, float]:
    """Heralded output of the filter and its success probability."""
    f = filt.padded(state.trunc_dim)
    x = state.populations
    prob = float(np.sum(f * f * x))
    if prob < MIN_SUCCESS_PROB:
        raise DegenerateFilterError(f"success probability {prob:.3e} is degenerate")
    if np.all(f == 1.0):
        return state, prob
    out = f * state.coeffs / math.sqrt(prob)
    return FockVector(out / math.sqrt(float(np.sum(out * out))), state.tail_mass_bound), prob
