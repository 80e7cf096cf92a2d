"""Spatial correlation matrices for a uniform linear array.

Three constructors (exponential, complex-phase exponential, one-ring), an
eigen-based factorization for correlated channel synthesis, and the
average-correlation diversity summary used by the closed-form SNR.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import toeplitz

from .errors import (
    CorrDivError,
    DimensionMismatchError,
    IndefiniteMatrixError,
    InvalidParameterError,
    QuadratureNonconvergenceError,
)

# eigenvalues in [PSD_FLOOR, 0) are rounding noise and get clamped; anything
# below is treated as a construction bug
PSD_FLOOR = -1e-10

_QUAD_START_ORDER = 32
_QUAD_MAX_ORDER = 4096
_QUAD_TOL = 1e-10


@dataclass(frozen=True)
class CorrelationMatrix:
    """M x M Hermitian unit-diagonal correlation matrix."""

    entries: np.ndarray

    def __post_init__(self):
        e = self.entries
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] < 1:
            raise InvalidParameterError(f"correlation matrix must be square, got shape {e.shape}")
        if not np.array_equal(e, e.conj().T):
            raise InvalidParameterError("correlation matrix must be exactly Hermitian")
        if not np.all(e.diagonal() == 1):
            raise InvalidParameterError("correlation matrix must have a unit diagonal")
        if np.any(np.abs(e) > 1 + 1e-9):
            raise InvalidParameterError("correlation coefficients cannot exceed unit magnitude")
        e.setflags(write=False)

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    def smallest_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])

    def validate(self):
        """Full invariant check including the eigenvalue floor."""
        lam_min = self.smallest_eigenvalue()
        if lam_min < PSD_FLOOR:
            raise IndefiniteMatrixError(
                f"smallest eigenvalue {lam_min:.3e} is below the {PSD_FLOOR} floor"
            )


@dataclass(frozen=True)
class CorrelationFactor:
    """Factor B with B @ B^H reproducing the source correlation matrix."""

    factor: np.ndarray

    @property
    def order(self) -> int:
        return self.factor.shape[0]


@dataclass(frozen=True)
class CorrelationModelSpec:
    """Resolved per-scenario correlation-model parameters.

    ``angular_spread_deg`` may be the string tag ``"measured"`` (draw per
    terminal from the measured distribution) and ``mean_doa_deg`` the tag
    ``"uniform"`` (draw per terminal from U[-180, 180]).
    """

    variant: str
    xi: float = 0.0
    phase_range_deg: tuple = (0.0, 0.0)
    angular_spread_deg: float | str = 14.02
    mean_doa_deg: float | str = "uniform"
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if self.variant not in ("exponential", "clerckx", "one_ring"):
            raise InvalidParameterError(f"unknown correlation model variant {self.variant!r}")
        if self.variant in ("exponential", "clerckx") and not 0 <= self.xi <= 1:
            raise InvalidParameterError(f"xi must be in [0, 1], got {self.xi}")
        lo, hi = self.phase_range_deg
        if lo > hi:
            raise InvalidParameterError(f"phase range must be ordered, got ({lo}, {hi})")
        if self.variant == "one_ring":
            s = self.angular_spread_deg
            if isinstance(s, str):
                if s != "measured":
                    raise InvalidParameterError(f"unknown angular spread tag {s!r}")
            elif not 0 < s <= 180:
                raise InvalidParameterError(f"angular spread must be in (0, 180] deg, got {s}")
            d = self.mean_doa_deg
            if isinstance(d, str) and d != "uniform":
                raise InvalidParameterError(f"unknown mean DOA tag {d!r}")
            if self.spacing_wavelengths <= 0:
                raise InvalidParameterError("element spacing must be positive")


def _check_order_xi(m, xi):
    if m < 1:
        raise InvalidParameterError(f"matrix order must be >= 1, got {m}")
    if not 0 <= xi <= 1:
        raise InvalidParameterError(f"xi must be in [0, 1], got {xi}")


def build_exponential(m: int, xi: float) -> CorrelationMatrix:
    """Real symmetric Toeplitz profile with entry(i, j) = xi^|i-j|."""
    _check_order_xi(m, xi)
    col = xi ** np.arange(m, dtype=np.float64)
    return CorrelationMatrix(toeplitz(col))


def build_clerckx(m: int, xi: float, delta_phase_deg: float) -> CorrelationMatrix:
    """Exponential magnitude profile with a terminal-specific phase.

    entry(i, j) = (xi * e^{j delta})^(j-i) for j >= i, conjugate mirror below,
    so the magnitudes match :func:`build_exponential` exactly and the matrix
    stays Hermitian for any phase.
    """
    _check_order_xi(m, xi)
    base = xi * np.exp(1j * np.deg2rad(delta_phase_deg))
    row = base ** np.arange(m)
    row[0] = 1.0
    return CorrelationMatrix(toeplitz(row.conj(), row))


@lru_cache(maxsize=None)
def _gl_nodes(order):
    return leggauss(order)


def _one_ring_lags(m, spread_rad, mean_rad, spacing, order):
    x, w = _gl_nodes(order)
    phi = mean_rad + spread_rad * x
    lags = np.arange(m, dtype=np.float64)
    # (1/(2*spread)) * integral over [mean - spread, mean + spread] collapses
    # to 0.5 * sum(w * f) under the affine map to [-1, 1]
    kernel = np.exp(-2j * np.pi * spacing * np.outer(lags, np.sin(phi)))
    return 0.5 * (kernel @ w)


def build_one_ring(
    m: int,
    angular_spread_deg: float,
    mean_doa_deg: float,
    spacing_wavelengths: float = 0.5,
) -> CorrelationMatrix:
    """Correlation from a uniform angle window around a mean direction.

    entry(i, j) averages the array phase response e^{-j 2 pi d (i-j) sin(phi)}
    over phi uniform on [mean - spread, mean + spread]. Entries are evaluated
    per lag by Gauss-Legendre quadrature whose order is doubled until the
    result stabilizes to 1e-10, then mirrored into a Hermitian Toeplitz matrix.
    """
    if m < 1:
        raise InvalidParameterError(f"matrix order must be >= 1, got {m}")
    if not 0 < angular_spread_deg <= 180:
        raise InvalidParameterError(
            f"angular spread must be in (0, 180] deg, got {angular_spread_deg}"
        )
    if spacing_wavelengths <= 0:
        raise InvalidParameterError("element spacing must be positive")

    spread = np.deg2rad(angular_spread_deg)
    mean = np.deg2rad(mean_doa_deg)
    order = _QUAD_START_ORDER
    vals = _one_ring_lags(m, spread, mean, spacing_wavelengths, order)
    while True:
        if 2 * order > _QUAD_MAX_ORDER:
            raise QuadratureNonconvergenceError(
                f"one-ring quadrature did not stabilize by order {_QUAD_MAX_ORDER} "
                f"(spread {angular_spread_deg} deg, spacing {spacing_wavelengths})"
            )
        order *= 2
        refined = _one_ring_lags(m, spread, mean, spacing_wavelengths, order)
        if np.max(np.abs(refined - vals)) <= _QUAD_TOL:
            vals = refined
            break
        vals = refined

    vals[0] = 1.0  # integrand is identically 1 at zero lag
    return CorrelationMatrix(toeplitz(vals, vals.conj()))


def factor(r: CorrelationMatrix) -> CorrelationFactor:
    """Eigen-factorization B with B @ B^H = R, tolerating rank deficiency.

    Eigenvalues in [-1e-10, 0) are clamped to zero; anything lower raises
    ``IndefiniteMatrixError``.
    """
    lam, vec = np.linalg.eigh(r.entries)
    if lam[0] < PSD_FLOOR:
        raise IndefiniteMatrixError(
            f"correlation matrix is indefinite (smallest eigenvalue {lam[0]:.3e})"
        )
    b = vec.astype(np.complex128) * np.sqrt(np.clip(lam, 0.0, None))
    recon_err = np.max(np.abs(b @ b.conj().T - r.entries))
    if recon_err > 1e-8:
        raise CorrDivError(f"factor reconstruction error {recon_err:.3e} exceeds 1e-8")
    return CorrelationFactor(b)


def average_correlation(rs) -> tuple:
    """Entrywise mean of the terminal correlation matrices and Tr[Rbar^2].

    Returns ``(rbar, trace_sq)``. The trace is computed both as the direct
    product trace and through the Hermitian identity
    ``M + 2 * sum_{i<j} |rbar_ij|^2``; the two routes must agree to 1e-9
    relative error or the call fails.
    """
    if not rs:
        raise DimensionMismatchError("need at least one correlation matrix")
    m = rs[0].order
    if any(r.order != m for r in rs):
        raise DimensionMismatchError("correlation matrices differ in order")

    rbar = np.mean([r.entries for r in rs], axis=0)
    upper = rbar[np.triu_indices(m, k=1)]
    trace_sq = m + 2.0 * float(np.sum(np.abs(upper) ** 2))
    direct = float(np.trace(rbar @ rbar).real)
    if abs(direct - trace_sq) > 1e-9 * max(abs(trace_sq), 1.0):
        raise CorrDivError(
            f"Tr[Rbar^2] routes disagree: product {direct!r} vs identity {trace_sq!r}"
        )
    return rbar, trace_sq
