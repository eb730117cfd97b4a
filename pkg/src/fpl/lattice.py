"""Velocity grid, dual Fourier lattice, discrete transforms and quadrature.

The velocity domain is the cube (-L_v, L_v)^3 sampled at the N^3 cell
centers v_n = -L_v + (n + 1/2) dv, dv = 2 L_v / N.  The dual lattice is
xi_k = (pi / L_v) k for k in {-N/2, ..., N/2 - 1} per axis, consistent
with period 2 L_v.

Transforms use the continuous convention

    fhat(xi) = (2 pi)^(-3/2) \\int f(v) exp(-i xi . v) dv

discretized with midpoint weights, so that the Fourier series

    f(v) = (2 pi)^(3/2) / (2 L_v)^3  sum_k fhat(xi_k) exp(i xi_k . v)

inverts it exactly on the grid.  Parseval then reads

    ||f||_2^2 = dual_spacing^3 * sum_k |fhat_k|^2 .
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import NumericalError, UsageError

#: default number of FFT worker threads (overridable via set_fft_workers)
_FFT_WORKERS = 2


def set_fft_workers(n: int) -> None:
    global _FFT_WORKERS
    _FFT_WORKERS = max(1, int(n))


def fft_workers() -> int:
    return _FFT_WORKERS


@dataclass(frozen=True)
class GridSpec:
    """Geometry of the truncated velocity cube and its dual lattice.

    Parameters
    ----------
    n_modes : int
        Modes/cells per axis N; even and >= 8.
    half_length : float
        Velocity half-width L_v > 0.
    """

    n_modes: int
    half_length: float
    dim: int = 3

    def __post_init__(self):
        if self.dim != 3:
            raise UsageError("only dim=3 is supported")
        if self.n_modes < 8 or self.n_modes % 2 != 0:
            raise UsageError(f"n_modes must be even and >= 8, got {self.n_modes}")
        if not (self.half_length > 0):
            raise UsageError(f"half_length must be positive, got {self.half_length}")

    @property
    def dv(self) -> float:
        return 2.0 * self.half_length / self.n_modes

    @property
    def dual_spacing(self) -> float:
        return np.pi / self.half_length

    @property
    def cell_volume(self) -> float:
        return self.dv**3

    @property
    def parseval_constant(self) -> float:
        """c_norm with ||f||_2^2 = c_norm * sum_k |fhat_k|^2."""
        return self.dual_spacing**3

    @cached_property
    def v1d(self) -> np.ndarray:
        n = np.arange(self.n_modes)
        return -self.half_length + (n + 0.5) * self.dv

    @cached_property
    def k1d(self) -> np.ndarray:
        """Mode indices in symmetric storage order, k in {-N/2, ..., N/2-1}."""
        return np.arange(self.n_modes) - self.n_modes // 2

    @cached_property
    def xi1d(self) -> np.ndarray:
        return self.dual_spacing * self.k1d

    @cached_property
    def xi1d_deriv(self) -> np.ndarray:
        """Wavenumbers for odd-order derivatives; Nyquist plane zeroed."""
        xi = self.xi1d.copy()
        xi[0] = 0.0
        return xi

    @cached_property
    def v_mesh(self) -> tuple:
        return np.meshgrid(self.v1d, self.v1d, self.v1d, indexing="ij")

    @cached_property
    def v_sq(self) -> np.ndarray:
        v1, v2, v3 = self.v_mesh
        return v1**2 + v2**2 + v3**2

    @cached_property
    def bracket_sq(self) -> np.ndarray:
        """<v>^2 = 1 + |v|^2 on the grid."""
        return 1.0 + self.v_sq

    def padded(self) -> "GridSpec":
        """Doubled domain with the same cell spacing (2N cells on (-2L, 2L)^3)."""
        return GridSpec(2 * self.n_modes, 2.0 * self.half_length)

    def __eq__(self, other):
        return (
            isinstance(other, GridSpec)
            and self.n_modes == other.n_modes
            and self.half_length == other.half_length
        )

    def __hash__(self):
        return hash((self.n_modes, self.half_length))


def _readonly(a: np.ndarray) -> np.ndarray:
    view = a.view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True)
class VelocityField:
    """Real distribution samples on the grid (row-major N^3)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        n = self.grid.n_modes
        if vals.shape != (n, n, n):
            raise UsageError(f"values shape {vals.shape} != {(n, n, n)}")
        object.__setattr__(self, "values", _readonly(vals))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2) * self.grid.cell_volume))


@dataclass(frozen=True)
class SpectralField:
    """Complex Fourier coefficients indexed by mode k (symmetric storage order)."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        n = self.grid.n_modes
        if c.shape != (n, n, n):
            raise UsageError(f"coeffs shape {c.shape} != {(n, n, n)}")
        object.__setattr__(self, "coeffs", _readonly(c))

    def l2_norm(self) -> float:
        return float(
            np.sqrt(np.sum(np.abs(self.coeffs) ** 2) * self.grid.parseval_constant)
        )


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise NumericalError(f"non-finite {what} at index {tuple(int(i) for i in bad)}")


def _phase(grid: GridSpec, sign: float) -> np.ndarray:
    # exp(sign * i * xi_k * v_0) per axis; v_0 is the first cell center
    p = np.exp(sign * 1j * grid.xi1d * grid.v1d[0])
    return p[:, None, None] * p[None, :, None] * p[None, None, :]


def forward_transform(f: VelocityField) -> SpectralField:
    """Discrete Fourier transform to the dual lattice (symmetric mode order)."""
    _check_finite(f.values, "field value")
    g = f.grid
    raw = sfft.fftn(f.values, workers=_FFT_WORKERS)
    coeffs = (2.0 * np.pi) ** -1.5 * g.cell_volume * _phase(g, -1.0) * np.fft.fftshift(raw)
    return SpectralField(g, coeffs)


def inverse_transform(F: SpectralField) -> VelocityField:
    """Inverse transform; asserts the imaginary residue is negligible."""
    _check_finite(F.coeffs, "coefficient")
    g = F.grid
    shifted = np.fft.ifftshift(F.coeffs * _phase(g, +1.0))
    vals = sfft.ifftn(shifted, workers=_FFT_WORKERS)
    vals *= g.n_modes**3 * (2.0 * np.pi) ** 1.5 / (2.0 * g.half_length) ** 3
    scale = np.abs(vals.real).max()
    resid = np.abs(vals.imag).max()
    if scale > 0 and resid > 1e-10 * scale:
        raise NumericalError(
            f"imaginary residue {resid:.3e} exceeds 1e-10 * max|f| = {1e-10 * scale:.3e}"
        )
    return VelocityField(g, np.ascontiguousarray(vals.real))


def mode_mask(grid: GridSpec, n_keep: int) -> np.ndarray:
    """Boolean mask of retained modes: k_i in {-n_keep/2, ..., n_keep/2 - 1}."""
    if n_keep > grid.n_modes:
        raise UsageError(f"n_keep={n_keep} exceeds n_modes={grid.n_modes}")
    if n_keep < 2 or n_keep % 2 != 0:
        raise UsageError(f"n_keep must be even and >= 2, got {n_keep}")
    k = grid.k1d
    keep1 = (k >= -(n_keep // 2)) & (k <= n_keep // 2 - 1)
    return keep1[:, None, None] & keep1[None, :, None] & keep1[None, None, :]


def project_modes(F: SpectralField, n_keep: int) -> SpectralField:
    """Orthogonal projection onto the lowest n_keep modes per axis."""
    mask = mode_mask(F.grid, n_keep)
    return SpectralField(F.grid, np.where(mask, F.coeffs, 0.0))


def spectral_derivative(F: SpectralField, axis: int, order: int = 1) -> SpectralField:
    """Multiply coefficients by (i xi_axis)^order.

    Odd orders use the Nyquist-zeroed wavenumbers so real fields stay real.
    """
    if axis not in (0, 1, 2):
        raise UsageError(f"axis must be 0, 1 or 2, got {axis}")
    if order < 1:
        raise UsageError(f"order must be >= 1, got {order}")
    g = F.grid
    xi = g.xi1d_deriv if order % 2 == 1 else g.xi1d
    shape = [1, 1, 1]
    shape[axis] = g.n_modes
    mult = (1j * xi.reshape(shape)) ** order
    return SpectralField(g, F.coeffs * mult)


def quadrature(f: VelocityField, weight_exponent: float = 0.0) -> float:
    """Midpoint quadrature of f <v>^k over the cube (signed)."""
    g = f.grid
    if weight_exponent == 0.0:
        return float(np.sum(f.values) * g.cell_volume)
    w = g.bracket_sq ** (weight_exponent / 2.0)
    return float(np.sum(f.values * w) * g.cell_volume)


def _gauss_mass_energy(sigma: float, L: float) -> tuple:
    """Per-axis integrals of exp(-v^2/(2 sigma^2)) and v^2 exp(...) on [-L, L]."""
    from math import erf, exp, pi, sqrt

    i0 = sigma * sqrt(2.0 * pi) * erf(L / (sigma * sqrt(2.0)))
    i2 = sigma * sigma * (i0 - 2.0 * L * exp(-(L * L) / (2.0 * sigma * sigma)))
    return i0, i2


def _bounding_gaussian_balance(L: float, sigma: float) -> float:
    """inside - outside/tol bookkeeping: returns outside/inside for <v>^2-weighted mass."""
    from math import pi, sqrt

    i0, i2 = _gauss_mass_energy(sigma, L)
    inside = i0**3 + 3.0 * i2 * i0**2
    i0t = sigma * sqrt(2.0 * pi)
    i2t = sigma**2 * i0t
    total = i0t**3 + 3.0 * i2t * i0t**2
    return (total - inside) / inside


def choose_domain(
    rho0: float,
    T0: float,
    stretch_C: float = 1.0,
    dilate_r: float = 1.0,
    tail_tol: float = 1e-8,
    max_half_length: float = 64.0,
    step: float = 0.25,
) -> float:
    """Smallest L_v on a 0.25-step grid containing the bounding Gaussian.

    The bound C rho0 / (2 pi T0)^(3/2) exp(-r |v|^2 / (2 T0)) must carry no
    more than tail_tol of its combined mass + energy integral outside the cube.
    The amplitude (C rho0) scales both sides and drops out.
    """
    if rho0 <= 0 or T0 <= 0 or dilate_r <= 0:
        raise UsageError("rho0, T0 and dilate_r must be positive")
    if stretch_C < 1.0:
        raise UsageError(f"stretch_C must be >= 1, got {stretch_C}")
    if not (0.0 < tail_tol < 1.0):
        raise UsageError(f"tail_tol must lie in (0, 1), got {tail_tol}")
    sigma = np.sqrt(T0 / dilate_r)
    L = step
    while L <= max_half_length + 1e-12:
        if _bounding_gaussian_balance(L, sigma) <= tail_tol:
            return L
        L += step
    raise UsageError(
        f"required half-length exceeds the cap {max_half_length} for tail_tol={tail_tol}"
    )
