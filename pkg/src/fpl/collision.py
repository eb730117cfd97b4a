"""Spectral evaluation of the truncated collision operator.

In Fourier variables the operator is the weighted convolution

    Qhat(xi) = sum_w fhat(xi - w) fhat(w) [ w^T Shat(w) w
                                            - (xi - w)^T Shat(w) (xi - w) ] dxi^3

which splits into 1 + 6 plain convolutions: the scalar weight a(w) = w^T Shat w
against fhat, plus the six upper-triangle components Shat_ij paired with the
(xi - w)_i (xi - w)_j factors carried as spectral multipliers on the other
fhat.  Each convolution is evaluated by transform-multiply-transform; in the
velocity domain the sum collapses to pointwise products

    Q = (2 pi)^(3/2) [ f * ifft(a fhat)
                       - sum_ij m_ij ifft(xi_i xi_j fhat) ifft(Shat_ij fhat) ]

(m_ij = 1 diagonal, 2 off-diagonal), which is the production path.

With padding enabled (default), fields are zero-extended onto the doubled
cube (-2 L_v, 2 L_v)^3 before transforming: the kernel support reaches 2 L_v,
so on the original period the convolution would wrap spurious periodic images
into the result.  On the doubled period no image enters the restriction
window.  The mode set is the padded lattice's own window; Nyquist planes of
fhat are zeroed so the quadratic multipliers stay sign-unambiguous.
"""

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import NumericalError, UsageError
from .lattice import (
    GridSpec,
    SpectralField,
    VelocityField,
    fft_workers,
)
from .weights import COMPONENTS, KernelParams, WeightTable, build_table, default_params

_TWO_PI_32 = (2.0 * np.pi) ** 1.5

#: symmetry multiplicity per COMPONENTS entry (1 diagonal, 2 off-diagonal)
_MULTIPLICITY = (1.0, 2.0, 2.0, 1.0, 2.0, 1.0)


@dataclass(frozen=True)
class CutoffFunction:
    """Scaled cut-off chi(v): identity, or a C^2 smoothstep shell.

    Smoothstep mode is 1 on (1 - delta_chi) Omega and 0 outside
    (1 - delta_chi/5) Omega, with a quintic transition per axis.
    """

    mode: str = "identity"
    delta_chi: float = 0.1

    def __post_init__(self):
        if self.mode not in ("identity", "smoothstep"):
            raise UsageError(f"unknown cutoff mode {self.mode!r}")
        if self.mode == "smoothstep" and not (0.0 < self.delta_chi < 0.5):
            raise UsageError(f"delta_chi must lie in (0, 1/2), got {self.delta_chi}")

    def field(self, grid: GridSpec) -> np.ndarray:
        if self.mode == "identity":
            return np.ones((grid.n_modes,) * 3)
        lo = 1.0 - self.delta_chi
        hi = 1.0 - self.delta_chi / 5.0
        t = np.abs(grid.v1d) / grid.half_length
        s = np.clip((t - lo) / (hi - lo), 0.0, 1.0)
        prof = 1.0 - s**3 * (6.0 * s**2 - 15.0 * s + 10.0)
        return prof[:, None, None] * prof[None, :, None] * prof[None, None, :]


class CollisionWorkspace:
    """Weight multipliers and scratch buffers bound to one base grid.

    One workspace serves one caller at a time; the weight table is shared
    read-only.  `padding=True` evaluates on the doubled domain.
    """

    def __init__(self, grid: GridSpec, table: WeightTable, padding: bool = True):
        self.grid = grid
        self.padding = padding
        self.eval_grid = grid.padded() if padding else grid
        if table.grid != self.eval_grid:
            raise UsageError(
                f"table grid N={table.grid.n_modes}, L={table.grid.half_length} does not "
                f"match evaluation grid N={self.eval_grid.n_modes}, "
                f"L={self.eval_grid.half_length}"
            )
        self.table = table

        m = self.eval_grid.n_modes
        self._m = m
        n = grid.n_modes
        self._base_slice = (
            slice((m - n) // 2, (m - n) // 2 + n),
        ) * 3 if padding else (slice(None),) * 3

        # natural-order wavenumbers, last axis in rfft half layout
        xi_nat = self.eval_grid.dual_spacing * (np.fft.fftfreq(m) * m)
        xi_half = self.eval_grid.dual_spacing * np.arange(m // 2 + 1)
        kx = xi_nat[:, None, None]
        ky = xi_nat[None, :, None]
        kz = xi_half[None, None, :]
        axes = (kx, ky, kz)
        shape_half = (m, m, m // 2 + 1)

        def to_half(sym):
            return np.ascontiguousarray(np.fft.ifftshift(sym)[..., : m // 2 + 1])

        self._asc_half = to_half(table.a_scalar)
        self._s_half = [to_half(table.s_hat[..., c]) for c in range(6)]
        self._d_half = [
            np.broadcast_to(axes[i] * axes[j], shape_half).copy()
            for (i, j) in COMPONENTS
        ]

        # reusable buffers for the 7-convolution evaluation; only the base
        # block of _big is ever written, the zero padding persists
        self._big = np.zeros((m,) * 3)
        self._acc = np.empty((m,) * 3)

    def _mask_nyquist_half(self, F: np.ndarray) -> None:
        m = self._m
        F[m // 2, :, :] = 0.0
        F[:, m // 2, :] = 0.0
        F[:, :, m // 2] = 0.0

    def q_field(self, g_values: np.ndarray) -> np.ndarray:
        """Collision operator values on the base grid (production real-FFT path)."""
        w = fft_workers()
        big = self._big
        big[self._base_slice] = g_values
        F = sfft.rfftn(big, workers=w)
        self._mask_nyquist_half(F)
        shape = big.shape
        acc = self._acc
        # both product factors use the mode-filtered field
        filtered = sfft.irfftn(F, s=shape, workers=w)
        np.multiply(filtered, sfft.irfftn(self._asc_half * F, s=shape, workers=w), out=acc)
        for c, mult in enumerate(_MULTIPLICITY):
            term = sfft.irfftn(self._d_half[c] * F, s=shape, workers=w)
            term *= sfft.irfftn(self._s_half[c] * F, s=shape, workers=w)
            acc -= mult * term
        out = _TWO_PI_32 * acc[self._base_slice]
        if not np.all(np.isfinite(out)):
            raise NumericalError("collision evaluation produced non-finite values")
        return out


def make_workspace(
    grid: GridSpec,
    lam: float | None = None,
    params: KernelParams | None = None,
    table: WeightTable | None = None,
    padding: bool = True,
) -> CollisionWorkspace:
    """Convenience constructor: builds the weight table if not supplied."""
    if table is None:
        if params is None:
            if lam is None:
                raise UsageError("one of lam, params or table is required")
            params = default_params(grid, lam)
        eval_grid = grid.padded() if padding else grid
        table = build_table(eval_grid, params)
    return CollisionWorkspace(grid, table, padding=padding)


def _sym_multipliers(ws: CollisionWorkspace):
    """Full-lattice multipliers in symmetric storage order (complex path)."""
    g = ws.eval_grid
    xi = g.xi1d
    axes = (xi[:, None, None], xi[None, :, None], xi[None, None, :])
    d_sym = [axes[i] * axes[j] for (i, j) in COMPONENTS]
    s_sym = [ws.table.s_hat[..., c] for c in range(6)]
    return ws.table.a_scalar, s_sym, d_sym


def _mask_nyquist_sym(arr: np.ndarray) -> np.ndarray:
    out = arr.copy()
    out[0, :, :] = 0.0
    out[:, 0, :] = 0.0
    out[:, :, 0] = 0.0
    return out


def q_hat(F: SpectralField, ws: CollisionWorkspace) -> SpectralField:
    """Fourier transform of the collision operator on the workspace lattice.

    Each of the 7 convolutions is evaluated transform-multiply-transform;
    the half-cell-offset sampling makes the coefficient lattice antiperiodic,
    so the convolutions are carried out on the phase-free collocation values
    (complex-safe: arbitrary, possibly non-Hermitian, inputs are allowed).
    The input must live on ws.eval_grid; use q_unconserved for base-grid
    velocity fields.
    """
    if F.grid != ws.eval_grid:
        raise UsageError(
            f"spectral field grid N={F.grid.n_modes} does not match workspace "
            f"evaluation grid N={ws.eval_grid.n_modes}"
        )
    w = fft_workers()
    g = ws.eval_grid
    asc, s_sym, d_sym = _sym_multipliers(ws)
    G = _mask_nyquist_sym(np.asarray(F.coeffs))

    # phase-free collocation samples of the (complex) field
    phase = np.exp(1j * g.xi1d * g.v1d[0])
    P = phase[:, None, None] * phase[None, :, None] * phase[None, None, :]
    inv_scale = g.n_modes**3 * (2.0 * np.pi) ** 1.5 / (2.0 * g.half_length) ** 3
    x = sfft.ifftn(np.fft.ifftshift(G * P), workers=w) * inv_scale
    X = sfft.fftn(x, workers=w)

    def field_of(mult_sym):
        m_nat = np.fft.ifftshift(mult_sym)
        return sfft.ifftn(m_nat * X, workers=w)

    acc = x * field_of(asc)
    for c, mult in enumerate(_MULTIPLICITY):
        acc -= mult * field_of(d_sym[c]) * field_of(s_sym[c])
    acc *= _TWO_PI_32

    # forward transform of the (complex) result field
    fwd_scale = (2.0 * np.pi) ** -1.5 * g.cell_volume
    out = fwd_scale * np.conj(P) * np.fft.fftshift(sfft.fftn(acc, workers=w))
    return SpectralField(g, out)


def q_hat_reference(F: SpectralField, ws: CollisionWorkspace) -> SpectralField:
    """Brute-force double sum over all mode pairs; O(N^6), N <= 16 enforced.

    Differences leaving the mode window wrap onto the lattice with the
    antiperiodic sign fhat(k +- N) = -fhat(k) implied by the half-cell grid
    offset, matching the collocation evaluation exactly.
    """
    if F.grid != ws.eval_grid:
        raise UsageError("spectral field grid does not match workspace")
    m = ws.eval_grid.n_modes
    if m > 16:
        raise UsageError(f"reference double sum limited to 16 modes per axis, got {m}")
    asc, s_sym, d_sym = _sym_multipliers(ws)
    G = _mask_nyquist_sym(np.asarray(F.coeffs)).ravel()
    ascf = asc.ravel()
    sf = [s.ravel() for s in s_sym]
    k1 = ws.eval_grid.k1d
    modes = np.stack(np.meshgrid(k1, k1, k1, indexing="ij"), axis=-1).reshape(-1, 3)
    dxi = ws.eval_grid.dual_spacing
    out = np.empty(len(modes), dtype=np.complex128)
    half = m // 2
    for a, kvec in enumerate(modes):
        d_raw = kvec[None, :] - modes
        d = (d_raw + half) % m - half
        wrapped = np.sum(d != d_raw, axis=1)
        sign = np.where(wrapped % 2 == 0, 1.0, -1.0)
        flat = ((d[:, 0] + half) * m + (d[:, 1] + half)) * m + (d[:, 2] + half)
        Gd = sign * G[flat]
        xd = dxi * d
        bracket = ascf - (
            xd[:, 0] * xd[:, 0] * sf[0]
            + xd[:, 1] * xd[:, 1] * sf[3]
            + xd[:, 2] * xd[:, 2] * sf[5]
            + 2.0 * xd[:, 0] * xd[:, 1] * sf[1]
            + 2.0 * xd[:, 0] * xd[:, 2] * sf[2]
            + 2.0 * xd[:, 1] * xd[:, 2] * sf[4]
        )
        out[a] = np.sum(Gd * G * bracket)
    out = out.reshape((m,) * 3) * dxi**3
    return SpectralField(ws.eval_grid, out)


def q_unconserved(
    g: VelocityField, chi: CutoffFunction, ws: CollisionWorkspace
) -> VelocityField:
    """Unconserved operator Q_u: mode-truncated Q(chi g, chi g) on the base grid."""
    if g.grid != ws.grid:
        raise UsageError("velocity field grid does not match workspace base grid")
    vals = g.values
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite input to q_unconserved")
    if chi.mode != "identity":
        vals = vals * chi.field(g.grid)
    return VelocityField(g.grid, ws.q_field(vals))


def q_direct_oracle(
    g: VelocityField, params: KernelParams, chunk: int = 512
) -> VelocityField:
    """Direct-quadrature evaluation of Q = abar_ij d2_ij g - cbar g.

    abar = a * g and cbar = c * g are O(N^6) sums over grid pairs with the
    ball-truncated kernels; second derivatives are spectral on the base grid.
    Cross-validates the Fourier path; N <= 16 enforced.
    """
    grid = g.grid
    n = grid.n_modes
    if n > 16:
        raise UsageError(f"direct oracle limited to N <= 16, got N={n}")
    lam, R = params.lam, params.trunc_radius
    v1, v2, v3 = grid.v_mesh
    pts = np.stack([v1.ravel(), v2.ravel(), v3.ravel()], axis=1)
    fm = g.values.ravel() * grid.cell_volume

    npts = len(pts)
    abar = [np.zeros(npts) for _ in COMPONENTS]
    cbar = np.zeros(npts)
    for i0 in range(0, npts, chunk):
        z = pts[i0 : i0 + chunk, None, :] - pts[None, :, :]
        zn = np.sqrt(np.sum(z * z, axis=2))
        inside = zn <= R
        zs = np.where(zn == 0.0, 1.0, zn)
        for c, (i, j) in enumerate(COMPONENTS):
            delta = 1.0 if i == j else 0.0
            aij = np.where(
                inside, zn ** (lam + 2.0) * (delta - z[..., i] * z[..., j] / zs**2), 0.0
            )
            abar[c][i0 : i0 + chunk] = aij @ fm
        cc = np.where(inside, -2.0 * (lam + 3.0) * zn**lam, 0.0)
        cbar[i0 : i0 + chunk] = cc @ fm

    # spectral second derivatives on the base grid, Nyquist zeroed
    w = fft_workers()
    xi = grid.xi1d_deriv
    xi_nat = np.fft.ifftshift(xi)
    mi = (xi_nat[:, None, None], xi_nat[None, :, None], xi_nat[None, None, :])
    Gk = sfft.fftn(g.values, workers=w)
    out = -cbar.reshape(grid.v_sq.shape) * g.values
    for c, (i, j) in enumerate(COMPONENTS):
        mult = _MULTIPLICITY[c]
        d2 = sfft.ifftn(-mi[i] * mi[j] * Gk, workers=w).real
        out += mult * abar[c].reshape(d2.shape) * d2
    return VelocityField(grid, out)


def convolve_b_oracle(g: VelocityField, params: KernelParams, axis: int = 0,
                      chunk: int = 512) -> np.ndarray:
    """Direct sum bbar_axis = (b_axis * g) with b_i(z) = -2 |z|^lambda z_i.

    Used by the weak-form cross-check (first-moment test functions).
    """
    grid = g.grid
    if grid.n_modes > 16:
        raise UsageError("direct convolution limited to N <= 16")
    lam, R = params.lam, params.trunc_radius
    v1, v2, v3 = grid.v_mesh
    pts = np.stack([v1.ravel(), v2.ravel(), v3.ravel()], axis=1)
    fm = g.values.ravel() * grid.cell_volume
    out = np.zeros(len(pts))
    for i0 in range(0, len(pts), chunk):
        z = pts[i0 : i0 + chunk, None, :] - pts[None, :, :]
        zn = np.sqrt(np.sum(z * z, axis=2))
        bi = np.where(zn <= R, -2.0 * zn**lam * z[..., axis], 0.0)
        out[i0 : i0 + chunk] = bi @ fm
    return out.reshape(g.values.shape)
