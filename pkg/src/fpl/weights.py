"""Fourier transform of the truncated collision matrix, tabulated per mode.

The collision matrix S(u) = |u|^(lambda+2) (I - u u^T / |u|^2), truncated to
the ball |u| <= R, has a real symmetric transform of isotropic form

    Shat(w) = (2 pi)^(-3/2) \\int_{B_R} S(u) exp(-i w . u) du
            = A(|w|) I + B(|w|) w w^T / |w|^2 .

Writing j0(x) = sin(x)/x, the two radial profiles reduce to 1-D integrals

    A(rho) = P \\int_0^R r^(lambda+4) [ j0(rho r) + j0'(rho r)/(rho r) ] dr
    B(rho) = P \\int_0^R r^(lambda+4) [ j0''(rho r) - j0'(rho r)/(rho r) ] dr

with P = 4 pi (2 pi)^(-3/2), evaluated by composite 16-point Gauss-Legendre
panels.  At rho = 0 the closed forms A = (2/3) P R^(lambda+5)/(lambda+5),
B = 0 are used.  The derived scalar a(w) = w^T Shat(w) w = rho^2 (A + B).
"""

import io
from dataclasses import dataclass

import numpy as np

from . import _binfmt
from .errors import QuadratureError, UsageError
from .lattice import GridSpec

#: upper-triangle component order for the stored 3x3 matrices
COMPONENTS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))

#: above this many distinct |w| magnitudes, profiles are interpolated; at the
#: 1e-8 interpolation budget a dense table only pays off beyond N ~ 10^4 of
#: them, so the threshold covers every realistic build exactly
EXACT_MAGNITUDE_LIMIT = 16384

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_QUAD_TOL = 1e-8


@dataclass(frozen=True)
class KernelParams:
    """Hard-potential exponent, kernel truncation radius and radial resolution."""

    lam: float
    trunc_radius: float
    quad_points: int = 256

    def __post_init__(self):
        if not (0.0 <= self.lam <= 1.0):
            raise UsageError(
                f"lambda={self.lam} outside the hard-potential range [0, 1]; "
                "soft potentials are out of scope"
            )
        if not (self.trunc_radius > 0):
            raise UsageError(f"trunc_radius must be positive, got {self.trunc_radius}")
        if self.quad_points < 64:
            raise UsageError(f"quad_points must be >= 64, got {self.quad_points}")


def default_params(grid: GridSpec, lam: float, quad_points: int | None = None) -> KernelParams:
    """R = 2 L_v of the base grid; quadrature sized for the grid's dual lattice."""
    R = 2.0 * grid.half_length
    if quad_points is None:
        quad_points = suggested_quad_points(grid, R)
    return KernelParams(lam=lam, trunc_radius=R, quad_points=quad_points)


def suggested_quad_points(grid: GridSpec, trunc_radius: float) -> int:
    """Nodes resolving the fastest radial oscillation on the padded dual lattice."""
    rho_max = grid.padded().dual_spacing * grid.padded().n_modes / 2 * np.sqrt(3.0)
    osc = rho_max * trunc_radius / (2.0 * np.pi)
    return int(max(256, 16 * np.ceil(osc)))


def _j0(x):
    small = np.abs(x) < 0.5
    xs = np.where(small, 1.0, x)
    x2 = x * x
    series = 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    return np.where(small, series, np.sin(xs) / xs)


def _j0p_over_x(x):
    # j0'(x)/x, even; series avoids the x^-3 cancellation near 0
    small = np.abs(x) < 0.5
    xs = np.where(small, 1.0, x)
    x2 = x * x
    series = -(1.0 / 3.0) * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0 * (1.0 - x2 / 54.0)))
    return np.where(small, series, (xs * np.cos(xs) - np.sin(xs)) / xs**3)


def _j0pp(x):
    small = np.abs(x) < 0.5
    xs = np.where(small, 1.0, x)
    x2 = x * x
    series = -1.0 / 3.0 + x2 / 10.0 - x2 * x2 / 168.0 + x2 * x2 * x2 / 6480.0
    closed = (2.0 - xs * xs) * np.sin(xs) / xs**3 - 2.0 * np.cos(xs) / xs**2
    return np.where(small, series, closed)


def _panel_nodes(R: float, n_nodes: int):
    n_panels = max(4, int(np.ceil(n_nodes / 16.0)))
    edges = np.linspace(0.0, R, n_panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    r = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return r, w


def _profiles_at(lam: float, R: float, rho: np.ndarray, n_nodes: int):
    """Batch evaluation of (A, B) at the magnitudes rho with n_nodes GL nodes."""
    pref = 4.0 * np.pi * (2.0 * np.pi) ** -1.5
    r, w = _panel_nodes(R, n_nodes)
    rl = r ** (lam + 4.0) * w
    A = np.empty(rho.shape)
    B = np.empty(rho.shape)
    for i0 in range(0, rho.size, 512):
        x = np.multiply.outer(rho[i0 : i0 + 512], r)
        A[i0 : i0 + 512] = pref * ((_j0(x) + _j0p_over_x(x)) @ rl)
        B[i0 : i0 + 512] = pref * ((_j0pp(x) - _j0p_over_x(x)) @ rl)
    return A, B


def _dc_profile(lam: float, R: float) -> float:
    pref = 4.0 * np.pi * (2.0 * np.pi) ** -1.5
    return pref * (2.0 / 3.0) * R ** (lam + 5.0) / (lam + 5.0)


def _profiles_checked(params: KernelParams, rho: np.ndarray):
    """(A, B) with a doubled-resolution refinement check against _QUAD_TOL."""
    lam, R = params.lam, params.trunc_radius
    a0 = _dc_profile(lam, R)
    A1, B1 = _profiles_at(lam, R, rho, params.quad_points)
    A2, B2 = _profiles_at(lam, R, rho, 2 * params.quad_points)
    err = max(np.abs(A1 - A2).max(), np.abs(B1 - B2).max()) / a0
    if err > _QUAD_TOL:
        raise QuadratureError(
            f"radial quadrature not converged: relative change {err:.3e} > {_QUAD_TOL:.0e} "
            f"with quad_points={params.quad_points}"
        )
    dc = rho == 0.0
    if np.any(dc):
        A2 = A2.copy()
        B2 = B2.copy()
        A2[dc] = a0
        B2[dc] = 0.0
    return A2, B2


def radial_profiles(params: KernelParams, rho: float):
    """Isotropic profiles (A, B) of Shat at a single magnitude |w| = rho."""
    if rho < 0:
        raise UsageError(f"rho must be nonnegative, got {rho}")
    A, B = _profiles_checked(params, np.asarray([float(rho)]))
    return float(A[0]), float(B[0])


def _profiles_on_magnitudes(params: KernelParams, unique_rho: np.ndarray,
                            exact_limit: int):
    if unique_rho.size <= exact_limit:
        return _profiles_checked(params, unique_rho)
    # dense table + monotone cubic interpolation, budget 1e-8 relative to A(0);
    # PCHIP is third order, so ~2560 points per oscillation are required
    from scipy.interpolate import PchipInterpolator

    rho_max = float(unique_rho.max())
    osc = rho_max * params.trunc_radius / (2.0 * np.pi)
    n_dense = int(max(4096, 2560 * np.ceil(osc)))
    dense = np.linspace(0.0, rho_max, n_dense)
    A_d, B_d = _profiles_checked(params, dense)
    A = PchipInterpolator(dense, A_d)(unique_rho)
    B = PchipInterpolator(dense, B_d)(unique_rho)
    dc = unique_rho == 0.0
    A[dc] = _dc_profile(params.lam, params.trunc_radius)
    B[dc] = 0.0
    return A, B


@dataclass(frozen=True)
class WeightTable:
    """Per-mode Shat components and the scalar w^T Shat w on a grid's dual lattice.

    Attributes
    ----------
    s_hat : ndarray, shape (N, N, N, 6)
        Upper-triangle components in COMPONENTS order, symmetric storage order.
    a_scalar : ndarray, shape (N, N, N)
        w^T Shat(w) w per mode.
    checksum : str
        Hex digest of the serialized payload.
    """

    grid: GridSpec
    params: KernelParams
    s_hat: np.ndarray
    a_scalar: np.ndarray
    checksum: str

    def s_matrix(self, index) -> np.ndarray:
        """Full symmetric 3x3 matrix at one mode index (symmetric order)."""
        c = self.s_hat[index]
        return np.array(
            [[c[0], c[1], c[2]], [c[1], c[3], c[4]], [c[2], c[4], c[5]]]
        )


def _payload_bytes(s_hat: np.ndarray, a_scalar: np.ndarray) -> bytes:
    buf = io.BytesIO()
    buf.write(np.ascontiguousarray(s_hat.reshape(-1, 6), dtype="<f8").tobytes())
    buf.write(np.ascontiguousarray(a_scalar.reshape(-1), dtype="<f8").tobytes())
    return buf.getvalue()


def _trace_identity_check(params: KernelParams, rho: np.ndarray,
                          A: np.ndarray, B: np.ndarray) -> None:
    """tr Shat = 3A + B must match twice the scalar transform of |u|^(lam+2)."""
    lam, R = params.lam, params.trunc_radius
    a0 = _dc_profile(lam, R)
    idx = np.linspace(1, rho.size - 1, min(3, rho.size - 1)).astype(int)
    r = np.linspace(0.0, R, 20001)
    from scipy.integrate import simpson

    for i in idx:
        x = rho[i] * r
        sinc = np.ones_like(x)
        nz = x != 0
        sinc[nz] = np.sin(x[nz]) / x[nz]
        ref = 2.0 * (2 * np.pi) ** -1.5 * 4 * np.pi * simpson(
            r ** (lam + 4.0) * sinc, x=r
        )
        if abs(3.0 * A[i] + B[i] - ref) > 1e-6 * a0:
            raise QuadratureError(
                f"trace identity violated at |w|={rho[i]:.6g}: "
                f"3A+B={3 * A[i] + B[i]:.6e} vs {ref:.6e}"
            )


def build_table(grid: GridSpec, params: KernelParams,
                exact_limit: int = EXACT_MAGNITUDE_LIMIT) -> WeightTable:
    """Tabulate Shat and a_scalar for every mode of the grid's dual lattice."""
    xi = grid.xi1d
    KX, KY, KZ = np.meshgrid(xi, xi, xi, indexing="ij")
    rho = np.sqrt(KX**2 + KY**2 + KZ**2)
    unique_rho, inverse = np.unique(rho.ravel(), return_inverse=True)
    A_u, B_u = _profiles_on_magnitudes(params, unique_rho, exact_limit)
    _trace_identity_check(params, unique_rho, A_u, B_u)
    A = A_u[inverse].reshape(rho.shape)
    B = B_u[inverse].reshape(rho.shape)

    n = grid.n_modes
    s_hat = np.empty((n, n, n, 6))
    rho_safe = np.where(rho == 0.0, 1.0, rho)
    K = (KX, KY, KZ)
    b_dir = np.where(rho == 0.0, 0.0, B)
    for c, (i, j) in enumerate(COMPONENTS):
        s_hat[..., c] = (A if i == j else 0.0) + b_dir * K[i] * K[j] / rho_safe**2
    a_scalar = rho**2 * (A + B)

    checksum = _binfmt.digest(_payload_bytes(s_hat, a_scalar)).hex()
    return WeightTable(grid=grid, params=params, s_hat=s_hat,
                       a_scalar=a_scalar, checksum=checksum)


def save_table(table: WeightTable, path) -> None:
    payload = _payload_bytes(table.s_hat, table.a_scalar)
    header = _binfmt.pack_header(
        b"FPLW",
        table.grid.n_modes,
        table.params.quad_points,
        table.params.lam,
        table.grid.half_length,
        table.params.trunc_radius,
        payload,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_table(path, expect_grid: GridSpec | None = None,
               expect_params: KernelParams | None = None) -> WeightTable:
    (n, quad_points, lam, half_length, R), payload = _binfmt.read_block(path, b"FPLW")
    grid = GridSpec(n, half_length)
    params = KernelParams(lam=lam, trunc_radius=R, quad_points=quad_points)
    if expect_grid is not None and grid != expect_grid:
        raise UsageError(
            f"{path}: table grid N={n}, L_v={half_length} does not match requested "
            f"N={expect_grid.n_modes}, L_v={expect_grid.half_length}"
        )
    if expect_params is not None and params != expect_params:
        raise UsageError(f"{path}: table params {params} do not match {expect_params}")
    n_modes = n**3
    expected = n_modes * 7 * 8
    if len(payload) != expected:
        raise UsageError(
            f"{path}: payload length {len(payload)} bytes, expected {expected}"
        )
    flat = np.frombuffer(payload, dtype="<f8")
    s_hat = flat[: n_modes * 6].reshape(n, n, n, 6).copy()
    a_scalar = flat[n_modes * 6 :].reshape(n, n, n).copy()
    checksum = _binfmt.digest(payload).hex()
    return WeightTable(grid=grid, params=params, s_hat=s_hat,
                       a_scalar=a_scalar, checksum=checksum)
