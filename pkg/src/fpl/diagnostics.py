"""Observables tracked along a run: moments, norms, entropy, stability ratio.

Weighted moments follow m_k(f) = \\int |f| <v>^k dv with <v> = sqrt(1 + |v|^2);
physical moments (mass, bulk velocity, temperature) use the signed field.
Sobolev norms are spectral: ||f||_{H^s} = || <xi>^s fhat ||_2 for weight 0,
and derivative sums with the <v>^k weight otherwise.
"""

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import UsageError
from .lattice import (
    GridSpec,
    SpectralField,
    VelocityField,
    forward_transform,
    inverse_transform,
    mode_mask,
    project_modes,
    quadrature,
    spectral_derivative,
)

ENTROPY_FLOOR = 1e-30


@dataclass(frozen=True)
class MaxwellianSpec:
    rho0: float
    V0: tuple
    T0: float

    def __post_init__(self):
        if self.rho0 <= 0 or self.T0 <= 0:
            raise UsageError("rho0 and T0 must be positive")
        if len(self.V0) != 3:
            raise UsageError("V0 must have 3 components")


def maxwellian_field(spec: MaxwellianSpec, grid: GridSpec) -> VelocityField:
    """Sample rho0 / (2 pi T0)^(3/2) exp(-|v - V0|^2 / (2 T0)) on the grid."""
    v1, v2, v3 = grid.v_mesh
    arg = (v1 - spec.V0[0]) ** 2 + (v2 - spec.V0[1]) ** 2 + (v3 - spec.V0[2]) ** 2
    vals = spec.rho0 / (2.0 * np.pi * spec.T0) ** 1.5 * np.exp(-arg / (2.0 * spec.T0))
    return VelocityField(grid, vals)


@dataclass(frozen=True)
class Moments:
    rho: float
    velocity: tuple
    temperature: float        # about the bulk velocity
    temperature_raw: float    # paper convention, second moment with V = 0
    physical: bool            # rho > 0


def moments(f: VelocityField) -> Moments:
    g = f.grid
    w = g.cell_volume
    vals = f.values
    rho = float(np.sum(vals) * w)
    if rho <= 0.0:
        return Moments(rho, (0.0, 0.0, 0.0), 0.0, 0.0, False)
    v1, v2, v3 = g.v_mesh
    V = tuple(float(np.sum(vals * vi) * w / rho) for vi in (v1, v2, v3))
    e_raw = float(np.sum(vals * g.v_sq) * w)
    t_raw = e_raw / (3.0 * rho)
    vsq_c = (v1 - V[0]) ** 2 + (v2 - V[1]) ** 2 + (v3 - V[2]) ** 2
    t_cent = float(np.sum(vals * vsq_c) * w / (3.0 * rho))
    return Moments(rho, V, t_cent, t_raw, True)


def weighted_moment(f: VelocityField, k: float) -> float:
    """m_k(f) = sum |f| <v>^k dv^3."""
    g = f.grid
    w = g.bracket_sq ** (k / 2.0) if k != 0.0 else 1.0
    return float(np.sum(np.abs(f.values) * w) * g.cell_volume)


def l2_weighted(f: VelocityField, k: float) -> float:
    """||f||_{L^2_k} = || f <v>^k ||_2."""
    g = f.grid
    w = g.bracket_sq ** (k / 2.0) if k != 0.0 else 1.0
    return float(np.sqrt(np.sum((f.values * w) ** 2) * g.cell_volume))


def entropy(f: VelocityField) -> float:
    """H = sum f ln f over cells with f above the floor; negatives excluded."""
    vals = f.values
    pos = vals > ENTROPY_FLOOR
    if not np.any(pos):
        return 0.0
    v = vals[pos]
    return float(np.sum(v * np.log(v)) * f.grid.cell_volume)


def stability_ratio(f: VelocityField) -> float:
    """Weighted negative-part mass over weighted positive-part mass."""
    vals = f.values
    w2 = f.grid.bracket_sq
    neg = vals < 0.0
    num = float(-np.sum(vals[neg] * w2[neg]))
    den = float(np.sum(vals[~neg] * w2[~neg]))
    if den <= 0.0:
        return math.inf if num > 0.0 else 0.0
    return num / den


def _spectral_hs(F: SpectralField, s: int) -> float:
    g = F.grid
    xi = g.xi1d
    xi_sq = xi[:, None, None] ** 2 + xi[None, :, None] ** 2 + xi[None, None, :] ** 2
    w = (1.0 + xi_sq) ** s
    return float(np.sqrt(np.sum(w * np.abs(F.coeffs) ** 2) * g.parseval_constant))


def hs_norm(f: VelocityField, s: int, k_weight: float = 0.0) -> float:
    """Sobolev norm H^s_k; spectral <xi>^s form for k_weight = 0."""
    if s < 0:
        raise UsageError(f"s must be >= 0, got {s}")
    F = forward_transform(f)
    if k_weight == 0.0:
        return _spectral_hs(F, s)
    # derivative-sum form with the <v>^k weight
    g = f.grid
    w = g.bracket_sq ** (k_weight / 2.0)
    total = float(np.sum((f.values * w) ** 2) * g.cell_volume)
    from itertools import combinations_with_replacement

    for order in range(1, s + 1):
        for axes in combinations_with_replacement(range(3), order):
            D = F
            for ax in axes:
                D = spectral_derivative(D, ax, 1)
            dfield = inverse_transform(D)
            total += float(np.sum((dfield.values * w) ** 2) * g.cell_volume)
    return math.sqrt(total)


def projection_tail_norm(f: VelocityField, n_keep: int) -> float:
    """||(1 - Pi) f||_2 for the lowest-n_keep-per-axis mode projection."""
    F = forward_transform(f)
    mask = mode_mask(f.grid, n_keep)
    tail = np.where(mask, 0.0, F.coeffs)
    return float(np.sqrt(np.sum(np.abs(tail) ** 2) * f.grid.parseval_constant))


def tail_bound_check(f: VelocityField, s: int, n_keep: int):
    """Measured projection remainder vs the H^s tail estimate.

    Returns (lhs, rhs) with lhs = ||(1 - Pi^M) f||_2 and
    rhs = (2 pi)^(-3/2) (L_v / (2 pi M))^s ||f||_{H^s}, M = n_keep / 2.
    """
    lhs = projection_tail_norm(f, n_keep)
    M = n_keep // 2
    g = f.grid
    rhs = (
        (2.0 * np.pi) ** -1.5
        * (g.half_length / (2.0 * np.pi * M)) ** s
        * hs_norm(f, s)
    )
    return lhs, rhs


def equilibrium_distance(f: VelocityField, eq: VelocityField) -> float:
    if f.grid != eq.grid:
        raise UsageError("fields live on different grids")
    return float(np.sqrt(np.sum((f.values - eq.values) ** 2) * f.grid.cell_volume))


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One row of the diagnostics stream (CSV schema = field order here)."""

    t: float
    rho: float
    vx: float
    vy: float
    vz: float
    temperature: float
    temperature_raw: float
    m0: float
    m2: float
    m3: float
    m4: float
    l2_norm: float
    l2_weighted2: float
    h1_norm: float
    h2_norm: float
    entropy: float
    neg_ratio: float
    dist_to_eq: float
    correction_norm: float
    tail_norm: float

    @classmethod
    def fieldnames(cls):
        return [f.name for f in fields(cls)]

    def row(self):
        return [getattr(self, name) for name in self.fieldnames()]

    def finite(self) -> bool:
        return all(np.isfinite(v) for v in self.row())


def collect_record(
    t: float,
    g: VelocityField,
    eq: VelocityField,
    q_u: VelocityField | None = None,
    conservation=None,
) -> DiagnosticsRecord:
    """Assemble the full record; q_u feeds the correction/tail diagnostics."""
    mom = moments(g)
    if q_u is not None and conservation is not None:
        corr = conservation.correction_norm(q_u)
        tail = projection_tail_norm(q_u, g.grid.n_modes // 2)
    else:
        corr = 0.0
        tail = 0.0
    return DiagnosticsRecord(
        t=t,
        rho=mom.rho,
        vx=mom.velocity[0],
        vy=mom.velocity[1],
        vz=mom.velocity[2],
        temperature=mom.temperature,
        temperature_raw=mom.temperature_raw,
        m0=weighted_moment(g, 0.0),
        m2=weighted_moment(g, 2.0),
        m3=weighted_moment(g, 3.0),
        m4=weighted_moment(g, 4.0),
        l2_norm=g.l2_norm(),
        l2_weighted2=l2_weighted(g, 2.0),
        h1_norm=hs_norm(g, 1),
        h2_norm=hs_norm(g, 2),
        entropy=entropy(g),
        neg_ratio=stability_ratio(g),
        dist_to_eq=equilibrium_distance(g, eq),
        correction_norm=corr,
        tail_norm=tail,
    )
