"""Time integration of dg/dt = Q_c(g, g) with classical RK4.

The right-hand side is the conservation-projected collision operator.  The
default time step targets the stiffest diffusion scale of the truncated
kernel, lam_hat ~ 0.3 R^(lambda+2) m0 |xi_max|^2, with dt = 2.4 / lam_hat
(safely inside the RK4 real-axis stability interval; calibrated against
measured Jacobian spectral radii).  The negative-part stability ratio is
monitored every step; a breach halts the run rather than projecting the
solution back to positivity.
"""

from dataclasses import dataclass, replace

import numpy as np

from .collision import CollisionWorkspace, CutoffFunction, make_workspace
from .conserve import ConservationOperator, build_conservation
from .diagnostics import (
    DiagnosticsRecord,
    MaxwellianSpec,
    collect_record,
    maxwellian_field,
    moments,
    stability_ratio,
    weighted_moment,
)
from .errors import NumericalError, StabilityError, UsageError
from .lattice import (
    GridSpec,
    SpectralField,
    VelocityField,
    forward_transform,
    inverse_transform,
)
from .weights import KernelParams, WeightTable, default_params


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    n_modes: int
    half_length: float
    t_final: float
    dt: float | None = None              # None -> stiffness heuristic
    cutoff: CutoffFunction = CutoffFunction()
    padding: bool = True
    epsilon_stability: float = 0.25
    output_stride: int = 10
    rng_seed: int = 0
    trunc_radius: float | None = None    # None -> 2 * half_length
    quad_points: int | None = None
    check_conservation: bool = True

    def __post_init__(self):
        if not (0.0 < self.epsilon_stability <= 0.25):
            raise UsageError(
                f"epsilon_stability must lie in (0, 1/4], got {self.epsilon_stability}"
            )
        if self.t_final < 0:
            raise UsageError("t_final must be nonnegative")
        if self.dt is not None and self.dt <= 0:
            raise UsageError("dt must be positive")
        if self.output_stride < 1:
            raise UsageError("output_stride must be >= 1")

    def grid(self) -> GridSpec:
        return GridSpec(self.n_modes, self.half_length)

    def kernel_params(self) -> KernelParams:
        base = default_params(self.grid(), self.lam, self.quad_points)
        if self.trunc_radius is not None:
            base = replace(base, trunc_radius=self.trunc_radius)
        return base


@dataclass(frozen=True)
class SolverState:
    t: float
    g: VelocityField
    step_index: int
    diagnostics: DiagnosticsRecord | None = None


def rhs_lipschitz_scale(cfg: SolverConfig, m0: float) -> float:
    """Stiffness estimate for the projected collision operator."""
    params = cfg.kernel_params()
    R = params.trunc_radius
    L = cfg.half_length
    xi_max_sq = 3.0 * (np.pi * cfg.n_modes / (2.0 * L)) ** 2
    return 0.30 * R ** (params.lam + 2.0) * m0 * xi_max_sq


def default_dt(cfg: SolverConfig, g0: VelocityField) -> float:
    m0 = weighted_moment(g0, 0.0)
    return 2.4 / rhs_lipschitz_scale(cfg, max(m0, 1e-300))


class LandauSolver:
    """Owns the workspace, conservation operator and the RK4 loop.

    `rhs_override` replaces the collision right-hand side (used by the
    integrator tests); it receives and returns raw value arrays.
    """

    def __init__(
        self,
        cfg: SolverConfig,
        table: WeightTable | None = None,
        workspace: CollisionWorkspace | None = None,
        rhs_override=None,
    ):
        self.cfg = cfg
        self.grid = cfg.grid()
        if workspace is not None:
            self.workspace = workspace
        else:
            self.workspace = make_workspace(
                self.grid, params=cfg.kernel_params(), table=table, padding=cfg.padding
            )
        self.conservation: ConservationOperator = build_conservation(self.grid)
        self._chi = cfg.cutoff
        self._rhs_override = rhs_override
        self._a_row_norms = np.sqrt(np.sum(self.conservation.a_rows**2, axis=1))

    # -- right-hand side -------------------------------------------------

    def q_u_values(self, g_values: np.ndarray) -> np.ndarray:
        vals = g_values
        if self._chi.mode != "identity":
            vals = vals * self._chi.field(self.grid)
        return self.workspace.q_field(vals)

    def _rhs_values(self, g_values: np.ndarray) -> np.ndarray:
        if self._rhs_override is not None:
            return self._rhs_override(g_values)
        q = self.q_u_values(g_values)
        out = q.ravel()
        rows = self.conservation.a_rows
        for _ in range(2):
            out -= rows.T @ self.conservation._solve(rows @ out)
        return out.reshape(g_values.shape)

    def rhs(self, g: VelocityField) -> VelocityField:
        """Conserved collision operator Q_c(g, g)."""
        if g.grid != self.grid:
            raise UsageError("field grid does not match solver grid")
        return VelocityField(self.grid, self._rhs_values(g.values))

    # -- stepping ----------------------------------------------------------

    def step_rk4(self, state: SolverState, dt: float) -> SolverState:
        g0 = state.g.values
        stages = []
        y = g0
        for idx, coeff in enumerate((0.5 * dt, 0.5 * dt, dt)):
            k = self._rhs_values(y)
            if not np.all(np.isfinite(k)):
                raise NumericalError(
                    f"non-finite RK4 stage {idx + 1} at t={state.t:.6g} (dt too large?)"
                )
            stages.append(k)
            y = g0 + coeff * k
        k4 = self._rhs_values(y)
        if not np.all(np.isfinite(k4)):
            raise NumericalError(f"non-finite RK4 stage 4 at t={state.t:.6g}")
        if self.cfg.check_conservation and self._rhs_override is None:
            self._assert_conserved(k4, state.t)
        out = g0 + (dt / 6.0) * (stages[0] + 2.0 * stages[1] + 2.0 * stages[2] + k4)
        return SolverState(
            t=state.t + dt, g=VelocityField(self.grid, out), step_index=state.step_index + 1
        )

    def _assert_conserved(self, k: np.ndarray, t: float) -> None:
        resid = np.abs(self.conservation.moments(k))
        scale = self._a_row_norms * np.sqrt(np.sum(k**2))
        bad = resid > 1e-12 * np.maximum(scale, 1e-300)
        if np.any(bad):
            i = int(np.argmax(resid / np.maximum(scale, 1e-300)))
            raise NumericalError(
                f"conservation residual {resid[i]:.3e} on invariant {i} at t={t:.6g}"
            )

    # -- run loop ----------------------------------------------------------

    def project_initial(self, g0: VelocityField) -> VelocityField:
        """Restrict initial data to the solver's symmetric mode set."""
        F = forward_transform(g0)
        c = F.coeffs.copy()
        c[0, :, :] = 0.0
        c[:, 0, :] = 0.0
        c[:, :, 0] = 0.0
        return inverse_transform(SpectralField(F.grid, c))

    def equilibrium(self, g0: VelocityField) -> VelocityField:
        mom = moments(g0)
        spec = MaxwellianSpec(rho0=mom.rho, V0=mom.velocity, T0=mom.temperature)
        return maxwellian_field(spec, self.grid)

    def run(self, g0: VelocityField, sink=None) -> SolverState:
        """Integrate to t_final, emitting diagnostics every output_stride steps."""
        cfg = self.cfg
        g = self.project_initial(g0)
        ratio0 = stability_ratio(g)
        if ratio0 > cfg.epsilon_stability:
            raise StabilityError(
                f"initial data violates the stability condition: ratio "
                f"{ratio0:.4g} > epsilon {cfg.epsilon_stability}",
                t=0.0,
                ratio=ratio0,
            )
        dt = cfg.dt if cfg.dt is not None else default_dt(cfg, g)
        eq = self.equilibrium(g)

        def emit(state: SolverState, q_u: VelocityField | None) -> SolverState:
            rec = collect_record(state.t, state.g, eq, q_u=q_u, conservation=self.conservation)
            if sink is not None:
                sink(rec)
            return SolverState(state.t, state.g, state.step_index, rec)

        state = SolverState(t=0.0, g=g, step_index=0)
        state = emit(state, self._q_u_for_diag(g))
        if cfg.t_final == 0.0:
            return state

        n_steps = max(1, int(np.ceil(cfg.t_final / dt - 1e-12)))
        for i in range(n_steps):
            step_dt = min(dt, cfg.t_final - state.t)
            if step_dt <= 0:
                break
            state = self.step_rk4(state, step_dt)
            ratio = stability_ratio(state.g)
            if ratio > cfg.epsilon_stability:
                raise StabilityError(
                    f"stability ratio {ratio:.4g} exceeded epsilon "
                    f"{cfg.epsilon_stability} at t={state.t:.6g}",
                    t=state.t,
                    ratio=ratio,
                )
            last = i == n_steps - 1
            if last or (state.step_index % cfg.output_stride == 0):
                state = emit(state, self._q_u_for_diag(state.g))
        return state

    def _q_u_for_diag(self, g: VelocityField) -> VelocityField | None:
        if self._rhs_override is not None:
            return None
        return VelocityField(self.grid, self.q_u_values(g.values))

    def describe(self, g0: VelocityField) -> dict:
        """Step-size report: dt, stiffness estimate and their product."""
        m0 = weighted_moment(g0, 0.0)
        lip = rhs_lipschitz_scale(self.cfg, max(m0, 1e-300))
        dt = self.cfg.dt if self.cfg.dt is not None else default_dt(self.cfg, g0)
        return {
            "dt": dt,
            "rhs_lipschitz_scale": lip,
            "dt_times_scale": dt * lip,
            "table_checksum": self.workspace.table.checksum,
        }


def bimaxwellian_field(
    grid: GridSpec, rho0: float, shift, T_component: float
) -> VelocityField:
    """Symmetric two-beam initial datum: mean 0, mass rho0, beams at +-shift."""
    shift = np.asarray(shift, dtype=float)
    half = MaxwellianSpec(rho0 / 2.0, tuple(shift), T_component)
    other = MaxwellianSpec(rho0 / 2.0, tuple(-shift), T_component)
    return VelocityField(
        grid, maxwellian_field(half, grid).values + maxwellian_field(other, grid).values
    )


def perturbed_maxwellian_field(
    grid: GridSpec, rho0: float, T0: float, amplitude: float, seed: int
) -> VelocityField:
    """Maxwellian times (1 + smooth random perturbation); reproducible by seed."""
    rng = np.random.default_rng(seed)
    base = maxwellian_field(MaxwellianSpec(rho0, (0.0, 0.0, 0.0), T0), grid)
    n = grid.n_modes
    coeffs = np.zeros((n, n, n), dtype=np.complex128)
    half = n // 2
    kmax = 2
    for kx in range(-kmax, kmax + 1):
        for ky in range(-kmax, kmax + 1):
            for kz in range(-kmax, kmax + 1):
                if kx == ky == kz == 0:
                    continue
                c = rng.standard_normal() + 1j * rng.standard_normal()
                coeffs[kx + half, ky + half, kz + half] = c
    # hermitian symmetrization keeps the sample real
    flip = coeffs[::-1, ::-1, ::-1]
    flipped = np.roll(flip, 1, axis=(0, 1, 2))
    coeffs = 0.5 * (coeffs + np.conj(flipped))
    bump = inverse_transform(SpectralField(grid, coeffs)).values
    bump = bump / max(np.abs(bump).max(), 1e-300)
    return VelocityField(grid, base.values * (1.0 + amplitude * bump))


def maxwellian_initial(grid: GridSpec, rho0: float, V0, T0: float) -> VelocityField:
    return maxwellian_field(MaxwellianSpec(rho0, tuple(V0), T0), grid)
