"""Named verification suites shared by the CLI and the acceptance tests."""

import math
from dataclasses import dataclass

import numpy as np

from .collision import (
    CutoffFunction,
    make_workspace,
    q_direct_oracle,
    q_hat,
    q_hat_reference,
    q_unconserved,
)
from .conserve import build_conservation
from .diagnostics import MaxwellianSpec, maxwellian_field
from .dynamics import LandauSolver, SolverConfig, bimaxwellian_field
from .lattice import GridSpec, VelocityField, choose_domain, forward_transform, quadrature
from .persist import read_diagnostics_csv
from .weights import default_params


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str


# -- analysis helpers ------------------------------------------------------


def relaxation_half_life(t: np.ndarray, dist: np.ndarray):
    """Half-life from a log-linear fit of the decaying distance curve."""
    ok = dist > 0
    if np.count_nonzero(ok) < 2:
        return None
    tt, dd = t[ok], np.log(dist[ok])
    slope = np.polyfit(tt, dd, 1)[0]
    if slope >= 0:
        return None
    return math.log(2.0) / (-slope)


def entropy_violations(H: np.ndarray, slack: float = 1e-8) -> int:
    return int(np.count_nonzero(np.diff(H) > slack))


def moment_drift(csv_path) -> float:
    """Largest relative drift of mass, momentum and energy across a run."""
    _, cols = read_diagnostics_csv(csv_path)
    return moment_drift_arrays(cols)


def moment_drift_arrays(cols) -> float:
    """Drift from diagnostics columns; momentum is scaled by the thermal momentum."""
    rho = cols["rho"]
    e = 3.0 * rho * cols["temperature_raw"]
    drifts = [np.abs(rho - rho[0]).max() / abs(rho[0]),
              np.abs(e - e[0]).max() / abs(e[0])]
    p_scale = abs(rho[0]) * math.sqrt(max(e[0] / max(rho[0], 1e-300), 1e-300))
    for k in ("vx", "vy", "vz"):
        pi = rho * cols[k]
        drifts.append(np.abs(pi - pi[0]).max() / max(p_scale, abs(pi[0]), 1e-300))
    return float(max(drifts))


# -- suites ------------------------------------------------------------------


def _oracle_suite(seed: int = 0):
    results = []
    rng = np.random.default_rng(seed)

    # decomposition equivalence against the brute-force double sum at N = 8
    grid = GridSpec(8, 5.0)
    ws = make_workspace(grid, lam=1.0)
    f = rng.standard_normal((8, 8, 8))
    pad = np.zeros((16, 16, 16))
    pad[4:12, 4:12, 4:12] = f
    F = forward_transform(VelocityField(ws.eval_grid, pad))
    qf = q_hat(F, ws)
    qb = q_hat_reference(F, ws)
    rel = float(np.abs(qf.coeffs - qb.coeffs).max() / np.abs(qb.coeffs).max())
    results.append(
        SuiteResult("fft_vs_double_sum_N8", rel <= 1e-10, f"rel error {rel:.3e} (tol 1e-10)")
    )

    # direct abar/cbar quadrature cross-check at N = 12
    grid12 = GridSpec(12, 4.4)
    ws12 = make_workspace(grid12, lam=1.0)
    g12 = bimaxwellian_field(grid12, 1.0, (0.7, 0.0, 0.0), 0.85)
    qu = q_unconserved(g12, CutoffFunction(), ws12)
    qd = q_direct_oracle(g12, default_params(grid12, 1.0))
    rel12 = float(
        np.sqrt(np.sum((qu.values - qd.values) ** 2) / np.sum(qd.values**2))
    )
    results.append(
        SuiteResult("direct_quadrature_N12", rel12 <= 0.05, f"rel L2 {rel12:.4f} (tol 0.05)")
    )

    # weak-form first-moment defect, scale-relative
    lhs = quadrature(
        VelocityField(grid12, qu.values * grid12.v_mesh[0]), 0.0
    )
    scale = qu.l2_norm() * math.sqrt(
        np.sum(grid12.v_mesh[0] ** 2) * grid12.cell_volume
    )
    defect = abs(lhs) / scale
    results.append(
        SuiteResult("weak_form_momentum", defect <= 0.05, f"defect {defect:.3e} (tol 0.05)")
    )
    return results


def maxwellian_sweep(n_values=(8, 16, 32), lam: float = 1.0):
    """||Q_u(M_eq)||_2 and the conservation correction norm per resolution."""
    L = choose_domain(1.0, 1.0, 1.0, 1.0, 1e-8)
    rows = []
    for n in n_values:
        grid = GridSpec(n, L)
        ws = make_workspace(grid, lam=lam)
        M = maxwellian_field(MaxwellianSpec(1.0, (0.0, 0.0, 0.0), 1.0), grid)
        qu = q_unconserved(M, CutoffFunction(), ws)
        cons = build_conservation(grid)
        rows.append((n, qu.l2_norm(), cons.correction_norm(qu)))
    return L, rows


def _maxwellian_suite(seed: int = 0):
    L, rows = maxwellian_sweep()
    detail = "; ".join(f"N={n}: |Q_u|={q:.3e}, corr={c:.3e}" for n, q, c in rows)
    norms = [q for _, q, _ in rows]
    monotone = all(b < a for a, b in zip(norms, norms[1:]))
    return [
        SuiteResult(
            "equilibrium_annihilation",
            monotone,
            f"L_v={L}; {detail}; strictly decreasing: {monotone}",
        )
    ]


def _relaxation_suite(seed: int = 0):
    import tempfile
    from pathlib import Path

    from .persist import CsvSink

    cfg = SolverConfig(
        lam=1.0, n_modes=16, half_length=4.5, t_final=0.12, output_stride=5
    )
    g0 = bimaxwellian_field(cfg.grid(), 1.0, (1.0, 0.0, 0.0), 0.5)
    solver = LandauSolver(cfg)
    with tempfile.TemporaryDirectory() as tmp:
        csv_path = Path(tmp) / "diag.csv"
        sink = CsvSink(csv_path)
        final = solver.run(g0, sink)
        sink.close()
        _, cols = read_diagnostics_csv(csv_path)
    dist = cols["dist_to_eq"]
    ratio_ok = bool(np.all(cols["neg_ratio"] <= cfg.epsilon_stability))
    viol = entropy_violations(cols["entropy"])
    drift = moment_drift_arrays(cols)
    reduced = dist[-1] <= dist[0] / 10.0
    return [
        SuiteResult(
            "distance_decay",
            reduced,
            f"dist {dist[0]:.3e} -> {dist[-1]:.3e} over t={final.t:g}",
        ),
        SuiteResult("entropy_monotone", viol == 0, f"violations {viol}"),
        SuiteResult(
            "stability_ratio", ratio_ok, f"max ratio {cols['neg_ratio'].max():.3e}"
        ),
        SuiteResult("moment_drift", drift <= 1e-10, f"max drift {drift:.3e}"),
    ]


SUITES = {
    "oracle": _oracle_suite,
    "maxwellian": _maxwellian_suite,
    "relaxation": _relaxation_suite,
}
