"""Acceptance criteria at their stated tolerances.

Each test records a one-line measurement; the terminal summary (see
conftest) prints one PASS/FAIL line per criterion.  Run on its own with

    python3 -m pytest tests/test_acceptance.py -v
"""
import math

import numpy as np
import pytest

from habitat_waves import analysis
from habitat_waves.cli import main
from habitat_waves.config import RunConfig
from habitat_waves.frame_solver import steady_state_from_above
from habitat_waves.grid import Grid
from habitat_waves.growth import GrowthModel
from habitat_waves.kernels import ConvolutionOperator, gaussian
from habitat_waves.periodic import (PeriodicCoefficient, lambda_T, periodic_principal_eigenvalue,
                                    periodization_limit)
from habitat_waves.spectral import (characteristic_function, characteristic_roots, grid_gap,
                                    principal_eigenvalue_growthrate, principal_eigenvalue_operator,
                                    spreading_speed)

SQRT_E = math.exp(0.5)


@pytest.fixture
def record(record_property):
    def _record(title, detail):
        record_property("title", title)
        record_property("detail", detail)
    return _record


def test_c01_spreading_speed(record, kernel):
    import time
    t0 = time.perf_counter()
    c_star, mu_star = spreading_speed(kernel, 1.0)
    elapsed = time.perf_counter() - t0
    err_c, err_mu = abs(c_star - SQRT_E), abs(mu_star - 1.0)
    record("spreading speed c* = e^(1/2), mu* = 1",
           f"|dc*|={err_c:.2e} |dmu*|={err_mu:.2e} time={elapsed * 1e3:.1f} ms")
    assert err_c < 1e-8 and err_mu < 1e-8 and elapsed < 0.1


def test_c02_characteristic_roots(record, kernel):
    roots = characteristic_roots(0.0, 1.0, kernel, 0.0)
    exact = math.sqrt(2 * math.log(2))
    err = max(abs(roots.mu_plus - exact), abs(roots.mu_minus + exact))
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        c, q = rng.uniform(0, 3), rng.uniform(0.1, 3)
        lam = rng.uniform(-q + 0.05, 2.0)
        r = characteristic_roots(c, q, kernel, lam)
        for mu in (r.mu_minus, r.mu_plus):
            worst = max(worst, abs(characteristic_function(c, q, kernel, lam, mu)))
    record("roots +-sqrt(2 ln 2) and residuals", f"root error={err:.2e} max |g|={worst:.2e}")
    assert err < 1e-8 and worst < 1e-10


def test_c03_constant_coefficient_identities(record, kernel):
    grid = Grid(30.0, 601)
    op = ConvolutionOperator.build(kernel, grid.dx, grid.n)
    hom = GrowthModel(1.0, 1.0, 5.0, 1.0, transition="homogeneous")
    errs = []
    for c in (0.0, 0.5):
        errs.append(abs(principal_eigenvalue_operator(c, hom, grid, op).lambda_cl - 1.0))
        errs.append(abs(principal_eigenvalue_growthrate(c, hom, grid, op).value - 1.0))
    a0 = 0.3
    coef = PeriodicCoefficient.constant(a0, 20.0, 0.05)
    lam_p = periodic_principal_eigenvalue(coef, 0.5, kernel).lambda_p
    lam_t = lambda_T(coef, 0.5)[0]
    per = max(abs(lam_p - a0), abs(lam_t - (a0 - 1.0)))
    record("homogeneous lambda = r; constant a0: lambda_p = a0, lambda_T = a0 - 1",
           f"homogeneous err={max(errs):.2e} periodic err={per:.2e}")
    assert max(errs) < 1e-6 and per < 1e-8


def test_c04_cross_method_agreement(record, default_config):
    worst, where = 0.0, None
    for c in (0.0, 0.4, 0.8, 1.2):
        for L in (2.0, 5.0, 10.0, 20.0):
            growth, grid, op = analysis._instance(default_config, L)
            lo = principal_eigenvalue_operator(c, growth, grid, op).lambda_cl
            gr = principal_eigenvalue_growthrate(c, growth, grid, op).value
            if abs(lo - gr) > worst:
                worst, where = abs(lo - gr), (c, L)
    record("operator vs growth-rate lambda on 4x4 (c, L)", f"max gap={worst:.2e} at {where}")
    assert worst < 1e-3


def test_c05_periodization_squeeze(record, default_config):
    growth, grid, op = analysis._instance(default_config, 10.0)
    per = periodization_limit(0.5, growth, 44.0, 3, op)
    whole = principal_eigenvalue_operator(0.5, growth, grid, op).lambda_cl
    gap = abs(per.limit - whole)
    record("periodized lambda_p non-increasing and close to lambda(c, L)",
           f"values={[round(v, 8) for v in per.values]} max increase={per.max_increase:.1e} "
           f"|limit - lambda|={gap:.2e}")
    assert per.max_increase < 1e-8 and gap < 1e-3


def test_c06_sign_dichotomy(record, default_config):
    c = 1.1 * SQRT_E
    parts, ok = [], True
    for L in (5.0, 20.0, 50.0):
        chk = analysis.extinction_check(c, L, default_config)
        parts.append(f"L={L:g}: lambda={chk.lambda_cl:.4f} {chk.steady_kind} "
                     f"sup={chk.sup_final:.1e}@t={chk.t_end:.0f}")
        ok &= chk.passed
    record("c = 1.1 c*: lambda < 0, Trivial, decay from u = 1", "; ".join(parts))
    assert ok


def test_c07_threshold_consistency(record, default_config):
    parts, ok = [], True
    for frac in (0.25, 0.5, 0.75):
        res = analysis.threshold_consistency(frac * SQRT_E, default_config)
        parts.append(f"{frac}c*: L**={res.L_lambda:.5f} L*={res.L_steady:.5f} "
                     f"diff={res.difference:.1e} slack={res.grid_slack:.1e}")
        ok &= res.passed
    record("L** (lambda bisection) vs L* (steady-state bisection)", "; ".join(parts))
    assert ok


def test_c08_tail_bounds(record, default_config):
    growth, grid, op = analysis._instance(default_config, 15.0)
    steady = steady_state_from_above(0.5, op, growth, default_config.settings, grid)
    assert steady.positive
    eig = principal_eigenvalue_operator(0.5, growth, grid, op)
    audit = analysis.wave_tail_audit(steady.field, 0.5, growth, default_config.kernel, eigen=eig)
    worst = max(audit.supersolution_excess.values())
    record("tail slopes within the mu-+(0) bounds, Phi <= psi_tau, eigenfunction tails",
           f"slopes={tuple(round(s, 4) for s in audit.slopes)} bounds="
           f"{tuple(round(b, 4) for b in audit.bounds)} max(Phi - psi)={worst:.2e} "
           f"eigen ok={audit.eigen_slopes_passed}")
    assert audit.passed and len(audit.supersolution_excess) == 6


def test_c09_comparison_campaign(record, default_config):
    rep = analysis.comparison_campaign(0.5, 10.0, default_config, count=100)
    record("ordered pairs stay ordered", f"{rep.pairs} pairs, max violation={rep.max_violation:.1e}")
    assert rep.pairs == 100 and rep.max_violation < 1e-8


def test_c10_uniqueness(record, default_config):
    rep = analysis.uniqueness_audit(0.0, 20.0, default_config)
    record("three initial data, one steady state", f"gap={rep.gap:.1e} kinds={rep.kinds}")
    assert rep.passed and rep.gap < 1e-6


def test_c11_monotonicity_audits(record, default_config):
    c = 0.5
    bound = analysis.speed_bound(default_config, c)
    Ls = np.linspace(0.5, 20.0, 10)
    lams = [analysis.lambda_at(c, L, default_config) for L in Ls]
    drops = max(0.0, float(-np.diff(lams).min()))
    cells = [(c, L, lam) for L, lam in zip(Ls, lams)]
    for cc in (0.0, 1.2, 1.1 * SQRT_E):
        cells += [(cc, L, analysis.lambda_at(cc, L, default_config)) for L in (2.0, 10.0)]
    r, q = default_config.growth.r, default_config.growth.q
    bound_ok = all(lam <= analysis.speed_bound(default_config, cc) + 1e-12 for cc, _, lam in cells)
    range_ok = all(-q <= lam < r for _, _, lam in cells)
    record("lambda non-decreasing in L, below mu*(c* - c), inside [-q, r)",
           f"max decrease={drops:.1e} bound at c=0.5: {bound:.4f} vs max lambda={max(lams):.4f} "
           f"bound ok={bound_ok} range ok={range_ok}")
    assert drops < 1e-8 and bound_ok and range_ok


def test_c12_frame_equivalence(record, default_config):
    rep = analysis.frame_equivalence(0.5, 10.0, default_config, t=5.0)
    record("moving frame vs shifted fixed frame at t = 5",
           f"max gap={rep.max_gap:.2e} tolerance={rep.tolerance:.2e}")
    assert rep.passed


def test_c13_grid_convergence(record, default_config):
    growth, grid, op = analysis._instance(default_config, 10.0)
    lam_n, lam_2n, diff = grid_gap(0.5, growth, grid, op)
    record("lambda at n and 2n", f"lambda_n={lam_n:.8f} lambda_2n={lam_2n:.8f} diff={diff:.1e}")
    assert abs(diff) < 5e-4


def test_c14_sweep_determinism(record, tmp_path):
    import json
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 7, "spectral": {"cross_check": False},
                               "sweep": {"c": [0.4, 1.0, 1.8], "L": [1.0, 3.0, 8.0]}}))
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
        outs.append((out / "sweep.csv").read_bytes())
    rows = outs[0].decode().strip().splitlines()
    record("repeated sweep gives byte-identical CSV",
           f"identical={outs[0] == outs[1]} rows={len(rows) - 1}")
    assert outs[0] == outs[1] and len(rows) == 10


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
