import math

import numpy as np
import pytest

from habitat_waves import analysis
from habitat_waves.analysis import PhaseCell
from habitat_waves.config import RunConfig

SQRT_E = math.exp(0.5)


@pytest.fixture(scope="module")
def fast():
    return RunConfig.from_dict({"grid": {"x_max": 30.0, "n": 601},
                                "spectral": {"cross_check": False}})


@pytest.mark.parametrize("c, L, expected", [(0.0, 20.0, "Persistence"), (0.5, 10.0, "Persistence"),
                                            (1.1 * SQRT_E, 5.0, "Extinction")])
def test_classify_examples(fast, c, L, expected):
    cell = analysis.classify(c, L, fast)
    assert cell.classification == expected
    assert (cell.lambda_cl > 0) == (expected == "Persistence")
    assert cell.wall_time > 0 and cell.error is None


def test_classify_small_patch(fast):
    cell = analysis.classify(0.5 * SQRT_E, 0.01, fast)
    assert cell.classification in ("Extinction", "Indeterminate") and cell.lambda_cl <= 0


def test_classify_cross_check_flags_nothing_below_spreading_speed(fast):
    cell = analysis.classify(0.5, 5.0, fast, cross_check=True)
    assert cell.cross_gap < analysis.CROSS_FLAG and not cell.flags


def test_threshold_infinite_beyond_spreading_speed(fast):
    res = analysis.critical_patch_size(1.01 * SQRT_E, fast)
    assert res.L_crossing == math.inf and not res.finite and res.evaluations == 0
    with pytest.raises(ValueError):
        analysis.critical_patch_size(0.5, fast, l_bracket=(2.0, 1.0))


def test_threshold_monotone_in_speed(fast):
    a = analysis.critical_patch_size(0.5, fast, tol=1e-2)
    b = analysis.critical_patch_size(1.2, fast, tol=1e-2)
    assert a.finite and b.finite and a.L_crossing < b.L_crossing
    assert analysis.lambda_at(1.2, b.bracket[1], fast) > 0 > analysis.lambda_at(1.2, b.bracket[0], fast)


def test_uniqueness_identical_initials(fast):
    grid = fast.grid_for(fast.growth.with_L(10.0))
    u = np.full(grid.n, 2.0)
    rep = analysis.uniqueness_audit(0.0, 10.0, fast, initials=[u, u.copy()])
    assert rep.gap == 0 and rep.passed


def _cell(lam, kind, c=0.0, L=1.0, cls="Indeterminate"):
    return PhaseCell(c, L, lam, cls, 0.0, steady_kind=kind)


def test_equivalence_logic(fast):
    cells = [_cell(0.2, "Positive"), _cell(-0.2, "Trivial"), _cell(5e-5, "Trivial")]
    rep = analysis.equivalence_audit(None, None, fast, cells=cells)
    assert len(rep.disagreements) == 1 and rep.passed
    assert rep.agreement == pytest.approx(2 / 3)
    bad = analysis.equivalence_audit(None, None, fast, cells=cells + [_cell(0.3, "Trivial")])
    assert not bad.passed


def test_row_monotone():
    ok = [_cell(0, "", 0.5, L, k) for L, k in ((1, "Extinction"), (2, "Indeterminate"), (3, "Persistence"))]
    assert analysis.row_monotone(ok)
    bad = ok + [_cell(0, "", 0.5, 4, "Extinction")]
    assert not analysis.row_monotone(bad)


def test_sweep_single_cell_and_error_recording(fast, monkeypatch):
    cells = analysis.phase_sweep([0.0], [20.0], fast)
    assert len(cells) == 1 and cells[0].classification == "Persistence"

    def boom(*args, **kwargs):
        raise ValueError("forced failure")

    monkeypatch.setattr(analysis, "classify", boom)
    cells = analysis.phase_sweep([0.0, 0.5], [1.0], fast, workers=1)
    assert [c.error for c in cells] == ["ValueError: forced failure"] * 2
    assert all(math.isnan(c.lambda_cl) for c in cells)
    with pytest.raises(ValueError):
        analysis.phase_sweep([], [1.0], fast)


def test_speed_bound_and_horizon(fast):
    assert analysis.speed_bound(fast, SQRT_E) == pytest.approx(0.0, abs=1e-10)
    assert analysis.speed_bound(fast, 0.0) == pytest.approx(SQRT_E, rel=1e-10)
    near = analysis.extinction_horizon(1.1 * SQRT_E, 5.0, fast, -0.3)
    far = analysis.extinction_horizon(1.1 * SQRT_E, 50.0, fast, -0.3)
    assert fast.t_max <= near < far


def test_random_pairs_are_ordered(fast):
    grid = fast.grid_for()
    lower, upper = analysis.random_ordered_pairs(grid, 20, np.random.default_rng(1))
    assert lower.shape == upper.shape == (20, grid.n)
    assert np.all(lower <= upper) and np.all(lower >= 0) and np.all(upper <= 2 + 1e-12)


def test_frame_equivalence_small(fast):
    rep = analysis.frame_equivalence(0.5, 5.0, fast, t=2.0)
    assert rep.passed and rep.max_gap < rep.tolerance
