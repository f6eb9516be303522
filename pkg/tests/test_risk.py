import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from rcp1 import risk
from rcp1.certificates import Norm, RiskBounds, SmoothingSpec, ThreatModel, confidence_upper
from rcp1.errors import DomainError, ParseError, ShapeError

UNIT = RiskBounds(0.0, 1.0)
GRID = risk.default_grid(64)
ALPHA_ROB = 0.10090117971236110409  # Phi(Phi^-1(0.15) - 0.24), mpmath
G = SmoothingSpec.gaussian(0.25)


def test_default_grid():
    g = risk.default_grid()
    assert g.size == 512 and g[0] == 0.0 and g[-1] == 1.0


def test_single_example_at_upper_bound():  # [TRIVIAL]
    losses = np.ones((1, GRID.size))
    assert risk.crc_lambda(losses, UNIT, 0.5, GRID).unsatisfiable
    res = risk.crc_lambda(losses, UNIT, 1.0, GRID)
    assert not res.unsatisfiable and res.lam == GRID[0]


def test_zero_losses_pick_grid_minimum():  # [DERIVED]
    res = risk.crc_lambda(np.zeros((9, GRID.size)), UNIT, 0.15, GRID)
    assert res.lam == GRID[0] and res.index == 0


def test_alpha_equal_to_upper_bound():  # [TRIVIAL]
    losses = np.tile(np.linspace(1, 0, GRID.size), (5, 1))
    assert risk.crc_lambda(losses, UNIT, 1.0, GRID).lam == GRID[0]


def test_crc_picks_first_feasible_lambda():
    # loss 1 until lam >= 0.5, then 0; with n=19 the bound (0 + 1)/20 holds only
    # once every example is at 0
    losses = np.tile((GRID < 0.5).astype(float), (19, 1))
    res = risk.crc_lambda(losses, UNIT, 0.1, GRID)
    assert res.lam == GRID[GRID >= 0.5][0]


def test_crc_errors():
    with pytest.raises(DomainError):
        risk.crc_lambda(np.zeros((3, GRID.size)), UNIT, 1.5, GRID)
    bad = np.zeros((3, GRID.size))
    bad[2, 10] = 0.5
    with pytest.raises(ValueError, match="example 2"):
        risk.crc_lambda(bad, UNIT, 0.1, GRID)
    with pytest.raises(ShapeError):
        risk.crc_lambda(np.zeros((3, 5)), UNIT, 0.1, GRID)


def test_deflated_level_example():  # [DERIVED]
    assert risk.deflated_level(0.15, UNIT, G, 0.06) == pytest.approx(ALPHA_ROB, abs=1e-9)


def test_deflated_level_is_conservative():
    t = risk.deflated_level(0.15, UNIT, G, 0.06)
    assert confidence_upper(t, UNIT, G, 0.06) <= 0.15


@given(st.floats(0.01, 0.99), st.floats(0.0, 0.5))
def test_deflated_level_inverts_certificate(alpha, r):
    t = risk.deflated_level(alpha, UNIT, G, r)
    assert 0.0 <= t <= alpha
    assert confidence_upper(t, UNIT, G, r) <= alpha + 1e-15


def test_robust_zero_radius_matches_plain():  # [TRIVIAL]
    rng = np.random.default_rng(0)
    losses = np.sort(rng.uniform(size=(30, GRID.size)), axis=1)[:, ::-1]
    a = risk.crc_lambda(losses, UNIT, 0.3, GRID)
    b = risk.robust_crc_lambda(losses, UNIT, 0.3, G, ThreatModel(Norm.L2, 0.0), GRID)
    assert (a.lam, a.index) == (b.lam, b.index)


def test_robust_large_radius_unsatisfiable():  # [TRIVIAL]
    losses = np.zeros((9, GRID.size))
    res = risk.robust_crc_lambda(losses, UNIT, 0.15, G, ThreatModel(Norm.L2, 2.0), GRID)
    assert res.unsatisfiable and res.lam == GRID[-1]
    assert res.target < 0.1


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.3))
def test_robust_dominates_plain(seed, r):
    rng = np.random.default_rng(seed)
    losses = np.sort(rng.uniform(size=(20, GRID.size)), axis=1)[:, ::-1]
    a = risk.crc_lambda(losses, UNIT, 0.5, GRID)
    b = risk.robust_crc_lambda(losses, UNIT, 0.5, G, ThreatModel(Norm.L2, r), GRID)
    assert b.lam >= a.lam


# ---------------------------------------------------------------------------
# masks and FNR


def test_fnr_examples():
    truth = np.array([[1, 1], [1, 1]], dtype=bool)
    assert risk.fnr_loss(truth, truth) == 0.0                     # [TRIVIAL]
    assert risk.fnr_loss(np.zeros_like(truth), truth) == 1.0      # [TRIVIAL]
    mask = truth.copy()
    mask[1, 1] = False
    assert risk.fnr_loss(mask, truth) == 0.25                     # [DERIVED]


def test_fnr_empty_truth_is_zero():
    assert risk.fnr_loss(np.zeros(4, bool), np.zeros(4, bool)) == 0.0


def test_fnr_shape_mismatch():
    with pytest.raises(ShapeError):
        risk.fnr_loss(np.zeros(3, bool), np.zeros(4, bool))


def test_threshold_mask_examples():
    s = np.array([0.3, 0.9, 1.0])
    assert risk.threshold_mask(s, 1.0).all()                          # [TRIVIAL]
    assert risk.threshold_mask(s, 0.0).tolist() == [False, False, True]
    assert risk.threshold_mask([0.3, 0.9], 0.2).tolist() == [False, True]  # [DERIVED]


maps = hnp.arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 6)),
                  elements=st.floats(0, 1))


@given(maps, st.integers(0, 2**32 - 1))
def test_fnr_curve_matches_direct(scores, seed):
    truth = np.random.default_rng(seed).uniform(size=scores.shape) < 0.5
    curve = risk.fnr_curve(scores, truth, GRID)
    direct = [risk.fnr_loss(risk.threshold_mask(scores, lam), truth) for lam in GRID]
    assert np.allclose(curve, direct, atol=1e-15)
    assert np.all(np.diff(curve) <= 0)


@given(maps, st.floats(0, 1), st.floats(0, 1))
def test_mask_grows_with_lambda(scores, l1, l2):
    lo, hi = sorted((l1, l2))
    assert np.all(risk.threshold_mask(scores, lo) <= risk.threshold_mask(scores, hi))
    assert risk.mask_proportion(scores, lo) <= risk.mask_proportion(scores, hi)


def test_grid_io(tmp_path):
    grid = np.array([[0.1, 0.2], [0.3, 1.0]])
    path = tmp_path / "g.csv"
    path.write_text("0.1,0.2\n0.3,1.0\n")
    assert np.array_equal(risk.read_grid(path), grid)
    risk.write_mask(grid > 0.25, tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text() == "0,0\n1,1\n"
    (tmp_path / "bad.csv").write_text("0.1,x\n")
    with pytest.raises(ParseError, match="row 1"):
        risk.read_grid(tmp_path / "bad.csv")
    (tmp_path / "ragged.csv").write_text("0.1,0.2\n0.3\n")
    with pytest.raises(ParseError):
        risk.read_grid(tmp_path / "ragged.csv")
