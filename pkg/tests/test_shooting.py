import numpy as np
import pytest

from homoclinic.interval import Interval
from homoclinic.shooting import OutsideBlockError, ShootingResult, prove_homoclinic, shoot, splitting_h
from oracle import SplittingOracle


@pytest.fixture(scope="module")
def oracle(proof_cfg):
    c = proof_cfg
    return SplittingOracle(c.q0, c.C, c.R, c.T, sign=float(c.time_direction), side=c.exit_side)


def args(pipe):
    cfg = pipe.cfg
    return (pipe.artifacts["U"], pipe.artifacts["S"], cfg.field(), cfg.chart(), cfg.T, cfg.integrator)


def test_endpoint_signs_and_widths(proof_pipeline):
    res = proof_pipeline.artifacts["shooting"]
    assert res.stays_in_D and res.existence and res.uniqueness
    assert float(res.h_left.lo) > 0 and float(res.h_right.hi) < 0
    assert res.orientation == "decreasing"
    assert float(res.h_left.width()) <= 1e-6 and float(res.h_right.width()) <= 1e-6


def test_mean_value_containment(proof_pipeline):
    res = proof_pipeline.artifacts["shooting"]
    diff = res.h_right - res.h_left
    mv = res.h_prime * (res.theta_r - res.theta_l)
    assert diff.overlaps(mv)
    # the whole-range enclosure covers both endpoint enclosures
    assert res.h_full.contains(res.h_left) and res.h_full.contains(res.h_right)


def test_floating_point_oracle_matches_endpoints(proof_pipeline, oracle):
    res = proof_pipeline.artifacts["shooting"]
    cfg = proof_pipeline.cfg
    for th, h in ((cfg.G_l, res.h_left), (cfg.G_r, res.h_right)):
        g = float(th.mid())
        assert abs(oracle.h(g) - float(h.mid())) <= float(h.width()) + 1e-10


def test_finite_difference_derivative_inside_enclosure(proof_pipeline, oracle):
    res = proof_pipeline.artifacts["shooting"]
    g = float(proof_pipeline.cfg.theta.mid())
    fd = [oracle.h_prime(g, d) for d in (1e-7, 5e-8, 2e-8)]
    assert max(fd) - min(fd) < 1e-3
    for v in fd:
        assert res.h_prime.contains(v)
    assert float(res.h_prime.hi) < 0
    # secant over the whole parameter range
    c = proof_pipeline.cfg
    gl, gr = float(c.G_l.mid()), float(c.G_r.mid())
    assert res.h_prime.contains((oracle.h(gr) - oracle.h(gl)) / (gr - gl))


def test_decide_flag_logic():
    pos, neg, straddle = Interval(1e-7, 2e-7), Interval(-2e-7, -1e-7), Interval(-1e-7, 1e-7)
    hp = Interval(-36.0, -35.0)
    assert ShootingResult.decide(pos, neg, hp, True) == (True, True, "decreasing")
    assert ShootingResult.decide(neg, pos, Interval(35.0, 36.0), True) == (True, True, "increasing")
    # a widened derivative keeps existence but loses uniqueness
    assert ShootingResult.decide(pos, neg, Interval(-1.0, 1.0), True) == (True, False, "decreasing")
    assert ShootingResult.decide(pos, neg, None, True) == (True, False, "decreasing")
    assert ShootingResult.decide(pos, pos, hp, True) == (False, False, "none")
    assert ShootingResult.decide(straddle, neg, hp, True) == (False, False, "none")
    # leaving the block voids the sign argument
    assert ShootingResult.decide(pos, neg, hp, False) == (False, False, "none")


def test_single_shot_matches_stored_result(proof_pipeline):
    res = proof_pipeline.artifacts["shooting"]
    cfg = proof_pipeline.cfg
    h = splitting_h(cfg.G_l, *args(proof_pipeline), side=cfg.exit_side)
    assert h.same(res.h_left)


def test_short_flight_leaves_block(proof_pipeline):
    U, S, f, chart, T, icfg = args(proof_pipeline)
    cfg = proof_pipeline.cfg
    shot = shoot(cfg.G_l, U, S, f, chart, 5.0, icfg, side=cfg.exit_side)
    assert not shot.in_block and shot.h is None
    with pytest.raises(OutsideBlockError):
        splitting_h(cfg.G_l, U, S, f, chart, 5.0, icfg, side=cfg.exit_side)


@pytest.mark.slow
def test_subrange_without_zero_has_no_existence(proof_pipeline):
    cfg = proof_pipeline.cfg
    lo = float(cfg.G_l.lo)
    right = Interval(lo + 1e-9)
    res = prove_homoclinic(*args(proof_pipeline), cfg.G_l, right, side=cfg.exit_side)
    assert res.stays_in_D and not res.existence and not res.uniqueness
    assert float(res.h_left.lo) > 0 and float(res.h_right.lo) > 0


def test_point_parameter_range_has_no_existence(proof_pipeline):
    cfg = proof_pipeline.cfg
    res = prove_homoclinic(*args(proof_pipeline), cfg.G_l, cfg.G_l, side=cfg.exit_side)
    assert res.h_left.same(res.h_right)
    assert not res.existence and res.orientation == "none"
    assert np.isfinite(float(res.h_prime.hi)) and float(res.h_prime.hi) < 0
