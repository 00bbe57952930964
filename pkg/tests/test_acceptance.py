"""Acceptance criteria, one test each.

Every test records a one-line PASS/FAIL summary that is printed at the end
of the session, then asserts.  Criteria 1 to 4 and 7 use the printed
constants; 5 and 6 use the verifiable configuration, which shares the
chart, parameter range, R and T with it.
"""

import json
import time

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

import test_driver
import test_integrator
import test_interval
import test_linalg
import test_shooting
from conftest import ACCEPTANCE_LINES, PUBLISHED_CONFIG
from homoclinic.cli import main
from homoclinic.driver import run_pipeline
from homoclinic.interval import Interval
from homoclinic.manifolds import SplitBlock, check_cone_conditions, check_rate_conditions
from oracle import SplittingOracle

REFERENCE_BOX = Interval(np.array([3.9999144633, -0.0008521960, 0.0045450712]),
                     np.array([3.9999144654, -0.0008521939, 0.0045450733]))
LAMBDA_U = Interval(0.249988, 0.249991)
RE_S = Interval(-2.999911, -2.999908)
IM_S = Interval(15.999657, 15.999660)
SADDLE = Interval(-2.7500, -2.7498)
H_LEFT_MID, H_RIGHT_MID = 1.198e-7, -1.188e-7
H_PRIME = Interval(-36.12, -34.57)


def report(n, ok, detail):
    ACCEPTANCE_LINES[n] = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, ACCEPTANCE_LINES[n]


def fmt(x):
    return f"[{float(x.lo):.13g}, {float(x.hi):.13g}]"


def test_criterion_1_fixed_point(published_cfg):
    t0 = time.perf_counter()
    p = run_pipeline(published_cfg, upto="fixed_point")
    dt = time.perf_counter() - t0
    P = p.artifacts.get("fixed_point")
    ok = P is not None and REFERENCE_BOX.inflate(1e-8).contains(P) and dt < 1.0
    widths = None if P is None else P.width().max()
    report(1, ok, f"box within reference box +-1e-8, max width {widths:.2e}, {dt:.2f} s")


def test_criterion_2_eigenvalues(published_cfg):
    t0 = time.perf_counter()
    p = run_pipeline(published_cfg, upto="eigen")
    dt = time.perf_counter() - t0
    eig = p.artifacts["eigen"]
    real = [e for e in eig if e.is_real]
    cplx = [e for e in eig if not e.is_real]
    ok = (len(real) == 1 and len(cplx) == 1
          and LAMBDA_U.inflate(1e-5).contains(real[0].lambda_re)
          and RE_S.inflate(1e-4).contains(cplx[0].lambda_re)
          and IM_S.inflate(1e-4).contains(cplx[0].lambda_im)
          and p.stages["eigen"]["hyperbolic"] and dt < 1.0)
    report(2, ok, f"lambda_u {fmt(real[0].lambda_re)}, Re {fmt(cplx[0].lambda_re)}, "
                  f"Im {fmt(cplx[0].lambda_im)}, hyperbolic, {dt:.2f} s")


def test_criterion_3_saddle_quantity(published_cfg):
    p = run_pipeline(published_cfg, upto="eigen")
    sq = p.artifacts["saddle_quantity"]
    ok = float(sq.hi) < 0 and SADDLE.contains(sq)
    report(3, ok, f"saddle quantity {fmt(sq)}")


def test_criterion_4_printed_constants_give_local_certificates(published_cfg):
    cfg = published_cfg
    fl = cfg.field().in_chart(cfg.chart())
    fs = fl.reverse_time()
    t0 = time.perf_counter()
    certs = {
        "rate_u": check_rate_conditions(fl, SplitBlock.for_field(fl, cfg.R, cfg.theta), cfg.L_u, 3),
        "rate_s": check_rate_conditions(fs, SplitBlock.for_field(fs, cfg.R, cfg.theta), cfg.L_s, 3),
        "cone_u": check_cone_conditions(fl, SplitBlock.for_field(fl, cfg.R, cfg.theta), cfg.M_u, 3),
        "cone_s": check_cone_conditions(fs, SplitBlock.for_field(fs, cfg.R, cfg.theta), cfg.M_s, 3),
    }
    dt = time.perf_counter() - t0
    ok = all(c.ok and c.subdivision <= 3 for c in certs.values()) and dt < 10.0
    detail = ", ".join(f"{k} {c.verdict.value}" for k, c in certs.items())
    report(4, ok, f"{detail}, {dt:.1f} s")


def test_criterion_5_splitting_signs(proof_pipeline):
    res = proof_pipeline.artifacts["shooting"]
    hl, hr = res.h_left, res.h_right
    ok = (float(hl.lo) > 0 and float(hr.hi) < 0
          and float(hl.width()) <= 1e-6 and float(hr.width()) <= 1e-6
          and abs(float(hl.mid()) - H_LEFT_MID) <= 5e-8 and abs(float(hr.mid()) - H_RIGHT_MID) <= 5e-8)
    report(5, ok, f"h(G_l) {fmt(hl)}, h(G_r) {fmt(hr)}")


def test_criterion_6_derivative(proof_pipeline, proof_cfg):
    hp = proof_pipeline.artifacts["shooting"].h_prime
    c = proof_cfg
    oracle = SplittingOracle(c.q0, c.C, c.R, c.T, sign=float(c.time_direction), side=c.exit_side)
    fd = oracle.h_prime(float(c.theta.mid()))
    ok = float(hp.hi) < 0 and hp.overlaps(H_PRIME) and hp.contains(fd)
    report(6, ok, f"h' {fmt(hp)}, finite difference {fd:.6f}")


def test_criterion_7_prove_with_printed_constants(tmp_path):
    t0 = time.perf_counter()
    code = main(["prove", "--config", str(PUBLISHED_CONFIG), "--out", str(tmp_path)])
    dt = time.perf_counter() - t0
    cert = json.loads((tmp_path / "proof.cert").read_text())
    ok = code == 0 and cert["proved"] is True and dt < 300
    report(7, ok, f"verdict {cert['verdict']}, failed stage {cert['failed_stage']}, exit {code}, {dt:.1f} s")


OPS = test_interval.OPS


@settings(max_examples=10_000, deadline=None)
@given(st.sampled_from("+-*/"), test_interval.nested(), test_interval.nested(nonzero=True))
def containment_monotonicity(op, ab, cd):
    (a, a2), (b, b2) = ab, cd
    assert OPS[op](a, b).subset(OPS[op](a2, b2))


def test_criterion_8_property_suites(proof_pipeline):
    parts = {
        "containment monotonicity (1e4)": containment_monotonicity,
        "log-norm identity (1e3)": test_linalg.test_log_min_is_negated_log_norm,
        "harmonic oscillator": test_integrator.test_harmonic_oscillator_period,
        "linear flows": test_integrator.test_linear_image_contains_exact_solution,
        "refinement (10 cases)": test_integrator.test_refinement_containment,
        "mean-value containment": lambda: test_shooting.test_mean_value_containment(proof_pipeline),
        "tamper detection": lambda: test_driver.test_every_single_endpoint_flip_is_detected(proof_pipeline),
    }
    failed = []
    for name, fn in parts.items():
        try:
            fn()
        except AssertionError:
            failed.append(name)
    detail = "all suites hold" if not failed else "failing: " + ", ".join(failed)
    report(8, not failed, f"{len(parts) - len(failed)}/{len(parts)} suites, {detail}")
