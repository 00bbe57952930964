"""Configuration, the five-stage proof pipeline, certificates and exports."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .integrator import IntegrationError, IntegratorConfig, export_trajectory_csv
from .interval import Interval, from_decimal
from .linalg import (
    EigenEnclosure,
    NewtonResult,
    VerificationError,
    enclose_spectrum,
    saddle_quantity,
    sign_of,
    verify_zero,
)
from .manifolds import (
    ConeCertificate,
    RateCertificate,
    SplitBlock,
    check_cone_conditions,
    check_isolating_block,
    check_rate_conditions,
    enclose_fixed_point,
    eval_graph,
    manifold_enclosure,
)
from .model import LocalChart, QuadraticField, lorenz84
from .shooting import ShootingResult, prove_homoclinic
from .verdict import Verdict

__all__ = [
    "ConfigError",
    "ProofConfig",
    "load_config",
    "parse_config",
    "Pipeline",
    "run_pipeline",
    "recheck_certificate",
    "RecheckReport",
    "export_figures",
    "STAGES",
]

STAGES = ("fixed_point", "eigen", "unstable", "stable", "cones", "shooting")
CERT_FORMAT = "homoclinic-certificate/1"


class ConfigError(ValueError):
    """Invalid or incomplete proof configuration."""


# -- configuration ------------------------------------------------------------------


def _dec(x, what: str) -> Decimal:
    if isinstance(x, Decimal):
        return x
    if isinstance(x, (int, str)):
        try:
            return Decimal(str(x))
        except Exception as exc:  # decimal.InvalidOperation
            raise ConfigError(f"{what}: not a decimal number: {x!r}") from exc
    if isinstance(x, float):
        return Decimal(repr(x))
    raise ConfigError(f"{what}: expected a number, got {type(x).__name__}")


def _canon(obj):
    """JSON-ready copy with decimals as their exact strings."""
    if isinstance(obj, dict):
        return {k: _canon(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canon(v) for v in obj]
    if isinstance(obj, Decimal):
        return str(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_canon(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class ProofConfig:
    """Parsed proof configuration.

    Field parameters ``a, b, F, G_l, G_r`` become outward-rounded intervals.
    The chart data ``q0, C`` and the design constants ``R, T, L_u, L_s, M_u,
    M_s`` are taken as the nearest binary64 numbers: they define the objects
    being certified rather than physical data.
    """

    raw: dict
    a: Interval
    b: Interval
    F: Interval
    G_l: Interval
    G_r: Interval
    q0: np.ndarray
    C: np.ndarray
    R: float
    T: float
    L_u: float
    L_s: float
    M_u: float
    M_s: float
    time_direction: int = 1
    exit_side: int = 1
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    subdivision: int = 3
    block_depth: int = 10
    out_dir: str = "out"
    certificate: str = "proof.cert"

    @property
    def theta(self) -> Interval:
        return self.G_l.hull(self.G_r)

    @property
    def config_hash(self) -> str:
        return sha256(canonical_json(self.raw))

    def chart(self) -> LocalChart:
        return LocalChart.from_arrays(self.q0, self.C)

    def field(self) -> QuadraticField:
        return lorenz84(self.a, self.b, self.F, self.theta, time_direction=self.time_direction)


def load_config(path) -> ProofConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text, parse_float=Decimal, parse_int=Decimal)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> ProofConfig:
    if not isinstance(raw, dict) or "model" not in raw:
        raise ConfigError("config needs a 'model' block")
    m = raw["model"]
    need = ["a", "b", "F", "G_l", "G_r", "q0", "C", "R", "T", "L_u", "L_s", "M_u", "M_s"]
    missing = [k for k in need if k not in m]
    if missing:
        raise ConfigError(f"model block is missing {missing}")
    iv = {k: from_decimal(_dec(m[k], k)) for k in ("a", "b", "F", "G_l", "G_r")}
    if not iv["G_l"].lo <= iv["G_r"].hi or _dec(m["G_l"], "G_l") > _dec(m["G_r"], "G_r"):
        raise ConfigError("parameter range is empty (G_l > G_r)")
    q0 = m["q0"]
    C = m["C"]
    if not (isinstance(q0, list) and len(q0) == 3):
        raise ConfigError("q0 must list 3 numbers")
    if not (isinstance(C, list) and len(C) == 3 and all(isinstance(r, list) and len(r) == 3 for r in C)):
        raise ConfigError("C must be a 3x3 list of rows")
    q0a = np.array([float(_dec(v, "q0")) for v in q0])
    Ca = np.array([[float(_dec(v, "C")) for v in r] for r in C])
    consts = {}
    for k in ("R", "T", "L_u", "L_s", "M_u", "M_s"):
        v = float(_dec(m[k], k))
        if not (v > 0 and np.isfinite(v)):
            raise ConfigError(f"{k} must be positive")
        consts[k] = v
    td = int(_dec(m.get("time_direction", 1), "time_direction"))
    side = int(_dec(m.get("exit_side", 1), "exit_side"))
    if td not in (1, -1) or side not in (1, -1):
        raise ConfigError("time_direction and exit_side must be +1 or -1")
    integ = raw.get("integrator", {})
    try:
        icfg = IntegratorConfig(
            order=int(_dec(integ.get("order", 15), "order")),
            h_init=float(_dec(integ.get("h_init", "0.05"), "h_init")),
            h_min=float(_dec(integ.get("h_min", "1e-6"), "h_min")),
            tol=float(_dec(integ.get("tol", "1e-16"), "tol")),
            max_steps=int(_dec(integ.get("max_steps", 200000), "max_steps")),
            wrapping_control=str(integ.get("wrapping_control", "qr")),
            blowup=float(_dec(integ.get("blowup", "1e3"), "blowup")),
        )
    except ValueError as exc:
        raise ConfigError(f"integrator block: {exc}") from exc
    ver = raw.get("verification", {})
    sub = int(_dec(ver.get("subdivision", 3), "subdivision"))
    depth = int(_dec(ver.get("block_depth", 10), "block_depth"))
    if sub < 0 or depth < 1:
        raise ConfigError("subdivision must be >= 0 and block_depth >= 1")
    out = raw.get("output", {})
    try:
        chart_ok = np.linalg.cond(Ca) < 1e12
    except np.linalg.LinAlgError:
        chart_ok = False
    if not chart_ok:
        raise ConfigError("chart matrix C is singular or badly conditioned")
    return ProofConfig(raw=_canon(raw), q0=q0a, C=Ca, time_direction=td, exit_side=side, integrator=icfg,
                       subdivision=sub, block_depth=depth, out_dir=str(out.get("dir", "out")),
                       certificate=str(out.get("certificate", "proof.cert")), **iv, **consts)


# -- serialization of intervals -------------------------------------------------------


def ser(x: Interval):
    """Nested ``[lo, hi]`` pairs of round-trip decimal strings."""
    x = Interval.coerce(x)
    if x.ndim == 0:
        return [repr(float(x.lo)), repr(float(x.hi))]
    return [ser(x[k]) for k in range(len(x))]


def deser(obj) -> Interval:
    arr = np.array(obj, dtype=object)
    lo = np.vectorize(float, otypes=[float])(arr[..., 0])
    hi = np.vectorize(float, otypes=[float])(arr[..., 1])
    return Interval._raw(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))


def _fl(x: float) -> str:
    return repr(float(x))


# -- pipeline ----------------------------------------------------------------------------


def _newton_dict(res: NewtonResult) -> dict:
    return {
        "verified": bool(res.verified),
        "domain": ser(res.domain),
        "image": ser(res.image_of_operator) if res.image_of_operator is not None else None,
        "enclosure": ser(res.enclosure),
        "x0": [_fl(v) for v in res.x0],
        "reason": res.reason,
    }


def _eigen_dict(e: EigenEnclosure) -> dict:
    return {
        "kind": e.kind,
        "lambda_re": ser(e.lambda_re),
        "lambda_im": ser(e.lambda_im),
        "vector_re": ser(e.vector_re),
        "vector_im": ser(e.vector_im),
        "fixed_index": int(e.fixed_index),
        "fixed_value": _fl(e.fixed_value),
        "newton": _newton_dict(e.newton) if e.newton is not None else None,
    }


def _rate_dict(r: RateCertificate, block_check) -> dict:
    return {
        "L": _fl(r.L), "mu1": ser(r.mu1), "mu2": ser(r.mu2), "xi": ser(r.xi),
        "isolating": bool(r.isolating), "rate_ok": bool(r.rate_ok), "contraction_C": ser(r.contraction_C),
        "subdivision": int(r.subdivision), "verdict": r.verdict.value, "block": block_check.as_dict(),
    }


def _cone_dict(c: ConeCertificate) -> dict:
    return {"M": _fl(c.M), "mu_M": ser(c.mu_M), "xi_M": ser(c.xi_M), "slope_bound": _fl(c.slope_bound),
            "ok": bool(c.ok), "subdivision": int(c.subdivision), "verdict": c.verdict.value}


@dataclass
class Pipeline:
    """Accumulates stage results; ``certificate()`` renders them."""

    cfg: ProofConfig
    stages: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    failed_stage: Optional[str] = None
    wall_time: float = 0.0
    artifacts: dict = field(default_factory=dict)
    log: Any = None

    def _say(self, msg: str):
        if self.log is not None:
            self.log(msg)

    def record(self, name: str, data: dict, verdict: Verdict) -> bool:
        data = dict(data)
        data["verdict"] = verdict.value
        self.stages[name] = data
        self.verdicts[name] = verdict
        self._say(f"[{name}] {verdict.value}")
        if verdict is not Verdict.VERIFIED and self.failed_stage is None:
            self.failed_stage = name
        return verdict is Verdict.VERIFIED

    @property
    def verdict(self) -> Verdict:
        vs = [self.verdicts.get(s, Verdict.UNDETERMINED) for s in STAGES]
        return Verdict.combine(*vs)

    # stage 1
    def fixed_point(self) -> bool:
        cfg = self.cfg
        f = cfg.field()
        th = cfg.theta
        res = verify_zero(lambda X: f.evaluate(X, th), lambda X: f.state_jacobian(X, th), cfg.q0)
        chart = cfg.chart()
        fl = f.in_chart(chart)
        loc = enclose_fixed_point(fl, th)
        data = {"original": _newton_dict(res), "local": _newton_dict(loc) if loc is not None else None}
        ok = bool(res.verified and loc is not None and loc.verified)
        if ok:
            back = chart.from_local(loc.enclosure)
            data["local_consistent"] = bool(back.overlaps(res.enclosure))
            ok = data["local_consistent"]
            self.artifacts["fixed_point"] = res.enclosure
            self.artifacts["fixed_point_local"] = loc.enclosure
        return self.record("fixed_point", data, Verdict.VERIFIED if ok else Verdict.UNDETERMINED)

    # stage 1b
    def eigen(self) -> bool:
        cfg = self.cfg
        f = cfg.field()
        P = self.artifacts["fixed_point"]
        J = f.state_jacobian(P, cfg.theta)
        try:
            eig = enclose_spectrum(J)
        except VerificationError as exc:
            return self.record("eigen", {"error": str(exc)}, Verdict.UNDETERMINED)
        count = sum(1 if e.is_real else 2 for e in eig)
        signs = [sign_of(e.lambda_re) for e in eig]
        complex_ok = all(e.is_real or sign_of(e.lambda_im) != 0 for e in eig)
        hyperbolic = bool(count == f.state_dim and all(s != 0 for s in signs) and complex_ok)
        n_unstable = sum((1 if e.is_real else 2) for e, s in zip(eig, signs) if s > 0)
        split_ok = n_unstable == f.unstable_dim
        data = {"jacobian": ser(J), "pairs": [_eigen_dict(e) for e in eig], "hyperbolic": hyperbolic,
                "unstable_count": n_unstable, "split_matches_field": bool(split_ok)}
        real_u = [e for e, s in zip(eig, signs) if e.is_real and s > 0]
        cplx_s = [e for e, s in zip(eig, signs) if not e.is_real and s < 0]
        if len(real_u) == 1 and len(cplx_s) == 1:
            sq = saddle_quantity(real_u[0].lambda_re, cplx_s[0].lambda_re)
            data["saddle_quantity"] = {"value": ser(sq), "sign": sign_of(sq),
                                       "definition": "lambda_u + Re lambda_s (standard saddle-focus quantity)"}
            self.artifacts["saddle_quantity"] = sq
        self.artifacts["eigen"] = eig
        ok = hyperbolic and split_ok
        return self.record("eigen", data, Verdict.VERIFIED if ok else Verdict.REFUTED if count == f.state_dim and not split_ok else Verdict.UNDETERMINED)

    def _local(self):
        f = self.cfg.field()
        chart = self.cfg.chart()
        fl = f.in_chart(chart)
        return f, chart, fl, fl.reverse_time()

    def _manifold(self, name: str, spec: QuadraticField, L: float) -> bool:
        cfg = self.cfg
        block = SplitBlock.for_field(spec, cfg.R, cfg.theta)
        bc = check_isolating_block(spec, block, max_depth=cfg.block_depth)
        rate = check_rate_conditions(spec, block, L, cfg.subdivision, isolating=bc.ok)
        inside = block.contains(self.artifacts["fixed_point_local"])
        data = _rate_dict(rate, bc)
        data["fixed_point_in_block"] = bool(inside)
        data["block_geometry"] = block.as_dict()
        v = Verdict.combine(bc.verdict, rate.verdict,
                            Verdict.VERIFIED if inside else Verdict.UNDETERMINED)
        self.artifacts[f"{name}_block"] = block
        self.artifacts[f"{name}_rate"] = rate
        return self.record(name, data, v)

    def unstable(self) -> bool:
        _, _, fl, _ = self._local()
        return self._manifold("unstable", fl, self.cfg.L_u)

    def stable(self) -> bool:
        _, _, _, fs = self._local()
        return self._manifold("stable", fs, self.cfg.L_s)

    def cones(self) -> bool:
        cfg = self.cfg
        _, _, fl, fs = self._local()
        cu = check_cone_conditions(fl, self.artifacts["unstable_block"], cfg.M_u, cfg.subdivision)
        cs = check_cone_conditions(fs, self.artifacts["stable_block"], cfg.M_s, cfg.subdivision)
        self.artifacts["cone_u"], self.artifacts["cone_s"] = cu, cs
        return self.record("cones", {"unstable": _cone_dict(cu), "stable": _cone_dict(cs)},
                           Verdict.combine(cu.verdict, cs.verdict))

    def shooting(self) -> bool:
        cfg = self.cfg
        f, chart, fl, fs = self._local()
        P = self.artifacts["fixed_point_local"]
        U = manifold_enclosure(fl, self.artifacts["unstable_block"], self.artifacts["unstable_rate"],
                               self.artifacts["cone_u"], P, "unstable")
        S = manifold_enclosure(fs, self.artifacts["stable_block"], self.artifacts["stable_rate"],
                               self.artifacts["cone_s"], P, "stable")
        self.artifacts["U"], self.artifacts["S"] = U, S
        try:
            res = prove_homoclinic(U, S, f, chart, cfg.T, cfg.integrator, cfg.G_l, cfg.G_r, side=cfg.exit_side)
        except IntegrationError as exc:
            return self.record("shooting", {"error": str(exc)}, Verdict.UNDETERMINED)
        self.artifacts["shooting"] = res
        data = {
            "theta_l": ser(res.theta_l), "theta_r": ser(res.theta_r),
            "h_left": ser(res.h_left) if res.h_left.is_bounded else None,
            "h_right": ser(res.h_right) if res.h_right.is_bounded else None,
            "h_prime": ser(res.h_prime) if res.h_prime.is_bounded else None,
            "h_full": ser(res.h_full) if res.h_full is not None else None,
            "stays_in_D": bool(res.stays_in_D), "existence": bool(res.existence),
            "uniqueness": bool(res.uniqueness), "orientation": res.orientation,
            "images": {k: ser(v) for k, v in res.images.items()},
            "exit_side": cfg.exit_side, "T": _fl(cfg.T),
            "steps": {k: s.run.steps_taken for k, s in res.shots.items()},
            "scope": res.scope,
        }
        return self.record("shooting", data, _shooting_verdict(res))

    def run(self, upto: str = "shooting") -> Verdict:
        t0 = time.perf_counter()
        for name in STAGES:
            ok = getattr(self, name)()
            if not ok or name == upto:
                break
        self.wall_time = time.perf_counter() - t0
        return self.verdict

    def certificate(self) -> dict:
        stages = {}
        for name in STAGES:
            if name in self.stages:
                body = self.stages[name]
                stages[name] = {"data": body, "digest": sha256(canonical_json(body))}
        overall = self.verdict
        return {
            "format": CERT_FORMAT,
            "endpoint_encoding": "shortest round-trip decimal of IEEE binary64",
            "tool_version": __version__,
            "config": self.cfg.raw,
            "config_hash": self.cfg.config_hash,
            "stages": stages,
            "failed_stage": self.failed_stage,
            "verdict": overall.value,
            "proved": overall is Verdict.VERIFIED,
            "wall_time": self.wall_time,
        }


def _shooting_verdict(res: ShootingResult) -> Verdict:
    if res.existence and res.uniqueness:
        return Verdict.VERIFIED
    if res.stays_in_D and res.h_left.is_bounded and res.h_right.is_bounded:
        sl, sr = sign_of(res.h_left), sign_of(res.h_right)
        if sl != 0 and sl == sr:
            return Verdict.REFUTED  # no sign change on this range
    return Verdict.UNDETERMINED


def run_pipeline(cfg: ProofConfig, upto: str = "shooting", log=None) -> Pipeline:
    p = Pipeline(cfg, log=log)
    p.run(upto)
    return p


def write_certificate(cert: dict, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(cert, indent=1, sort_keys=True) + "\n")


# -- recheck ----------------------------------------------------------------------------------


@dataclass
class RecheckReport:
    ok: bool
    problems: list

    def __bool__(self):
        return self.ok


def _iv_ok(obj) -> bool:
    try:
        x = deser(obj)
    except Exception:
        return False
    return bool(np.all(x.lo <= x.hi))


def _walk_intervals(obj, path=""):
    """Yield (path, pair) for every [lo, hi] string pair in a stage body."""
    if isinstance(obj, list) and len(obj) == 2 and all(isinstance(v, str) for v in obj):
        yield path, obj
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _walk_intervals(v, f"{path}[{i}]")
    elif isinstance(obj, dict):
        for k, v in obj.items():
            yield from _walk_intervals(v, f"{path}.{k}")


def _check_newton(d: dict) -> bool:
    if not d or not d["verified"] or d["image"] is None:
        return False
    X, N, E = deser(d["domain"]), deser(d["image"]), deser(d["enclosure"])
    x0 = np.array([float(v) for v in d["x0"]])
    return N.subset(X) and X.contains(E) and X.contains(x0)


def _stage_checks(name: str, d: dict) -> list[str]:
    """Re-derive a stage's verdict from its stored intervals."""
    bad = []
    claimed = d.get("verdict")
    if name == "fixed_point":
        ok = _check_newton(d.get("original")) and _check_newton(d.get("local")) and d.get("local_consistent", False)
        derived = "verified" if ok else "undetermined"
    elif name == "eigen":
        pairs = d.get("pairs", [])
        for p in pairs:
            if not _check_newton(p.get("newton")):
                bad.append(f"eigen: Newton containment fails for {p.get('kind')} pair")
        lam = [deser(p["lambda_re"]) for p in pairs]
        om = [deser(p["lambda_im"]) for p in pairs]
        count = sum(1 if p["kind"] == "real" else 2 for p in pairs)
        signs = [sign_of(x) for x in lam]
        hyper = count == len(d["jacobian"]) and all(s != 0 for s in signs) and all(
            p["kind"] == "real" or sign_of(w) != 0 for p, w in zip(pairs, om))
        if bool(hyper) != bool(d.get("hyperbolic")):
            bad.append("eigen: hyperbolicity flag does not follow from stored enclosures")
        if "saddle_quantity" in d:
            sq = deser(d["saddle_quantity"]["value"])
            if sign_of(sq) != d["saddle_quantity"]["sign"]:
                bad.append("eigen: saddle quantity sign mismatch")
            lu = [x for p, x, s in zip(pairs, lam, signs) if p["kind"] == "real" and s > 0]
            ls = [x for p, x, s in zip(pairs, lam, signs) if p["kind"] != "real" and s < 0]
            if len(lu) == 1 and len(ls) == 1 and not (lu[0] + ls[0]).subset(sq):
                bad.append("eigen: saddle quantity does not enclose the stored sum")
        derived = "verified" if hyper and d.get("split_matches_field") and not bad else claimed if bad else (
            "refuted" if count == len(d["jacobian"]) and not d.get("split_matches_field") else "undetermined")
    elif name in ("unstable", "stable"):
        mu1, mu2, xi = deser(d["mu1"]), deser(d["mu2"]), deser(d["xi"])
        flag = RateCertificate.rate_flag(mu1, mu2, xi)
        if flag != d["rate_ok"]:
            bad.append(f"{name}: rate_ok does not follow from mu1, mu2, xi")
        L = float(d["L"])
        C = deser(d["contraction_C"])
        R = float(d["block_geometry"]["R"])
        Cc = Interval(2.0 * R) * (Interval(1.0) + Interval(1.0) / Interval(L))
        if not C.same(Cc):
            bad.append(f"{name}: contraction constant mismatch")
        bv = Verdict(d["block"]["verdict"])
        if (bv is Verdict.VERIFIED) != d["isolating"]:
            bad.append(f"{name}: isolating flag mismatch")
        rv = RateCertificate.classify(mu1, mu2, xi)
        derived = Verdict.combine(bv, rv, Verdict.VERIFIED if d["fixed_point_in_block"] else Verdict.UNDETERMINED).value
    elif name == "cones":
        vs = []
        for side in ("unstable", "stable"):
            c = d[side]
            mu, xi = deser(c["mu_M"]), deser(c["xi_M"])
            if ConeCertificate.cone_flag(mu, xi) != c["ok"]:
                bad.append(f"cones: {side} ok flag does not follow from mu(M), xi(M)")
            if float(c["slope_bound"]) != 1.0 / float(c["M"]):
                bad.append(f"cones: {side} slope bound is not 1/M")
            vs.append(ConeCertificate.classify(mu, xi))
        derived = Verdict.combine(*vs).value
    elif name == "shooting":
        if d.get("h_left") is None or d.get("h_right") is None:
            derived = "undetermined"
        else:
            hl, hr = deser(d["h_left"]), deser(d["h_right"])
            hp = deser(d["h_prime"]) if d.get("h_prime") is not None else None
            ex, un, ori = ShootingResult.decide(hl, hr, hp, d["stays_in_D"])
            if (ex, un, ori) != (d["existence"], d["uniqueness"], d["orientation"]):
                bad.append("shooting: existence/uniqueness flags do not follow from h enclosures")
            fake = ShootingResult(deser(d["theta_l"]), deser(d["theta_r"]), hl, hr,
                                  hp if hp is not None else Interval.entire(()), d["stays_in_D"], ex, un, ori)
            derived = _shooting_verdict(fake).value
    else:
        derived = claimed
    if derived != claimed:
        bad.append(f"{name}: stored verdict {claimed!r} but stored intervals give {derived!r}")
    return bad


def recheck_certificate(path_or_cert, config_path=None) -> RecheckReport:
    """Re-derive every verdict from stored intervals and check digests."""
    problems = []
    if isinstance(path_or_cert, dict):
        cert = path_or_cert
    else:
        try:
            cert = json.loads(Path(path_or_cert).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            return RecheckReport(False, [f"cannot parse certificate: {exc}"])
    if cert.get("format") != CERT_FORMAT:
        problems.append("unknown certificate format")
    if sha256(canonical_json(cert.get("config", {}))) != cert.get("config_hash"):
        problems.append("config: hash does not match embedded configuration")
    if config_path is not None:
        try:
            other = load_config(config_path)
            if other.config_hash != cert.get("config_hash"):
                problems.append("config: certificate was produced from a different configuration")
        except ConfigError as exc:
            problems.append(f"config: {exc}")
    stages = cert.get("stages", {})
    verdicts = []
    for name in STAGES:
        if name not in stages:
            verdicts.append(Verdict.UNDETERMINED)
            continue
        st = stages[name]
        body = st.get("data", {})
        if sha256(canonical_json(body)) != st.get("digest"):
            problems.append(f"{name}: digest mismatch (stage data was modified)")
        for p, pair in _walk_intervals(body):
            if not _iv_ok(pair):
                problems.append(f"{name}: malformed interval at {p}")
        try:
            problems.extend(_stage_checks(name, body))
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"{name}: cannot recheck ({exc})")
        try:
            verdicts.append(Verdict(body.get("verdict")))
        except ValueError:
            problems.append(f"{name}: unknown verdict")
            verdicts.append(Verdict.UNDETERMINED)
    overall = Verdict.combine(*verdicts)
    if overall.value != cert.get("verdict"):
        problems.append(f"overall: stored verdict {cert.get('verdict')!r} but stages give {overall.value!r}")
    if bool(cert.get("proved")) != (overall is Verdict.VERIFIED):
        problems.append("overall: proved flag mismatch")
    ok = not problems and overall is Verdict.VERIFIED
    return RecheckReport(ok, problems)


# -- exports ------------------------------------------------------------------------------------


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def export_figures(pipe: Pipeline, out_dir, samples: int = 41) -> list[Path]:
    """Write CSV plot data; returns the files written (empty if nothing ran)."""
    out = Path(out_dir)
    files = []
    if "U" not in pipe.artifacts or "shooting" not in pipe.artifacts:
        return files
    out.mkdir(parents=True, exist_ok=True)
    U, S = pipe.artifacts["U"], pipe.artifacts["S"]
    res: ShootingResult = pipe.artifacts["shooting"]
    chart = pipe.cfg.chart()
    R = U.block.R
    xs = np.linspace(-R, R, samples)
    for tag, th in (("G_l", pipe.cfg.G_l), ("G_r", pipe.cfg.G_r)):
        rows = []
        for x in xs:
            g = eval_graph(U, Interval(np.array([x])), th)
            rows.append([_fl(x)] + [_fl(v) for k in range(g.shape[0]) for v in (g.lo[k], g.hi[k])])
        p = out / f"unstable_manifold_{tag}.csv"
        _write_rows(p, ["x", "y1_lo", "y1_hi", "y2_lo", "y2_hi"], rows)
        files.append(p)
    # stable graph along y1 through each image's y2
    for tag, key in (("G_l", "left"), ("G_r", "right")):
        img = res.images[key]
        y2 = float(img.mid()[S.base_idx[1]])
        rows = []
        for y1 in xs:
            arg = Interval(np.array([y1, y2]))
            if float(np.hypot(y1, y2)) >= R:
                continue
            g = eval_graph(S, arg, res.theta_l if key == "left" else res.theta_r)
            rows.append([_fl(y1), _fl(y2), _fl(g.lo[0]), _fl(g.hi[0])])
        p = out / f"stable_manifold_{tag}.csv"
        _write_rows(p, ["y1", "y2", "x_lo", "x_hi"], rows)
        files.append(p)
    rows = []
    for key in ("left", "right"):
        img = res.images[key]
        th = res.theta_l if key == "left" else res.theta_r
        w = eval_graph(S, img[S.base_idx], th)
        xi = img[S.graph_idx]
        rows.append([key] + [_fl(v) for v in (img.lo[S.base_idx[0]], img.hi[S.base_idx[0]],
                                               img.lo[S.base_idx[1]], img.hi[S.base_idx[1]],
                                               xi.lo[0], xi.hi[0], w.lo[0], w.hi[0])])
    p = out / "stable_manifold_at_images.csv"
    _write_rows(p, ["run", "y1_lo", "y1_hi", "y2_lo", "y2_hi", "x_lo", "x_hi", "ws_lo", "ws_hi"], rows)
    files.append(p)
    rows = []
    for key, img in res.images.items():
        rows.append([key] + [_fl(v) for k in range(img.shape[0]) for v in (img.lo[k], img.hi[k])])
    p = out / "image_points.csv"
    _write_rows(p, ["run", "x_lo", "x_hi", "y1_lo", "y1_hi", "y2_lo", "y2_hi"], rows)
    files.append(p)
    for key, shot in res.shots.items():
        p = out / f"trajectory_{key}.csv"
        export_trajectory_csv(shot.run, p)
        files.append(p)
    return files
