"""Validated Taylor integration of quadratic fields with first-order variations.

A step of size ``h`` has two stages.

1. Rough enclosure: a box ``Z`` with ``X + [0,h] f(Z) ⊆ Z``, which contains
   every trajectory starting in ``X`` on ``[0, h]``.  The same is done for the
   variational equation, giving ``W`` with ``I + [0,h] Df(Z) W ⊆ W``.
2. Taylor step: jets of order ``p`` at the centre and over ``X``, with the
   Lagrange remainder taken from the jets over ``Z`` (and ``W``).

Sets are kept in Lohner form ``c + B r`` with ``B`` refreshed by a QR
factorization of the step's linear part; the derivative is ``Vc + B Rv``.
Everything runs on the parameter-extended field, so the returned derivative
includes the column ``∂Φ/∂θ``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .interval import Interval, fast_mul, fast_sum
from .model import LocalChart, QuadraticField

__all__ = [
    "IntegratorConfig",
    "IntegrationError",
    "FlowEnclosure",
    "TaylorKernel",
    "a_priori_enclosure",
    "step",
    "flow",
    "monitor_stays_in",
    "export_trajectory_csv",
]

_DOWN = -np.inf
_UP = np.inf
_GRID = 2.0**-20  # step sizes live on this grid so that times add up exactly


class IntegrationError(RuntimeError):
    """The integrator could not produce an enclosure."""


@dataclass(frozen=True)
class IntegratorConfig:
    order: int = 15
    h_init: float = 0.05
    h_min: float = 1e-6
    tol: float = 1e-16
    max_steps: int = 200_000
    wrapping_control: str = "qr"
    blowup: float = 1e3

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("order must be at least 2")
        if not (0 < self.h_min <= self.h_init):
            raise ValueError("need 0 < h_min <= h_init")
        if self.tol <= 0 or self.blowup <= 0:
            raise ValueError("tolerances must be positive")
        if self.wrapping_control not in ("qr", "none"):
            raise ValueError("wrapping_control is 'qr' or 'none'")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("order", "h_init", "h_min", "tol", "max_steps", "wrapping_control", "blowup")}


# -- fast interval helpers on (lo, hi) arrays ---------------------------------------------


def _fadd(a, b):
    return np.nextafter(a[0] + b[0], _DOWN), np.nextafter(a[1] + b[1], _UP)


def _fsub(a, b):
    return np.nextafter(a[0] - b[1], _DOWN), np.nextafter(a[1] - b[0], _UP)


def _fmm(a, b):
    """Interval matrix product ``(..., n, k) @ (..., k, m)``."""
    lo, hi = fast_mul(a[0][..., :, :, None], a[1][..., :, :, None], b[0][..., None, :, :], b[1][..., None, :, :])
    return fast_sum(lo, hi, -2)


def _fmv(a, v):
    lo, hi = fast_mul(a[0], a[1], v[0][..., None, :], v[1][..., None, :])
    return fast_sum(lo, hi, -1)


def _point(x):
    x = np.asarray(x, dtype=float)
    return x, x


def _reciprocal(k: int):
    q = 1.0 / k
    f = Fraction(1, k)
    lo = q if Fraction(q) <= f else float(np.nextafter(q, _DOWN))
    hi = q if Fraction(q) >= f else float(np.nextafter(q, _UP))
    return lo, hi


def _hull_mid(lo, hi):
    return 0.5 * lo + 0.5 * hi


# -- Taylor jets of a quadratic field --------------------------------------------------------


class TaylorKernel:
    """Exact jet recurrences for ``x' = c + A x + Q(x, x)`` on interval arrays."""

    def __init__(self, field: QuadraticField):
        c, A, Q = field.autonomous()
        self.n = c.shape[0]
        self.static = tuple(field.static)
        self.c = (c.lo, c.hi)
        self.A = (A.lo, A.hi)
        mask = (Q.lo != 0) | (Q.hi != 0)
        pairs = sorted({(j, k) for (_, j, k) in zip(*np.nonzero(mask))})
        self.pj = np.array([p[0] for p in pairs], dtype=int)
        self.pk = np.array([p[1] for p in pairs], dtype=int)
        P = len(pairs)
        Qp_lo = np.zeros((self.n, max(P, 1)))
        Qp_hi = np.zeros((self.n, max(P, 1)))
        for idx, (j, k) in enumerate(pairs):
            Qp_lo[:, idx] = Q.lo[:, j, k]
            Qp_hi[:, idx] = Q.hi[:, j, k]
        self.Qp = (Qp_lo, Qp_hi)
        self.has_quad = P > 0
        K = Q + Interval._raw(np.swapaxes(Q.lo, 1, 2), np.swapaxes(Q.hi, 1, 2))
        self.K = (K.lo, K.hi)
        self.recip = [_reciprocal(k) for k in range(1, 64)]

    # field and Jacobian on a batch of boxes
    def field(self, x):
        lin = _fmv((self.A[0][None], self.A[1][None]), x) if x[0].ndim == 2 else _fmv(self.A, x)
        out = _fadd((np.broadcast_to(self.c[0], lin[0].shape), np.broadcast_to(self.c[1], lin[1].shape)), lin)
        if self.has_quad:
            sj = (x[0][..., self.pj], x[1][..., self.pj])
            sk = (x[0][..., self.pk], x[1][..., self.pk])
            s = fast_mul(sj[0], sj[1], sk[0], sk[1])
            q = fast_mul(self.Qp[0], self.Qp[1], s[0][..., None, :], s[1][..., None, :])
            out = _fadd(out, fast_sum(q[0], q[1], -1))
        return out

    def jacobian(self, x):
        lo, hi = fast_mul(self.K[0], self.K[1], x[0][..., None, None, :], x[1][..., None, None, :])
        kx = fast_sum(lo, hi, -1)
        return _fadd((np.broadcast_to(self.A[0], kx[0].shape), np.broadcast_to(self.A[1], kx[1].shape)), kx)

    def jets(self, x0, V0, order: int):
        """Taylor coefficients ``x[0..order]`` and ``V[0..order]``.

        ``x0`` has shape ``(b, n)`` and ``V0`` shape ``(b, n, n)``.
        """
        b, n = x0[0].shape
        K1 = order + 1
        xl = np.zeros((b, K1, n))
        xh = np.zeros((b, K1, n))
        xl[:, 0], xh[:, 0] = x0
        for k in range(order):
            if k == 0:
                lin = _fmv((self.A[0][None], self.A[1][None]), (xl[:, 0], xh[:, 0]))
                acc = _fadd((np.broadcast_to(self.c[0], lin[0].shape), np.broadcast_to(self.c[1], lin[1].shape)), lin)
            else:
                acc = _fmv((self.A[0][None], self.A[1][None]), (xl[:, k], xh[:, k]))
            if self.has_quad:
                aj = (xl[:, : k + 1][:, :, self.pj], xh[:, : k + 1][:, :, self.pj])
                ak = (xl[:, k::-1][:, :, self.pk], xh[:, k::-1][:, :, self.pk])
                s = fast_mul(aj[0], aj[1], ak[0], ak[1])
                s = fast_sum(s[0], s[1], 1)  # (b, P)
                q = fast_mul(self.Qp[0][None], self.Qp[1][None], s[0][:, None, :], s[1][:, None, :])
                acc = _fadd(acc, fast_sum(q[0], q[1], -1))
            r = self.recip[k]
            lo, hi = fast_mul(acc[0], acc[1], r[0], r[1])
            xl[:, k + 1], xh[:, k + 1] = lo, hi
            for s_idx in self.static:
                xl[:, k + 1, s_idx] = 0.0
                xh[:, k + 1, s_idx] = 0.0
        # Taylor coefficients of Df along the solution
        dl, dh = fast_mul(self.K[0][None, None], self.K[1][None, None],
                          xl[:, :, None, None, :], xh[:, :, None, None, :])
        dl, dh = fast_sum(dl, dh, -1)
        dl[:, 0], dh[:, 0] = _fadd((dl[:, 0], dh[:, 0]), (self.A[0][None], self.A[1][None]))
        Vl = np.zeros((b, K1, n, n))
        Vh = np.zeros((b, K1, n, n))
        Vl[:, 0], Vh[:, 0] = V0
        for k in range(order):
            # Σ_l D[l] V[k-l]
            pl, ph = fast_mul(dl[:, : k + 1, :, :, None], dh[:, : k + 1, :, :, None],
                              Vl[:, k::-1, None, :, :], Vh[:, k::-1, None, :, :])
            acc = fast_sum(pl, ph, (1, 3))
            r = self.recip[k]
            Vl[:, k + 1], Vh[:, k + 1] = fast_mul(acc[0], acc[1], r[0], r[1])
            for s_idx in self.static:
                Vl[:, k + 1, s_idx, :] = 0.0
                Vh[:, k + 1, s_idx, :] = 0.0
        return (xl, xh), (Vl, Vh)


def _horner(coef, h: float, upto: int):
    """``Σ_{i ≤ upto} coef[i] h^i`` along axis 1 of a (lo, hi) pair."""
    lo = coef[0][:, upto].copy()
    hi = coef[1][:, upto].copy()
    for i in range(upto - 1, -1, -1):
        lo, hi = fast_mul(lo, hi, h, h)
        lo, hi = _fadd((lo, hi), (coef[0][:, i], coef[1][:, i]))
    return lo, hi


def _power(h: float, k: int):
    lo = hi = 1.0
    for _ in range(k):
        lo, hi = fast_mul(lo, hi, h, h)
    return float(lo), float(hi)


# -- rough enclosures -------------------------------------------------------------------------


def _apriori(kernel: TaylorKernel, X, h: float, tries: int = 12):
    fX = kernel.field(X)
    th = (0.0, h)
    step_lo, step_hi = fast_mul(fX[0], fX[1], th[0], th[1])
    Z = _fadd(X, (step_lo, step_hi))
    for _ in range(tries):
        w = Z[1] - Z[0]
        eps = 0.2 * w + 0.01 * float(np.max(w)) + 1e-300 + 1e-15 * np.maximum(np.abs(Z[0]), np.abs(Z[1]))
        for s in kernel.static:
            eps[s] = 0.0
        Z = (np.nextafter(Z[0] - eps, _DOWN), np.nextafter(Z[1] + eps, _UP))
        for s in kernel.static:
            Z[0][s], Z[1][s] = X[0][s], X[1][s]
        fZ = kernel.field(Z)
        inc = fast_mul(fZ[0], fZ[1], th[0], th[1])
        Zn = _fadd(X, inc)
        for s in kernel.static:
            Zn[0][s], Zn[1][s] = X[0][s], X[1][s]
        if np.all(Zn[0] >= Z[0]) and np.all(Zn[1] <= Z[1]):
            return Zn, Z
        Z = (np.minimum(Zn[0], Z[0]), np.maximum(Zn[1], Z[1]))
        if not (np.isfinite(Z[0]).all() and np.isfinite(Z[1]).all()):
            return None
    return None


def _apriori_variational(kernel: TaylorKernel, Z, h: float, tries: int = 12):
    n = kernel.n
    D = kernel.jacobian(Z)
    hD = fast_mul(D[0], D[1], 0.0, h)
    eye = _point(np.eye(n))
    W = _fadd(eye, hD)
    for _ in range(tries):
        w = W[1] - W[0]
        eps = 0.2 * w + 0.01 * float(np.max(w)) + 1e-15 * np.maximum(np.abs(W[0]), np.abs(W[1])) + 1e-300
        W = (np.nextafter(W[0] - eps, _DOWN), np.nextafter(W[1] + eps, _UP))
        Wn = _fadd(eye, _fmm(hD, W))
        for s in kernel.static:
            Wn[0][s], Wn[1][s] = eye[0][s], eye[1][s]
        if np.all(Wn[0] >= W[0]) and np.all(Wn[1] <= W[1]):
            return Wn
        W = (np.minimum(Wn[0], W[0]), np.maximum(Wn[1], W[1]))
        if not (np.isfinite(W[0]).all() and np.isfinite(W[1]).all()):
            return None
    return None


def a_priori_enclosure(spec: QuadraticField, box, h: float) -> Optional[Interval]:
    """A box ``Z`` with ``box + [0,h] f(Z) ⊆ Z``, or None if none was found.

    ``spec`` must be parameter free (use :meth:`QuadraticField.extended`).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    kernel = spec if isinstance(spec, TaylorKernel) else TaylorKernel(spec)
    box = Interval.coerce(box)
    res = _apriori(kernel, (box.lo, box.hi), h)
    if res is None:
        return None
    return Interval._raw(res[1][0], res[1][1])


# -- Lohner state --------------------------------------------------------------------------------


@dataclass
class LohnerSet:
    """``{c + B r}`` and derivative ``{Vc + B Rv}``; ``r``, ``Rv`` are (lo, hi)."""

    c: np.ndarray
    B: np.ndarray
    Binv: tuple
    r: tuple
    Vc: np.ndarray
    Rv: tuple

    @classmethod
    def from_box(cls, box: Interval) -> "LohnerSet":
        n = box.shape[0]
        c = box.mid()
        r = (np.nextafter(box.lo - c, _DOWN), np.nextafter(box.hi - c, _UP))
        I = np.eye(n)
        return cls(c, I, _point(I), r, I.copy(), _point(np.zeros((n, n))))

    @classmethod
    def from_frame(cls, box: Interval, chart: LocalChart) -> "LohnerSet":
        """``{C r + q0}`` for ``r`` in ``box``; trailing static coordinates
        of ``box`` are carried unchanged."""
        N = box.shape[0]
        k = chart.C.shape[0]
        B = np.eye(N)
        B[:k, :k] = chart.C
        Binv_lo, Binv_hi = np.eye(N), np.eye(N)
        Binv_lo[:k, :k] = chart.C_inv_enclosure.lo
        Binv_hi[:k, :k] = chart.C_inv_enclosure.hi
        q0 = np.zeros(N)
        q0[:k] = chart.q0
        m = box.mid()
        exact = _fadd(_fmv(_point(B), _point(m)), _point(q0))
        c = _hull_mid(*exact)
        err = _fsub(exact, _point(c))
        r = _fadd(_fsub((box.lo, box.hi), _point(m)), _fmv((Binv_lo, Binv_hi), err))
        I = np.eye(N)
        return cls(c, B, (Binv_lo, Binv_hi), r, I.copy(), _point(np.zeros((N, N))))

    def box(self):
        br = _fmv(_point(self.B), self.r)
        return _fadd(_point(self.c), br)

    def variational(self):
        bv = _fmm(_point(self.B), self.Rv)
        return _fadd(_point(self.Vc), bv)


def _verified_inverse(B: np.ndarray):
    from .interval import point_inverse

    inv = point_inverse(B)
    return inv.lo, inv.hi


def _lohner_update(S: LohnerSet, Yc, J, wrapping: str) -> LohnerSet:
    n = S.c.shape[0]
    A = _fmm(J, _point(S.B))
    c_new = _hull_mid(*Yc)
    delta = _fsub(Yc, _point(c_new))
    JV = _fmm(J, _point(S.Vc))
    Vc_new = _hull_mid(*JV)
    dV = _fsub(JV, _point(Vc_new))
    if wrapping == "qr":
        Am = _hull_mid(*A)
        rad = 0.5 * (S.r[1] - S.r[0])
        score = rad * np.linalg.norm(Am, axis=0)
        perm = np.argsort(-score, kind="stable")
        Qm, _ = np.linalg.qr(Am[:, perm])
        B_new = Qm
        Binv = _verified_inverse(B_new)
    else:
        B_new = np.eye(n)
        Binv = _point(np.eye(n))
    BA = _fmm(Binv, A)
    r_new = _fadd(_fmv(BA, S.r), _fmv(Binv, delta))
    Rv_new = _fadd(_fmm(BA, S.Rv), _fmm(Binv, dV))
    return LohnerSet(c_new, B_new, Binv, r_new, Vc_new, Rv_new)


@dataclass
class _StepOutput:
    state: LohnerSet
    Z: tuple
    remainder_width: float


def _taylor_step(kernel: TaylorKernel, S: LohnerSet, h: float, cfg: IntegratorConfig) -> Optional[_StepOutput]:
    n = kernel.n
    p = cfg.order
    X = S.box()
    rough = _apriori(kernel, X, h)
    if rough is None:
        return None
    _, Z = rough
    Zt = rough[0]
    W = _apriori_variational(kernel, Zt, h)
    if W is None:
        return None
    I = np.eye(n)
    c = S.c
    x0 = (np.stack([c, X[0], Zt[0]]), np.stack([c, X[1], Zt[1]]))
    V0 = (np.stack([I, I, W[0]]), np.stack([I, I, W[1]]))
    (xl, xh), (Vl, Vh) = kernel.jets(x0, V0, p + 1)
    hp = _power(h, p + 1)
    rem = fast_mul(xl[2, p + 1], xh[2, p + 1], hp[0], hp[1])
    Yc = _horner((xl[0:1], xh[0:1]), h, p)
    Yc = _fadd((Yc[0][0], Yc[1][0]), rem)
    Vrem = fast_mul(Vl[2, p + 1], Vh[2, p + 1], hp[0], hp[1])
    Jp = _horner((Vl[1:2], Vh[1:2]), h, p)
    J = _fadd((Jp[0][0], Jp[1][0]), Vrem)
    for s in kernel.static:
        J[0][s], J[1][s] = I[s], I[s]
        Yc[0][s], Yc[1][s] = c[s], c[s]
    width = float(np.max(rem[1] - rem[0]))
    new = _lohner_update(S, Yc, J, cfg.wrapping_control)
    return _StepOutput(new, Zt, width)


def step(spec: QuadraticField, box, variational_state, h: float, cfg: IntegratorConfig = IntegratorConfig()):
    """One validated step of size ``h`` on a parameter-free field.

    ``variational_state`` is an interval matrix enclosing the derivative of
    the flow so far (the identity at the start).  Returns the new box and the
    new derivative enclosure, or raises :class:`IntegrationError`.
    """
    kernel = TaylorKernel(spec)
    box = Interval.coerce(box)
    S = LohnerSet.from_box(box)
    V = Interval.coerce(variational_state)
    S.Vc = V.mid()
    S.Rv = (np.nextafter(V.lo - S.Vc, _DOWN), np.nextafter(V.hi - S.Vc, _UP))
    out = _taylor_step(kernel, S, h, cfg)
    if out is None:
        raise IntegrationError(f"no a priori enclosure for h={h!r}")
    bl, bh = out.state.box()
    vl, vh = out.state.variational()
    return Interval._raw(bl, bh), Interval._raw(vl, vh)


# -- flow ----------------------------------------------------------------------------------------


@dataclass
class FlowEnclosure:
    image: Interval
    variational: Interval
    time: float
    steps_taken: int
    max_step_width: float
    theta: Interval
    trajectory: list = field(default_factory=list, repr=False)  # (t0, t1, lo, hi) per step
    max_remainder: float = 0.0

    @property
    def extended_image(self) -> Interval:
        from .interval import concatenate

        return concatenate([self.image, self.theta.reshape(1)])


def _quantize(h: float) -> float:
    return np.floor(h / _GRID) * _GRID


def flow(spec: QuadraticField, box, T: float, cfg: IntegratorConfig = IntegratorConfig(), theta=None,
         record: bool = True, frame: Optional[LocalChart] = None) -> FlowEnclosure:
    """Enclose the time-``T`` map and its derivative over ``box × theta``.

    ``spec`` carries the parameter; integration runs on its extension, so
    ``variational`` is ``∂Φ_T/∂(p, θ)`` with shape ``n × (n+1)``.  A
    parameter-free field with static coordinates can be passed as well; then
    ``box`` already contains those coordinates and ``theta`` is ignored.

    With ``frame`` the initial set is ``{C r + q0 : r ∈ box}`` for the
    chart's ``C, q0``; it seeds the Lohner representation directly, so a box
    that is thin in chart coordinates is not wrapped into an axis-aligned box.
    """
    if not T > 0:
        raise ValueError("T must be positive; reverse the field for backward time")
    box = Interval.coerce(box)
    if spec.static and box.shape[0] == spec.state_dim:
        ext = spec
        full = box
        n = spec.state_dim
        th = Interval(0.0)
        param_col = False
    else:
        n = spec.state_dim
        if box.shape[0] != n:
            raise ValueError(f"box has dimension {box.shape[0]}, field has {n}")
        th = spec.param_range if theta is None else Interval.coerce(theta)
        ext = spec.extended()
        from .interval import concatenate

        full = concatenate([box, th.reshape(1)])
        param_col = True
    if not full.is_bounded:
        raise IntegrationError("initial box is unbounded")
    kernel = TaylorKernel(ext)
    if frame is not None:
        S = LohnerSet.from_frame(full, frame)
        full = S.box()
        full = Interval._raw(full[0], full[1])
    else:
        S = LohnerSet.from_box(full)
    t = 0.0
    h = _quantize(cfg.h_init)
    if h <= 0:
        raise ValueError("h_init below the step grid")
    steps = 0
    hmax = 0.0
    maxrem = 0.0
    traj = []
    while t < T:
        if steps >= cfg.max_steps:
            raise IntegrationError(f"max_steps={cfg.max_steps} exceeded at t={float(t)!r}")
        last = False
        hh = h
        if t + hh >= T:
            hh = T - t
            if Fraction(t) + Fraction(hh) != Fraction(T):
                raise IntegrationError("final step does not land on T exactly")
            last = True
        out = _taylor_step(kernel, S, hh, cfg)
        if out is None or out.remainder_width > cfg.tol * max(1.0, float(np.max(np.abs(S.c)))):
            h = _quantize(0.5 * min(h, hh))
            if h < cfg.h_min or h <= 0:
                why = "no a priori enclosure" if out is None else f"remainder width {out.remainder_width:.3e}"
                raise IntegrationError(f"step size fell below h_min at t={float(t)!r} ({why})")
            continue
        S = out.state
        if record:
            traj.append((t, t + hh, out.Z[0].copy(), out.Z[1].copy()))
        t = T if last else t + hh
        steps += 1
        hmax = max(hmax, hh)
        maxrem = max(maxrem, out.remainder_width)
        bl, bh = S.box()
        if not np.all(np.isfinite(bl)) or float(np.max(bh - bl)) > cfg.blowup:
            raise IntegrationError(f"enclosure blew up at t={float(t)!r}")
        if not last:
            h = min(_quantize(cfg.h_init), _quantize(1.2 * h)) if hh == h else h
    bl, bh = S.box()
    vl, vh = S.variational()
    for s in kernel.static:
        bl[s], bh[s] = full.lo[s], full.hi[s]
        vl[s], vh[s] = np.eye(ext.state_dim)[s], np.eye(ext.state_dim)[s]
    if param_col:
        image = Interval._raw(bl[:n], bh[:n])
        var = Interval._raw(vl[:n, :], vh[:n, :])
    else:
        image = Interval._raw(bl, bh)
        var = Interval._raw(vl, vh)
    return FlowEnclosure(image, var, float(T), steps, hmax, th, traj, maxrem)


def monitor_stays_in(run: FlowEnclosure, region: Interval, chart: Optional[LocalChart] = None,
                     whole_trajectory: bool = False) -> bool:
    """True when the final image (or every recorded step box) lies in ``region``.

    ``chart`` maps the integration coordinates into the coordinates of
    ``region``.
    """
    region = Interval.coerce(region)
    n = region.shape[0]

    def inside(lo, hi):
        b = Interval._raw(lo[:n], hi[:n])
        if chart is not None:
            b = chart.to_local(b)
        return b.subset(region)

    if whole_trajectory:
        if not run.trajectory:
            return False
        return all(inside(lo, hi) for (_, _, lo, hi) in run.trajectory)
    return inside(run.image.lo, run.image.hi)


def export_trajectory_csv(run: FlowEnclosure, path, chart: Optional[LocalChart] = None) -> None:
    """Write per-step enclosures as ``t_lo, t_hi, x0_lo, x0_hi, ...``."""
    n = run.image.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_lo", "t_hi"] + [f"{s}{i}_{e}" for i in range(n) for s, e in (("x", "lo"), ("x", "hi"))])
        for t0, t1, lo, hi in run.trajectory:
            box = Interval._raw(lo[:n], hi[:n])
            if chart is not None:
                box = chart.to_local(box)
            row = [repr(float(t0)), repr(float(t1))]
            for i in range(n):
                row += [repr(float(box.lo[i])), repr(float(box.hi[i]))]
            w.writerow(row)
