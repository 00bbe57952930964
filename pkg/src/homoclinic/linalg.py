"""Verified linear algebra: interval Newton, eigenpair enclosures, log norms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .interval import (
    Interval,
    NotInvertibleError,
    add_up,
    add_down,
    concatenate,
    eye,
    mat_inverse,
    mat_mul,
    point_inverse,
    stack,
    zeros,
)

__all__ = [
    "NewtonResult",
    "EigenEnclosure",
    "VerificationError",
    "interval_newton",
    "verify_zero",
    "enclose_real_eigenpair",
    "enclose_complex_eigenpair",
    "enclose_spectrum",
    "log_norm",
    "log_min",
    "symmetric_part",
    "saddle_quantity",
    "sign_of",
]


class VerificationError(RuntimeError):
    """A verification step could not be completed."""


@dataclass
class NewtonResult:
    """Outcome of one interval Newton test on the box ``domain``.

    When ``verified`` holds, ``image_of_operator`` (the Newton image
    ``N(x0, domain)``) lies inside ``domain``, so ``domain`` contains exactly
    one zero, and that zero lies in ``enclosure``.
    """

    verified: bool
    enclosure: Interval
    image_of_operator: Optional[Interval]
    domain: Interval
    x0: np.ndarray
    reason: str = ""

    def recheck(self) -> bool:
        """Re-assert the stored containment ``N(x0, X) ⊆ X``."""
        if not self.verified or self.image_of_operator is None:
            return False
        return self.image_of_operator.subset(self.domain) and self.domain.contains(self.enclosure)


def interval_newton(
    f: Callable[[Interval], Interval],
    jac: Callable[[Interval], Interval],
    x0,
    X: Interval,
    refine: int = 0,
) -> NewtonResult:
    """Interval Newton test ``x0 - [Df(X)]^-1 f(x0) ⊆ X``.

    ``f`` is evaluated on the degenerate box ``x0`` and may return a
    nondegenerate enclosure (parameters given as intervals).  The inverse is
    applied after preconditioning with the inverse of ``mid(Df(X))``, which
    leaves the set ``{J^-1 f : J ∈ Df(X)}`` unchanged.

    With ``refine > 0`` the operator is re-applied on ``N ∩ X`` that many times
    to tighten the enclosure; the stored image and domain are from the first,
    verifying application.
    """
    x0 = np.asarray(x0, dtype=float)
    X = Interval.coerce(X)
    if not X.contains(x0):
        return NewtonResult(False, X, None, X, x0, "x0 not in X")
    if not X.is_bounded:
        return NewtonResult(False, X, None, X, x0, "unbounded domain")

    def apply(box, centre):
        J = jac(box)
        fx = f(Interval(centre))
        try:
            Y = np.linalg.inv(J.mid())
        except np.linalg.LinAlgError as exc:
            raise NotInvertibleError("singular midpoint Jacobian") from exc
        Yi = Interval(Y)
        inv = mat_inverse(mat_mul(Yi, J))
        return Interval(centre) - mat_mul(inv, mat_mul(Yi, fx))

    try:
        N = apply(X, x0)
    except NotInvertibleError as exc:
        return NewtonResult(False, X, None, X, x0, f"Jacobian enclosure not invertible: {exc}")
    if not N.subset(X):
        return NewtonResult(False, X, N, X, x0, "N(x0, X) is not contained in X")
    enc = N.intersect(X)
    for _ in range(refine):
        c = enc.mid()
        try:
            N2 = apply(enc, c)
        except NotInvertibleError:
            break
        if not N2.overlaps(enc):
            break
        new = N2.intersect(enc)
        if new.same(enc):
            break
        enc = new
    return NewtonResult(True, enc, N, X, x0)


def verify_zero(f, jac, x0, radius=None, max_tries: int = 12, refine: int = 3) -> NewtonResult:
    """Interval Newton with epsilon inflation around an approximate zero."""
    x0 = np.asarray(x0, dtype=float)
    scale = np.maximum(np.abs(x0), 1.0)
    r = np.full(x0.shape, 1e-12) * scale if radius is None else np.broadcast_to(radius, x0.shape).astype(float)
    X = Interval(x0 - r, x0 + r)
    last = None
    for _ in range(max_tries):
        res = interval_newton(f, jac, x0, X, refine=refine)
        if res.verified:
            return res
        last = res
        if res.image_of_operator is not None and res.image_of_operator.is_bounded:
            N = res.image_of_operator
            rad = np.maximum(np.abs(N.lo - x0), np.abs(N.hi - x0))
            r = np.maximum(2.0 * rad, 10.0 * r)
        else:
            r = 10.0 * r
        X = Interval(x0 - r, x0 + r)
    return last


# -- eigenpairs ----------------------------------------------------------------------


@dataclass
class EigenEnclosure:
    kind: str  # "real" or "complex"
    lambda_re: Interval
    lambda_im: Interval
    vector_re: Interval
    vector_im: Interval
    fixed_index: int
    fixed_value: float
    newton: Optional[NewtonResult] = field(default=None, repr=False)

    @property
    def is_real(self) -> bool:
        return self.kind == "real"


def _fixed_index(v: np.ndarray) -> int:
    return int(np.argmax(np.abs(v)))


def enclose_real_eigenpair(A, approx_value: float, approx_vector, fixed_index: Optional[int] = None) -> EigenEnclosure:
    """Enclose a real eigenpair of every matrix in ``A`` near ``approx``.

    Unknowns are ``λ`` and the eigenvector with coordinate ``fixed_index``
    pinned to 1.
    """
    A = Interval.coerce(A)
    n = A.shape[0]
    v = np.real(np.asarray(approx_vector, dtype=complex))
    k = _fixed_index(v) if fixed_index is None else int(fixed_index)
    v = v / v[k]
    free = [j for j in range(n) if j != k]

    def unpack(z: Interval):
        x = Interval(np.zeros(n)).set(free, z[1:]).set(k, Interval(1.0))
        return z[0], x

    def f(z):
        lam, x = unpack(z)
        return mat_mul(A, x) - lam * x

    def jac(z):
        lam, x = unpack(z)
        shifted = A - Interval(np.eye(n)) * lam
        cols = [-x] + [shifted[:, j] for j in free]
        return stack(cols, axis=1)

    z0 = np.concatenate([[float(np.real(approx_value))], v[free]])
    res = verify_zero(f, jac, z0)
    if res is None or not res.verified:
        raise VerificationError(f"real eigenpair near {approx_value!r}: {res.reason if res else 'no attempt'}")
    lam, x = unpack(res.enclosure)
    return EigenEnclosure("real", lam, Interval(0.0), x, zeros(n), k, 1.0, res)


def enclose_complex_eigenpair(A, approx_value: complex, approx_vector, fixed_index: Optional[int] = None) -> EigenEnclosure:
    """Enclose a complex eigenpair ``ρ + iω`` with eigenvector ``x_re + i x_im``.

    The eigenvector is scaled so that ``x_re[k] = 1`` and ``x_im[k] = 0``;
    the remaining ``2n`` real unknowns are solved by interval Newton.
    """
    A = Interval.coerce(A)
    n = A.shape[0]
    v = np.asarray(approx_vector, dtype=complex)
    k = _fixed_index(v) if fixed_index is None else int(fixed_index)
    v = v / v[k]
    free = [j for j in range(n) if j != k]
    m = len(free)
    I = Interval(np.eye(n))

    def unpack(z: Interval):
        rho, om = z[0], z[1]
        xr = Interval(np.zeros(n)).set(free, z[2:2 + m]).set(k, Interval(1.0))
        xi = Interval(np.zeros(n)).set(free, z[2 + m:])
        return rho, om, xr, xi

    def f(z):
        rho, om, xr, xi = unpack(z)
        re = mat_mul(A, xr) - rho * xr + om * xi
        im = mat_mul(A, xi) - rho * xi - om * xr
        return concatenate([re, im])

    def jac(z):
        rho, om, xr, xi = unpack(z)
        shifted = A - I * rho
        cols = [concatenate([-xr, -xi]), concatenate([xi, -xr])]
        for j in free:
            e = Interval(np.eye(n)[:, j])
            cols.append(concatenate([shifted[:, j], -(om * e)]))
        for j in free:
            e = Interval(np.eye(n)[:, j])
            cols.append(concatenate([om * e, shifted[:, j]]))
        return stack(cols, axis=1)

    lam = complex(approx_value)
    z0 = np.concatenate([[lam.real, lam.imag], v.real[free], v.imag[free]])
    res = verify_zero(f, jac, z0)
    if res is None or not res.verified:
        raise VerificationError(f"complex eigenpair near {approx_value!r}: {res.reason if res else 'no attempt'}")
    rho, om, xr, xi = unpack(res.enclosure)
    return EigenEnclosure("complex", rho, om, xr, xi, k, 1.0, res)


def enclose_spectrum(A) -> list[EigenEnclosure]:
    """Enclose every eigenvalue of ``A`` (one entry per real eigenvalue or
    complex-conjugate pair with positive imaginary part)."""
    A = Interval.coerce(A)
    w, V = np.linalg.eig(A.mid())
    out = []
    for j in np.argsort(-w.real):
        lam = w[j]
        if abs(lam.imag) <= 1e-12 * max(1.0, abs(lam)):
            out.append(enclose_real_eigenpair(A, lam.real, V[:, j].real))
        elif lam.imag > 0:
            out.append(enclose_complex_eigenpair(A, lam, V[:, j]))
    return out


# -- logarithmic norms ------------------------------------------------------------------


def symmetric_part(A) -> Interval:
    A = Interval.coerce(A)
    return (A + A.T) * Interval(0.5)


def _gershgorin_max(B: Interval) -> float:
    n = B.shape[0]
    mag = B.mag()
    best = -np.inf
    for i in range(n):
        off = 0.0
        for j in range(n):
            if j != i:
                off = float(add_up(off, mag[i, j]))
        best = max(best, float(add_up(B.hi[i, i], off)))
    return best


def _gershgorin_min(B: Interval) -> float:
    n = B.shape[0]
    mag = B.mag()
    best = np.inf
    for i in range(n):
        off = 0.0
        for j in range(n):
            if j != i:
                off = float(add_up(off, mag[i, j]))
        best = min(best, float(add_down(B.lo[i, i], -off)))
    return best


def _similar(S: Interval):
    """``U^-1 S U`` for approximate eigenvectors ``U`` of ``mid(S)``, or None."""
    try:
        _, U = np.linalg.eigh(S.mid())
        Uinv = point_inverse(U)
    except (np.linalg.LinAlgError, NotInvertibleError):
        return None, None
    return mat_mul(mat_mul(Uinv, S), Interval(U)), U


def _rayleigh(S: Interval, v: np.ndarray) -> Interval:
    vi = Interval(v)
    return mat_mul(vi, mat_mul(S, vi)) / mat_mul(vi, vi)


def log_norm(A) -> Interval:
    """Interval containing ``max spec((A + A^T)/2)`` for every ``A`` in the set.

    Upper bound: Gershgorin discs of the symmetric part, tightened by
    Gershgorin on a similarity transform that nearly diagonalizes its
    midpoint.  Lower bound: a Rayleigh quotient.
    """
    S = symmetric_part(A)
    upper = _gershgorin_max(S)
    B, U = _similar(S)
    if B is not None:
        upper = min(upper, _gershgorin_max(B))
        lower = float(_rayleigh(S, U[:, -1]).lo)
    else:
        lower = float(np.max(np.diag(S.lo)))
    return Interval(min(lower, upper), upper)


def log_min(A) -> Interval:
    """Interval containing ``min spec((A + A^T)/2)`` for every ``A`` in the set."""
    S = symmetric_part(A)
    lower = _gershgorin_min(S)
    B, U = _similar(S)
    if B is not None:
        lower = max(lower, _gershgorin_min(B))
        upper = float(_rayleigh(S, U[:, 0]).hi)
    else:
        upper = float(np.min(np.diag(S.hi)))
    return Interval(lower, max(lower, upper))


# -- saddle quantity ------------------------------------------------------------------------


def sign_of(x: Interval) -> int:
    """+1 or -1 when the interval excludes zero, otherwise 0."""
    if x.lo > 0:
        return 1
    if x.hi < 0:
        return -1
    return 0


def saddle_quantity(lambda_u, lambda_s_re) -> Interval:
    """``λ_u + Re λ_s`` (the usual saddle quantity of a saddle-focus)."""
    return Interval.coerce(lambda_u) + Interval.coerce(lambda_s_re)
