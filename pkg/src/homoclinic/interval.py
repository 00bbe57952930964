"""Outward-rounded interval arithmetic on numpy arrays.

An :class:`Interval` holds two float64 arrays ``lo`` and ``hi`` of the same
shape, so a scalar interval, an interval vector (a box) and an interval matrix
are all the same type with ``ndim`` 0, 1 and 2.

Rounding is directed without touching the hardware rounding mode.  Sums are
rounded with an error-free transformation (TwoSum), products and quotients
with Dekker's splitting, so results are the tightest machine intervals for a
single operation.  Where the error-free transforms are unreliable (overflow,
gradual underflow) the bound is pushed one ulp outward instead.  The
``fast_*`` kernels used by the integrator always push one ulp outward, which
is cheaper and still rigorous.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Interval",
    "NotInvertibleError",
    "interval",
    "ivector",
    "imatrix",
    "hull",
    "stack",
    "concatenate",
    "zeros",
    "eye",
    "mat_mul",
    "mat_vec",
    "mat_inverse",
    "point_inverse",
    "euclid_norm_bound",
    "op_norm_bound",
    "from_decimal",
]

_INF = np.inf
_SPLITTER = 134217729.0  # 2**27 + 1
_EPS = np.finfo(float).eps
_TINY = 2.0**-960
_HUGE = 2.0**995


class NotInvertibleError(ArithmeticError):
    """An interval matrix (or divisor) could not be shown to be invertible."""


# -- directed rounding primitives ---------------------------------------------


def _down(x):
    return np.nextafter(x, -_INF)


def _up(x):
    return np.nextafter(x, _INF)


def _two_sum_err(a, b, s):
    with np.errstate(invalid="ignore", over="ignore"):
        bb = s - a
        return (a - (s - bb)) + (b - bb)


def _split(a):
    with np.errstate(invalid="ignore", over="ignore"):
        c = _SPLITTER * a
        hi = c - (c - a)
    return hi, a - hi


def _prod_err(a, b, p):
    """Exact rounding error ``a*b - p`` or NaN where it cannot be trusted."""
    ah, al = _split(a)
    bh, bl = _split(b)
    with np.errstate(invalid="ignore", over="ignore"):
        e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
        bad = (np.abs(p) < _TINY) | (np.abs(a) > _HUGE) | (np.abs(b) > _HUGE)
    e = np.where(bad, np.nan, e)
    return np.where((a == 0) | (b == 0), 0.0, e)


def _round_down(s, err):
    # err is the exact residual (true - s); NaN means unknown
    return np.where(err >= 0, s, _down(s))


def _round_up(s, err):
    return np.where(err <= 0, s, _up(s))


def add_down(a, b):
    s = a + b
    return _round_down(s, _two_sum_err(a, b, s))


def add_up(a, b):
    s = a + b
    return _round_up(s, _two_sum_err(a, b, s))


def _sign_floor(r, sa, sb):
    # the exact result has sign sa*sb; keep nudged bounds on that side of zero
    return np.where(sa * sb >= 0, np.maximum(r, 0.0), r)


def _sign_ceil(r, sa, sb):
    return np.where(sa * sb <= 0, np.minimum(r, 0.0), r)


def mul_down(a, b):
    with np.errstate(invalid="ignore", over="ignore"):
        p = a * b
    p = np.where(np.isnan(p), 0.0, p)  # 0 * inf
    return _sign_floor(_round_down(p, _prod_err(a, b, p)), np.sign(a), np.sign(b))


def mul_up(a, b):
    with np.errstate(invalid="ignore", over="ignore"):
        p = a * b
    p = np.where(np.isnan(p), 0.0, p)
    return _sign_ceil(_round_up(p, _prod_err(a, b, p)), np.sign(a), np.sign(b))


def _div_residual(a, b, q):
    # sign of (a/b - q) from the exact residual a - q*b
    p = q * b
    e = _prod_err(q, b, p)
    with np.errstate(invalid="ignore", over="ignore"):
        r = (a - p) - e
    return np.where(np.isnan(e), np.nan, r * np.sign(b))


def div_down(a, b):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        q = a / b
    return _sign_floor(_round_down(q, _div_residual(a, b, q)), np.sign(a), np.sign(b))


def div_up(a, b):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        q = a / b
    return _sign_ceil(_round_up(q, _div_residual(a, b, q)), np.sign(a), np.sign(b))


def sqrt_down(x):
    s = np.sqrt(np.maximum(x, 0.0))
    p = s * s
    e = _prod_err(s, s, p)
    return np.maximum(_round_down(s, (x - p) - e), 0.0)


def sqrt_up(x):
    s = np.sqrt(np.maximum(x, 0.0))
    p = s * s
    e = _prod_err(s, s, p)
    return _round_up(s, (x - p) - e)


# -- fast kernels on (lo, hi) pairs -----------------------------------------------


def fast_add(alo, ahi, blo, bhi):
    return _down(alo + blo), _up(ahi + bhi)


def fast_mul(alo, ahi, blo, bhi):
    """Interval product with one-ulp outward nudging; broadcasts."""
    with np.errstate(invalid="ignore", over="ignore"):
        p1 = alo * blo
        p2 = alo * bhi
        p3 = ahi * blo
        p4 = ahi * bhi
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return _down(lo), _up(hi)


def fast_sum(lo, hi, axis):
    """Rigorous sum along ``axis`` (or a tuple of axes) using an a posteriori
    bound on the floating point summation error."""
    if isinstance(axis, int):
        axis = (axis,)
    n = 1
    for ax in axis:
        n *= lo.shape[ax]
    if n <= 1:
        return lo.sum(axis=axis), hi.sum(axis=axis)
    gamma = 2.0 * n * _EPS
    slo = lo.sum(axis=axis)
    shi = hi.sum(axis=axis)
    elo = gamma * np.abs(lo).sum(axis=axis) + n * 5e-324
    ehi = gamma * np.abs(hi).sum(axis=axis) + n * 5e-324
    return _down(slo - elo), _up(shi + ehi)


def _exact_sum(lo, hi, axis):
    lo = np.moveaxis(lo, axis, 0)
    hi = np.moveaxis(hi, axis, 0)
    if lo.shape[0] == 0:
        return np.zeros(lo.shape[1:]), np.zeros(hi.shape[1:])
    slo, shi = lo[0], hi[0]
    for k in range(1, lo.shape[0]):
        slo = add_down(slo, lo[k])
        shi = add_up(shi, hi[k])
    return slo, shi


def _mul_pair(alo, ahi, blo, bhi):
    """Tight interval product on arrays."""
    cands_lo = (mul_down(alo, blo), mul_down(alo, bhi), mul_down(ahi, blo), mul_down(ahi, bhi))
    cands_hi = (mul_up(alo, blo), mul_up(alo, bhi), mul_up(ahi, blo), mul_up(ahi, bhi))
    lo = np.minimum(np.minimum(cands_lo[0], cands_lo[1]), np.minimum(cands_lo[2], cands_lo[3]))
    hi = np.maximum(np.maximum(cands_hi[0], cands_hi[1]), np.maximum(cands_hi[2], cands_hi[3]))
    return lo, hi


# -- the Interval type -----------------------------------------------------------


def _as_float_array(x):
    return np.array(x, dtype=float)


class Interval:
    """Closed interval (or array of intervals) ``[lo, hi]``.

    Construction rejects ``lo > hi`` and NaNs.  Infinite bounds are rejected
    too unless ``allow_unbounded=True``; proof code checks
    :attr:`is_bounded` before trusting anything.
    """

    __slots__ = ("lo", "hi")
    __array_priority__ = 1000

    def __init__(self, lo, hi=None, *, allow_unbounded: bool = False):
        lo = _as_float_array(lo)
        hi = lo.copy() if hi is None else _as_float_array(hi)
        lo, hi = np.broadcast_arrays(lo, hi)
        lo, hi = lo.copy(), hi.copy()
        if np.isnan(lo).any() or np.isnan(hi).any():
            raise ValueError("interval bounds must not be NaN")
        if (lo > hi).any():
            raise ValueError(f"empty interval: lo={lo!r} > hi={hi!r}")
        if not allow_unbounded and not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("unbounded interval; pass allow_unbounded=True for a sentinel")
        self.lo = lo
        self.hi = hi

    @classmethod
    def _raw(cls, lo, hi) -> "Interval":
        obj = object.__new__(cls)
        obj.lo = np.asarray(lo, dtype=float)
        obj.hi = np.asarray(hi, dtype=float)
        return obj

    @classmethod
    def entire(cls, shape=()) -> "Interval":
        return cls(np.full(shape, -_INF), np.full(shape, _INF), allow_unbounded=True)

    @classmethod
    def coerce(cls, x) -> "Interval":
        if isinstance(x, Interval):
            return x
        return cls(x)

    # -- shape handling --------------------------------------------------------

    @property
    def shape(self):
        return self.lo.shape

    @property
    def ndim(self):
        return self.lo.ndim

    @property
    def size(self):
        return self.lo.size

    @property
    def dim(self) -> int:
        if self.ndim != 1:
            raise ValueError("dim is defined for interval vectors only")
        return self.shape[0]

    def __len__(self):
        return len(self.lo)

    def __getitem__(self, key) -> "Interval":
        return Interval._raw(self.lo[key], self.hi[key])

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    def set(self, key, value) -> "Interval":
        """Copy with ``self[key]`` replaced by ``value``."""
        value = Interval.coerce(value)
        lo, hi = self.lo.copy(), self.hi.copy()
        lo[key] = value.lo
        hi[key] = value.hi
        return Interval._raw(lo, hi)

    def reshape(self, *shape) -> "Interval":
        return Interval._raw(self.lo.reshape(*shape), self.hi.reshape(*shape))

    @property
    def T(self) -> "Interval":
        return Interval._raw(self.lo.T, self.hi.T)

    def copy(self) -> "Interval":
        return Interval._raw(self.lo.copy(), self.hi.copy())

    # -- properties --------------------------------------------------------------

    @property
    def is_bounded(self) -> bool:
        return bool(np.isfinite(self.lo).all() and np.isfinite(self.hi).all())

    @property
    def is_point(self) -> bool:
        return bool((self.lo == self.hi).all())

    def mid(self) -> np.ndarray:
        m = 0.5 * self.lo + 0.5 * self.hi
        return np.where(np.isfinite(m), m, 0.5 * (self.lo + self.hi))

    def rad(self) -> np.ndarray:
        """Upper bound on the radius about :meth:`mid`."""
        m = self.mid()
        return np.maximum(_up(m - self.lo), _up(self.hi - m))

    def width(self) -> np.ndarray:
        return _up(self.hi - self.lo)

    def mag(self) -> np.ndarray:
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def mig(self) -> np.ndarray:
        return np.where((self.lo <= 0) & (self.hi >= 0), 0.0, np.minimum(np.abs(self.lo), np.abs(self.hi)))

    def abs(self) -> "Interval":
        return Interval._raw(self.mig(), self.mag())

    # -- set relations -------------------------------------------------------------

    def contains(self, x) -> bool:
        """True if every entry of ``x`` (point or interval) lies inside."""
        if isinstance(x, Interval):
            return bool(((self.lo <= x.lo) & (x.hi <= self.hi)).all())
        x = _as_float_array(x)
        return bool(((self.lo <= x) & (x <= self.hi)).all())

    def subset(self, other: "Interval") -> bool:
        return Interval.coerce(other).contains(self)

    def interior_subset(self, other: "Interval") -> bool:
        other = Interval.coerce(other)
        return bool(((other.lo < self.lo) & (self.hi < other.hi)).all())

    def contains_zero(self) -> np.ndarray:
        return (self.lo <= 0) & (self.hi >= 0)

    def overlaps(self, other: "Interval") -> bool:
        other = Interval.coerce(other)
        return bool(((self.lo <= other.hi) & (other.lo <= self.hi)).all())

    def intersect(self, other: "Interval") -> "Interval":
        other = Interval.coerce(other)
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if (lo > hi).any():
            raise ValueError("intersection is empty")
        return Interval._raw(lo, hi)

    def hull(self, other: "Interval") -> "Interval":
        other = Interval.coerce(other)
        return Interval._raw(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def inflate(self, abs_eps: float, rel_eps: float = 0.0) -> "Interval":
        r = abs_eps + rel_eps * np.maximum(self.width(), self.mag())
        return Interval._raw(_down(self.lo - r), _up(self.hi + r))

    def same(self, other: "Interval") -> bool:
        """Bitwise equality of all endpoints."""
        other = Interval.coerce(other)
        return self.shape == other.shape and bool((self.lo == other.lo).all() and (self.hi == other.hi).all())

    # -- arithmetic ------------------------------------------------------------------

    def __neg__(self):
        return Interval._raw(-self.hi, -self.lo)

    def __pos__(self):
        return self

    def __add__(self, other):
        other = Interval.coerce(other)
        return Interval._raw(add_down(self.lo, other.lo), add_up(self.hi, other.hi))

    __radd__ = __add__

    def __sub__(self, other):
        other = Interval.coerce(other)
        return Interval._raw(add_down(self.lo, -other.hi), add_up(self.hi, -other.lo))

    def __rsub__(self, other):
        return Interval.coerce(other) - self

    def __mul__(self, other):
        other = Interval.coerce(other)
        return Interval._raw(*_mul_pair(self.lo, self.hi, other.lo, other.hi))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Interval.coerce(other)
        if other.contains_zero().any():
            raise ZeroDivisionError("interval division by an interval containing zero")
        a, b = np.broadcast_arrays(self.lo, other.lo)
        ah, bh = np.broadcast_arrays(self.hi, other.hi)
        cands_lo = (div_down(a, b), div_down(a, bh), div_down(ah, b), div_down(ah, bh))
        cands_hi = (div_up(a, b), div_up(a, bh), div_up(ah, b), div_up(ah, bh))
        lo = np.minimum.reduce(cands_lo)
        hi = np.maximum.reduce(cands_hi)
        return Interval._raw(lo, hi)

    def __rtruediv__(self, other):
        return Interval.coerce(other) / self

    def sqr(self) -> "Interval":
        lo2 = mul_down(self.mig(), self.mig())
        hi2 = mul_up(self.mag(), self.mag())
        return Interval._raw(lo2, hi2)

    def __pow__(self, k):
        if k == 2:
            return self.sqr()
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = Interval(np.ones(self.shape))
        for _ in range(k):
            out = out * self
        return out

    def sqrt(self) -> "Interval":
        if (self.lo < 0).any():
            raise ValueError("sqrt of an interval with negative part")
        return Interval._raw(sqrt_down(self.lo), sqrt_up(self.hi))

    def sum(self, axis=None) -> "Interval":
        if axis is None:
            return Interval._raw(*_exact_sum(self.lo.ravel(), self.hi.ravel(), 0))
        return Interval._raw(*_exact_sum(self.lo, self.hi, axis))

    def __matmul__(self, other):
        return mat_mul(self, other)

    def __rmatmul__(self, other):
        return mat_mul(Interval.coerce(other), self)

    # -- display ---------------------------------------------------------------------

    def __repr__(self):
        if self.ndim == 0:
            return f"Interval([{float(self.lo)!r}, {float(self.hi)!r}])"
        return f"Interval(lo={self.lo!r}, hi={self.hi!r})"

    def tolist(self):
        """Nested lists of ``[lo, hi]`` pairs."""
        if self.ndim == 0:
            return [float(self.lo), float(self.hi)]
        return [self[k].tolist() for k in range(len(self))]


# -- constructors -------------------------------------------------------------------


def from_decimal(text) -> Interval:
    """Tightest interval containing the exact decimal (or rational) value."""
    exact = Fraction(str(text)) if not isinstance(text, Fraction) else text
    f = float(exact)
    lo = f if Fraction(f) <= exact else float(_down(f))
    hi = f if Fraction(f) >= exact else float(_up(f))
    return Interval(lo, hi)


def interval(lo, hi=None) -> Interval:
    return Interval(lo, hi)


def _pairs_to_interval(entries) -> Interval:
    arr = np.array(
        [[float(e.lo), float(e.hi)] if isinstance(e, Interval) else
         ([e[0], e[1]] if isinstance(e, (list, tuple)) else [e, e]) for e in entries],
        dtype=float,
    )
    return Interval(arr[:, 0], arr[:, 1])


def ivector(entries: Iterable) -> Interval:
    """Interval vector from floats, ``(lo, hi)`` pairs, or scalar intervals."""
    entries = list(entries)
    if not entries:
        raise ValueError("an interval vector needs at least one entry")
    return _pairs_to_interval(entries)


def imatrix(rows: Sequence[Sequence]) -> Interval:
    rows = [list(r) for r in rows]
    ncols = {len(r) for r in rows}
    if len(ncols) != 1 or 0 in ncols:
        raise ValueError("interval matrix must be rectangular and non-empty")
    vecs = [ivector(r) for r in rows]
    return stack(vecs)


def stack(items: Sequence, axis: int = 0) -> Interval:
    items = [Interval.coerce(x) for x in items]
    return Interval._raw(np.stack([x.lo for x in items], axis), np.stack([x.hi for x in items], axis))


def concatenate(items: Sequence, axis: int = 0) -> Interval:
    items = [Interval.coerce(x) for x in items]
    return Interval._raw(np.concatenate([x.lo for x in items], axis),
                         np.concatenate([x.hi for x in items], axis))


def zeros(shape) -> Interval:
    return Interval(np.zeros(shape))


def eye(n: int) -> Interval:
    return Interval(np.eye(n))


def hull(a: Interval, b: Interval) -> Interval:
    return Interval.coerce(a).hull(b)


# -- linear algebra -------------------------------------------------------------------


def mat_mul(a: Interval, b: Interval) -> Interval:
    """Interval matrix product (also matrix-vector); inner sums are directed."""
    a = Interval.coerce(a)
    b = Interval.coerce(b)
    if a.ndim == 1 and b.ndim == 1:
        return (a * b).sum()
    vec = b.ndim == 1
    if vec:
        b = b.reshape(-1, 1)
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"shape mismatch {a.shape} @ {b.shape}")
    alo = a.lo[..., :, :, None]
    ahi = a.hi[..., :, :, None]
    blo = b.lo[..., None, :, :]
    bhi = b.hi[..., None, :, :]
    plo, phi = _mul_pair(*np.broadcast_arrays(alo, ahi, blo, bhi))
    lo, hi = _exact_sum(plo, phi, -2)
    out = Interval._raw(lo, hi)
    return out[..., 0] if vec else out


def mat_vec(m: Interval, v: Interval) -> Interval:
    return mat_mul(m, v)


def mat_inverse(m: Interval) -> Interval:
    """Enclosure of ``{A^-1 : A in m}`` by interval Gauss-Jordan elimination.

    Pivots are chosen by largest midpoint magnitude.  Raises
    :class:`NotInvertibleError` when a pivot interval contains zero.
    """
    m = Interval.coerce(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("mat_inverse needs a square interval matrix")
    n = m.shape[0]
    a = concatenate([m, eye(n)], axis=1)
    rows = [a[i] for i in range(n)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(rows[r][col].mid()))
        rows[col], rows[piv] = rows[piv], rows[col]
        p = rows[col][col]
        if p.contains_zero():
            raise NotInvertibleError(f"pivot {p!r} in column {col} contains zero")
        rows[col] = rows[col] / p
        rows[col] = rows[col].set(col, Interval(1.0))
        for r in range(n):
            if r == col:
                continue
            factor = rows[r][col]
            if factor.lo == 0 and factor.hi == 0:
                continue
            rows[r] = rows[r] - factor * rows[col]
            rows[r] = rows[r].set(col, Interval(0.0))
    return stack(rows)[:, n:]


def point_inverse(a: np.ndarray) -> Interval:
    """Rigorous enclosure of the inverse of a point matrix.

    Uses an approximate inverse ``R`` and the residual ``E = I - R A``; when
    ``||E||_inf < 1`` the inverse lies in ``R + E (I - E)^-1 R`` whose entries
    are bounded through the Neumann series.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    r = np.linalg.inv(a)
    ri = Interval(r)
    e = eye(n) - mat_mul(ri, Interval(a))
    enorm = float(np.max(add_up(np.zeros(n), e.mag().sum(axis=1) * (1 + 4 * n * _EPS))))
    if not enorm < 1:
        raise NotInvertibleError("approximate inverse is not accurate enough")
    # ||(I-E)^-1||_inf <= 1/(1-||E||); entries of E (I-E)^-1 R bounded by ||E||/(1-||E||) * max |R| row sums
    delta = float(_up(_up(enorm) / _down(1.0 - enorm)))
    bound = float(_up(delta * _up(np.abs(r).sum(axis=1).max() * (1 + 4 * n * _EPS))))
    return Interval._raw(_down(r - bound), _up(r + bound))


def euclid_norm_bound(v: Interval) -> Interval:
    """``[lo, hi]`` containing ``||x||_2`` for every point ``x`` in the box."""
    v = Interval.coerce(v).reshape(-1)
    mig = v.mig()
    mag = v.mag()
    nz = np.flatnonzero(mag)
    if nz.size <= 1:  # a single nonzero entry: the norm is its absolute value
        k = int(nz[0]) if nz.size else 0
        return Interval._raw(np.asarray(mig[k] if nz.size else 0.0), np.asarray(mag[k] if nz.size else 0.0))
    lo2, _ = _exact_sum(mul_down(mig, mig), mul_down(mig, mig), 0)
    _, hi2 = _exact_sum(mul_up(mag, mag), mul_up(mag, mag), 0)
    return Interval._raw(sqrt_down(lo2), sqrt_up(hi2))


def op_norm_bound(m: Interval) -> Interval:
    """Bounds on the spectral norm of every matrix in ``m``.

    Upper bound: square root of the largest Gershgorin bound of the interval
    matrix ``m^T m``.  Lower bound: the largest column norm lower bound.
    """
    m = Interval.coerce(m)
    if m.ndim != 2:
        raise ValueError("op_norm_bound needs an interval matrix")
    gram = mat_mul(m.T, m)
    n = gram.shape[0]
    mag = gram.mag()
    upper = -_INF
    for i in range(n):
        off = 0.0
        for j in range(n):
            if j != i:
                off = float(add_up(off, mag[i, j]))
        upper = max(upper, float(add_up(gram.hi[i, i], off)))
    upper = max(upper, 0.0)
    lower = max(float(euclid_norm_bound(m[:, j]).lo) for j in range(m.shape[1]))
    return Interval._raw(min(lower, float(sqrt_up(upper))), sqrt_up(upper))
