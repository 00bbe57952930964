"""Vector fields: the generic quadratic field, Lorenz-84, and affine charts.

Fields consumed by the rest of the package are polynomial of degree two in
the state with an affine dependence on one scalar parameter ``θ``::

    f(p, θ) = c0 + θ c1 + (A0 + θ A1) p + Q(p, p),   Q(p, p)_i = Σ_jk Q_ijk p_j p_k

This class is closed under the operations the proof needs (affine change of
coordinates, reversal of time, promoting ``θ`` to a state variable), and it
makes Taylor jets exact recurrences.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .interval import Interval, _mul_pair, concatenate, mat_mul, point_inverse, stack, zeros

__all__ = [
    "VectorFieldSpec",
    "QuadraticField",
    "LocalChart",
    "lorenz84",
    "lorenz84_field",
    "lorenz84_jacobian",
    "reverse_time",
    "extend_with_parameter",
]


def _iv(x) -> Interval:
    return Interval.coerce(x)


class VectorFieldSpec:
    """Interface shared by every field.

    ``evaluate(state, theta)`` returns an enclosure of ``f`` over the state
    box and parameter interval; ``jacobian(state, theta)`` returns the
    ``n × (n+1)`` interval matrix ``[∂f/∂p | ∂f/∂θ]``.
    """

    state_dim: int
    unstable_dim: int
    stable_dim: int
    param_range: Interval

    def evaluate(self, state, theta=None) -> Interval:  # pragma: no cover - interface
        raise NotImplementedError

    def jacobian(self, state, theta=None) -> Interval:  # pragma: no cover - interface
        raise NotImplementedError

    def state_jacobian(self, state, theta=None) -> Interval:
        return self.jacobian(state, theta)[:, : self.state_dim]

    def param_derivative(self, state, theta=None) -> Interval:
        return self.jacobian(state, theta)[:, self.state_dim]

    x_coords: Optional[tuple] = None

    # split into the unstable coordinates x and the stable coordinates y
    @property
    def unstable_idx(self) -> list[int]:
        if self.x_coords is not None:
            return list(self.x_coords)
        return list(range(self.unstable_dim))

    @property
    def stable_idx(self) -> list[int]:
        skip = set(self.unstable_idx) | set(getattr(self, "static", ()))
        return [i for i in range(self.state_dim) if i not in skip]


@dataclass(frozen=True)
class QuadraticField(VectorFieldSpec):
    """Quadratic field with interval coefficients.

    ``static`` lists state coordinates whose component of the field is
    identically zero (a parameter promoted to a state variable).
    """

    c0: Interval
    c1: Interval
    A0: Interval
    A1: Interval
    Q: Interval
    unstable_dim: int
    stable_dim: int
    param_range: Interval
    static: tuple = ()
    name: str = "quadratic"
    x_coords: Optional[tuple] = None

    def __post_init__(self):
        n = self.c0.shape[0]
        shapes = {
            "c1": (self.c1.shape, (n,)),
            "A0": (self.A0.shape, (n, n)),
            "A1": (self.A1.shape, (n, n)),
            "Q": (self.Q.shape, (n, n, n)),
        }
        for key, (got, want) in shapes.items():
            if got != want:
                raise ValueError(f"{key} has shape {got}, expected {want}")
        if self.unstable_dim + self.stable_dim + len(self.static) != n:
            raise ValueError("unstable_dim + stable_dim (+ static coordinates) must equal the state dimension")
        if self.x_coords is not None and len(self.x_coords) != self.unstable_dim:
            raise ValueError("x_coords must list unstable_dim coordinates")

    @classmethod
    def build(cls, c0, A0, Q, *, c1=None, A1=None, unstable_dim=0, stable_dim=None,
              param_range=(0.0, 0.0), static=(), name="quadratic") -> "QuadraticField":
        c0 = _iv(c0)
        n = c0.shape[0]
        c1 = zeros(n) if c1 is None else _iv(c1)
        A1 = zeros((n, n)) if A1 is None else _iv(A1)
        Q = zeros((n, n, n)) if Q is None else _iv(Q)
        if stable_dim is None:
            stable_dim = n - unstable_dim - len(static)
        pr = param_range if isinstance(param_range, Interval) else Interval(*param_range)
        return cls(c0, c1, _iv(A0), A1, Q, unstable_dim, stable_dim, pr, tuple(static), name)

    @classmethod
    def linear(cls, A, **kw) -> "QuadraticField":
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        return cls.build(np.zeros(n), A, None, **kw)

    @property
    def state_dim(self) -> int:
        return self.c0.shape[0]

    # -- evaluation ----------------------------------------------------------------

    def _theta(self, theta) -> Interval:
        return self.param_range if theta is None else _iv(theta)

    def quadratic_form(self, p: Interval, q: Optional[Interval] = None) -> Interval:
        q = p if q is None else q
        pq = Interval._raw(*_outer(p, q))
        return _contract2(self.Q, pq)

    def evaluate(self, state, theta=None) -> Interval:
        p = _iv(state)
        th = self._theta(theta)
        lin = mat_mul(self.A0 + self.A1 * th, p)
        return self.c0 + self.c1 * th + lin + self.quadratic_form(p)

    def symmetric_Q(self) -> Interval:
        """``K[o, c, j] = Q[o, c, j] + Q[o, j, c]`` so that ``∂Q(p,p)/∂p = K p``."""
        return self.Q + Interval._raw(np.swapaxes(self.Q.lo, 1, 2), np.swapaxes(self.Q.hi, 1, 2))

    def jacobian(self, state, theta=None) -> Interval:
        p = _iv(state)
        th = self._theta(theta)
        K = self.symmetric_Q()
        Dp = self.A0 + self.A1 * th + _contract_last(K, p)
        Dth = self.c1 + mat_mul(self.A1, p)
        return concatenate([Dp, Dth.reshape(-1, 1)], axis=1)

    # -- derived fields ----------------------------------------------------------------

    def reverse_time(self, swap_split: bool = True) -> "QuadraticField":
        """The field ``-f``.

        With ``swap_split`` the roles of the coordinate groups swap: the old
        stable coordinates become the unstable ones.
        """
        kw = dict(c0=-self.c0, c1=-self.c1, A0=-self.A0, A1=-self.A1, Q=-self.Q, name=self.name + "~reversed")
        if swap_split:
            kw.update(unstable_dim=self.stable_dim, stable_dim=self.unstable_dim,
                      x_coords=tuple(self.stable_idx))
        return replace(self, **kw)

    def with_split(self, unstable_dim: int, stable_dim: int, x_coords=None) -> "QuadraticField":
        return replace(self, unstable_dim=unstable_dim, stable_dim=stable_dim,
                       x_coords=None if x_coords is None else tuple(x_coords))

    def with_param_range(self, theta) -> "QuadraticField":
        return replace(self, param_range=_iv(theta))

    def extended(self) -> "QuadraticField":
        """Append ``θ`` as a state coordinate with ``θ' = 0``.

        The ``θ c1`` term becomes linear and ``θ A1 p`` becomes quadratic, so
        the extended field is again quadratic and parameter free.
        """
        n = self.state_dim
        N = n + 1
        c = concatenate([self.c0, zeros(1)])
        A = zeros((N, N)).set((slice(0, n), slice(0, n)), self.A0).set((slice(0, n), n), self.c1)
        Q = zeros((N, N, N)).set((slice(0, n), slice(0, n), slice(0, n)), self.Q)
        # θ A1 p, split evenly between the (θ, p) and (p, θ) slots
        half = self.A1 * Interval(0.5)
        Q = Q.set((slice(0, n), n, slice(0, n)), half).set((slice(0, n), slice(0, n), n), half)
        return replace(self, c0=c, c1=zeros(N), A0=A, A1=zeros((N, N)), Q=Q, param_range=Interval(0.0),
                       static=self.static + (n,), name=self.name + "+param")

    def in_chart(self, chart: "LocalChart") -> "QuadraticField":
        """The conjugated field ``C^-1 f(C x + q0, θ)`` in chart coordinates."""
        C = Interval(chart.C)
        Ci = chart.C_inv_enclosure
        q0 = Interval(chart.q0)
        K = self.symmetric_Q()
        c0 = mat_mul(Ci, self.c0 + mat_mul(self.A0, q0) + self.quadratic_form(q0))
        c1 = mat_mul(Ci, self.c1 + mat_mul(self.A1, q0))
        A0 = mat_mul(Ci, mat_mul(self.A0 + _contract_last(K, q0), C))
        A1 = mat_mul(Ci, mat_mul(self.A1, C))
        # Q'[i,j,k] = Σ Ci[i,o] Q[o,a,b] C[a,j] C[b,k]
        Qa = _tensordot(self.Q, C, ((1,), (0,)))          # o, b, j
        Qab = _tensordot(Qa, C, ((1,), (0,)))             # o, j, k
        Qn = _tensordot(Ci, Qab, ((1,), (0,)))            # i, j, k
        return replace(self, c0=c0, c1=c1, A0=A0, A1=A1, Q=Qn, name=self.name + "@chart")

    def autonomous(self):
        """``(c, A, Q)`` of a parameter-free field; raises if θ appears."""
        if not (np.all(self.c1.lo == 0) and np.all(self.c1.hi == 0)
                and np.all(self.A1.lo == 0) and np.all(self.A1.hi == 0)):
            raise ValueError("field depends on the parameter; extend it first")
        return self.c0, self.A0, self.Q


def reverse_time(spec: QuadraticField, swap_split: bool = True) -> QuadraticField:
    return spec.reverse_time(swap_split)


def extend_with_parameter(spec: QuadraticField) -> QuadraticField:
    return spec.extended()


# -- small tensor helpers built on directed-rounding ops ---------------------------------


def _outer(p: Interval, q: Interval):
    return _mul_pair(p.lo[:, None], p.hi[:, None], q.lo[None, :], q.hi[None, :])


def _contract2(Q: Interval, pq: Interval) -> Interval:
    # Σ_jk Q[i,j,k] pq[j,k]
    n = Q.shape[0]
    prod = Q * pq.reshape(1, *pq.shape)
    return prod.reshape(n, -1).sum(axis=1)


def _contract_last(K: Interval, p: Interval) -> Interval:
    # Σ_j K[o,c,j] p[j]
    return (K * p.reshape(1, 1, -1)).sum(axis=2)


def _tensordot(a: Interval, b: Interval, axes) -> Interval:
    (ia,), (ib,) = axes
    la = np.moveaxis(a.lo, ia, -1)
    ha = np.moveaxis(a.hi, ia, -1)
    lb = np.moveaxis(b.lo, ib, 0)
    hb = np.moveaxis(b.hi, ib, 0)
    A = Interval._raw(la.reshape(la.shape + (1,) * (lb.ndim - 1)), ha.reshape(ha.shape + (1,) * (hb.ndim - 1)))
    B = Interval._raw(lb.reshape((1,) * (la.ndim - 1) + lb.shape), hb.reshape((1,) * (ha.ndim - 1) + hb.shape))
    return (A * B).sum(axis=la.ndim - 1)


# -- affine chart --------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalChart:
    """Affine chart ``p = C x + q0`` with a verified enclosure of ``C^-1``."""

    q0: np.ndarray
    C: np.ndarray
    C_inv_enclosure: Interval = field(compare=False)

    @classmethod
    def from_arrays(cls, q0, C) -> "LocalChart":
        q0 = np.asarray(q0, dtype=float)
        C = np.asarray(C, dtype=float)
        return cls(q0, C, point_inverse(C))

    @classmethod
    def identity(cls, n: int) -> "LocalChart":
        return cls.from_arrays(np.zeros(n), np.eye(n))

    def to_local(self, p) -> Interval:
        return mat_mul(self.C_inv_enclosure, _iv(p) - Interval(self.q0))

    def from_local(self, x) -> Interval:
        return mat_mul(Interval(self.C), _iv(x)) + Interval(self.q0)

    def tangent_to_local(self, v) -> Interval:
        return mat_mul(self.C_inv_enclosure, _iv(v))

    def tangent_from_local(self, v) -> Interval:
        return mat_mul(Interval(self.C), _iv(v))

    def matrix_to_local(self, M) -> Interval:
        """Conjugate a Jacobian: ``C^-1 M C``."""
        return mat_mul(self.C_inv_enclosure, mat_mul(_iv(M), Interval(self.C)))

    def field(self, spec: QuadraticField) -> QuadraticField:
        return spec.in_chart(self)


# -- Lorenz-84 -----------------------------------------------------------------------------


def lorenz84_field(state, a, b, F, G) -> Interval:
    """Interval evaluation of the Lorenz-84 equations in ``(X, Y, Z)``."""
    s = _iv(state)
    X, Y, Z = s[0], s[1], s[2]
    a, b, F, G = (_iv(v) for v in (a, b, F, G))
    dX = -(Y.sqr()) - Z.sqr() - a * X + a * F
    dY = X * Y - b * X * Z - Y + G
    dZ = b * X * Y + X * Z - Z
    return stack([dX, dY, dZ])


def lorenz84_jacobian(state, a, b, F, G) -> Interval:
    """Hand-written partial derivatives, columns ``(X, Y, Z, G)``."""
    s = _iv(state)
    X, Y, Z = s[0], s[1], s[2]
    a, b = _iv(a), _iv(b)
    one, zero = Interval(1.0), Interval(0.0)
    two = Interval(2.0)
    rows = [
        [-a, -(two * Y), -(two * Z), zero],
        [Y - b * Z, X - one, -(b * X), one],
        [b * Y + Z, b * X, X - one, zero],
    ]
    return stack([stack(r) for r in rows])


def lorenz84(a, b, F, G_range, *, time_direction: int = 1) -> QuadraticField:
    """Lorenz-84 as a :class:`QuadraticField` with parameter ``G``.

    ``time_direction=-1`` returns the time-reversed field.  The declared
    split refers to chart coordinates ``(x, y1, y2)`` aligned with the
    equilibrium's eigen-directions: forward in time ``(y1, y2)`` (the complex
    pair) are unstable and ``x`` is stable; the reversed field swaps them.
    """
    a, b, F = _iv(a), _iv(b), _iv(F)
    G = G_range if isinstance(G_range, Interval) else Interval(*G_range)
    Qi = zeros((3, 3, 3))
    entries = {
        (0, 1, 1): Interval(-1.0),
        (0, 2, 2): Interval(-1.0),
        (1, 0, 1): Interval(1.0),
        (1, 0, 2): -b,
        (2, 0, 1): b,
        (2, 0, 2): Interval(1.0),
    }
    for idx, val in entries.items():
        Qi = Qi.set(idx, val)
    A0 = zeros((3, 3)).set((0, 0), -a).set((1, 1), Interval(-1.0)).set((2, 2), Interval(-1.0))
    c0 = zeros(3).set(0, a * F)
    c1 = Interval(np.array([0.0, 1.0, 0.0]))
    fwd = QuadraticField(c0, c1, A0, zeros((3, 3)), Qi, 2, 1, G, (), "lorenz84", (1, 2))
    if time_direction == 1:
        return fwd
    if time_direction != -1:
        raise ValueError("time_direction must be +1 or -1")
    return fwd.reverse_time()
