"""The splitting function between the unstable and stable manifolds.

For a parameter ``θ`` the launch point ``p^u_θ`` on the local unstable
manifold is flowed for time ``T``; ``h(θ)`` is the signed gap, along the
stable manifold's graph coordinate, between the image and the local stable
manifold.  Opposite strict signs at the ends of ``Θ`` give a parameter with a
homoclinic orbit (Bolzano), and a derivative bound away from zero makes it
unique.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .integrator import FlowEnclosure, IntegratorConfig, flow
from .interval import Interval, euclid_norm_bound, mat_mul
from .linalg import sign_of
from .manifolds import ManifoldEnclosure, eval_graph, exit_point
from .model import LocalChart, QuadraticField

__all__ = [
    "ShootingResult",
    "Shot",
    "OutsideBlockError",
    "shoot",
    "splitting_h",
    "splitting_h_derivative",
    "prove_homoclinic",
]


class OutsideBlockError(RuntimeError):
    """The flowed image is not inside the block, so the stable graph does not apply."""


@dataclass
class Shot:
    """One validated shot from the unstable exit point."""

    theta: Interval
    start_local: Interval
    run: FlowEnclosure = field(repr=False)
    image_local: Interval
    in_block: bool
    h: Optional[Interval]


def shoot(theta, unstable: ManifoldEnclosure, stable: ManifoldEnclosure, field_: QuadraticField,
          chart: LocalChart, T: float, cfg: IntegratorConfig, side: int = 1) -> Shot:
    """Flow ``p^u_θ`` for time ``T`` and evaluate the splitting function.

    ``field_`` is the field in the integration coordinates (original
    coordinates); ``chart`` maps them to the block coordinates.
    """
    th = Interval.coerce(theta).reshape(())
    start = exit_point(unstable, th, side)
    run = flow(field_, start, T, cfg, theta=th, frame=chart)
    img = chart.to_local(run.image)
    inside = stable.block.contains(img)
    h = None
    if inside:
        w = eval_graph(stable, img[stable.base_idx], th)
        h = img[stable.graph_idx] - w
        h = h.reshape(-1)[0] if h.shape == (1,) else h
    return Shot(th, start, run, img, inside, h)


def splitting_h(theta, unstable, stable, field_, chart, T, cfg, side: int = 1) -> Interval:
    """Enclosure of ``h(θ)`` for all ``θ`` in ``theta``; raises if the image
    leaves the block."""
    shot = shoot(theta, unstable, stable, field_, chart, T, cfg, side)
    if not shot.in_block:
        raise OutsideBlockError(f"Φ_T image {shot.image_local.tolist()} is not inside the block")
    return shot.h


def splitting_h_derivative(shot: Shot, unstable: ManifoldEnclosure, stable: ManifoldEnclosure,
                           chart: LocalChart, L_s: Optional[float] = None) -> Interval:
    """Interval containing ``h'(θ)`` for every ``θ`` covered by ``shot``.

    With ``𝒟 = C^-1 (∂Φ/∂p · C (0, ∂w^u/∂θ) + ∂Φ/∂θ)`` and
    ``‖∂w^u/∂θ‖ ≤ 1/M_u``, the bound is
    ``𝒟_x - [-L_s, L_s] ‖𝒟_y‖ - [-1/M_s, 1/M_s]`` where ``x`` is the stable
    graph's value coordinate and ``y`` its base coordinates.
    """
    if not shot.in_block:
        raise OutsideBlockError("derivative needs the image inside the block")
    V = shot.run.variational
    n = V.shape[0]
    VP = V[:, :n]
    VG = V[:, n]
    su = unstable.slope_bound
    d = np.zeros(n)
    dlo, dhi = d.copy(), d.copy()
    dlo[unstable.graph_idx] = -su
    dhi[unstable.graph_idx] = su
    dw = Interval(dlo, dhi)
    tangent = chart.tangent_from_local(dw)
    Dfull = chart.tangent_to_local(mat_mul(VP, tangent) + VG)
    Ls = stable.L if L_s is None else float(L_s)
    Dx = Dfull[stable.graph_idx]
    Dy = Dfull[stable.base_idx]
    ny = euclid_norm_bound(Dy)
    ss = stable.slope_bound
    J = Dx.reshape(-1)[0] - Interval(-Ls, Ls) * ny - Interval(-ss, ss)
    return J


@dataclass
class ShootingResult:
    theta_l: Interval
    theta_r: Interval
    h_left: Interval
    h_right: Interval
    h_prime: Interval
    stays_in_D: bool
    existence: bool
    uniqueness: bool
    orientation: str  # "increasing", "decreasing" or "none"
    h_full: Optional[Interval] = None
    images: dict = field(default_factory=dict, repr=False)
    shots: dict = field(default_factory=dict, repr=False)
    scope: str = "unique among orbits with Φ_t(p^u_θ, θ) in D for all t > T"

    @staticmethod
    def decide(h_left: Interval, h_right: Interval, h_prime: Optional[Interval], stays: bool):
        """Existence, uniqueness and orientation from stored intervals."""
        sl, sr = sign_of(h_left), sign_of(h_right)
        existence = bool(stays and sl != 0 and sr != 0 and sl == -sr)
        orientation = "none"
        if existence:
            orientation = "increasing" if sl < 0 else "decreasing"
        uniqueness = bool(existence and h_prime is not None and sign_of(h_prime) != 0)
        return existence, uniqueness, orientation


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("HOMOCLINIC_THREADS", "1")))
    except ValueError:
        return 1


def prove_homoclinic(unstable: ManifoldEnclosure, stable: ManifoldEnclosure, field_: QuadraticField,
                     chart: LocalChart, T: float, cfg: IntegratorConfig, theta_l: Interval,
                     theta_r: Interval, side: int = 1) -> ShootingResult:
    """Shoot from both ends of ``Θ`` and over all of ``Θ``, then apply the
    Bolzano and monotonicity tests."""
    Theta = Interval.coerce(theta_l).hull(theta_r)
    jobs = {"left": theta_l, "right": theta_r, "all": Theta}

    # coinciding parameter boxes (a point Θ) share one flow
    distinct = {}
    for key, th in jobs.items():
        distinct.setdefault((float(th.lo), float(th.hi)), key)

    def run(key):
        return key, shoot(jobs[key], unstable, stable, field_, chart, T, cfg, side)

    if _threads() > 1:
        with ThreadPoolExecutor(max_workers=min(3, _threads())) as ex:
            done = dict(ex.map(run, distinct.values()))
    else:
        done = dict(run(k) for k in distinct.values())
    shots = {k: done[distinct[(float(th.lo), float(th.hi))]] for k, th in jobs.items()}
    stays = shots["all"].in_block and shots["left"].in_block and shots["right"].in_block
    hl = shots["left"].h
    hr = shots["right"].h
    if hl is None or hr is None:
        nan = Interval.entire(())
        return ShootingResult(theta_l, theta_r, hl if hl is not None else nan, hr if hr is not None else nan,
                              nan, False, False, False, "none", None,
                              {k: s.image_local for k, s in shots.items()}, shots)
    hp = splitting_h_derivative(shots["all"], unstable, stable, chart) if shots["all"].in_block else None
    existence, uniqueness, orientation = ShootingResult.decide(hl, hr, hp, stays)
    return ShootingResult(theta_l, theta_r, hl, hr, hp if hp is not None else Interval.entire(()),
                          stays, existence, uniqueness, orientation, shots["all"].h,
                          {k: s.image_local for k, s in shots.items()}, shots)
