"""Saddle-node, transcritical and Hopf thresholds in the top-predator
mortality ``d2``, with the associated nondegeneracy quantities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .equilibria import boundary_point, critical_x, upper_interior, y_star
from .model import ModelParams, char_coeffs

D2_TOL = 1e-13
HOPF_GRID = 200
FD_STEP = 1e-6


class NotFoundError(RuntimeError):
    """A bifurcation threshold could not be located."""


class Criticality(str, Enum):
    SUB = "sub"
    SUPER = "super"
    UNDETERMINED = "undetermined"


@dataclass
class ThresholdReport:
    d2_sn: float | None = None
    sn_point: np.ndarray | None = None
    d2_tc: float | None = None
    d2_hopf: list[tuple[float, Criticality]] = field(default_factory=list)
    transversality: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "d2_sn": None if self.d2_sn is None else float(self.d2_sn),
            "sn_point": None if self.sn_point is None else [float(v) for v in self.sn_point],
            "d2_tc": None if self.d2_tc is None else float(self.d2_tc),
            "d2_hopf": [{"d2": float(d), "criticality": c.value} for d, c in self.d2_hopf],
            "transversality": {k: float(v) for k, v in self.transversality.items()},
        }


def _bisect(f, lo: float, hi: float, tol: float = D2_TOL) -> float:
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise NotFoundError(f"no sign change on [{lo}, {hi}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def tangency_residual(params: ModelParams, d2: float) -> float:
    """max over x of ``1 - x - y*(d2) f1~(x)``; zero at the saddle-node."""
    ys = y_star(params, d2)
    if ys is None:
        return -math.inf
    xc = critical_x(params, ys)
    return 1.0 - xc - ys * params.f1.tilde(xc)


def find_saddle_node(params: ModelParams, search: tuple[float, float] | None = None
                     ) -> tuple[float, np.ndarray]:
    """``d2`` at which the two coexistence equilibria merge, and the merged point."""
    top = params.f2.asymptote()
    lo, hi = search if search is not None else (1e-9 * top, top * (1.0 - 1e-12))
    if not 0.0 < lo < hi < top:
        raise NotFoundError(f"search interval must lie inside (0, {top})")
    d2s = _bisect(lambda d: tangency_residual(params, d), lo, hi)
    ys = y_star(params, d2s)
    xs = critical_x(params, ys)
    zs = (params.f1(xs) - params.d1) / params.f2.tilde(ys)
    return d2s, np.array([xs, ys, zs])


def sn_transversality(params: ModelParams, point) -> tuple[float, float]:
    x, y, _ = point
    f1, f2 = params.f1, params.f2
    return -f1(x) / f2.deriv(y), -2.0 - f1.deriv2(x) * y


def find_transcritical(params: ModelParams) -> float:
    """``d2`` at which the lower coexistence branch passes through E_b."""
    b = boundary_point(params)
    if b is None:
        raise NotFoundError("boundary equilibrium does not exist")
    return params.f2(b[1])


def tc_transversality(params: ModelParams) -> tuple[float, float, float]:
    b = boundary_point(params)
    if b is None:
        raise NotFoundError("boundary equilibrium does not exist")
    xb, yb = b
    f1, f2 = params.f1, params.f2
    d2 = f2(yb)
    z = 0.0
    # F_{d2} = (0, 0, -z), left null vector (0, 0, 1)
    first = -z + 0.0
    second = -yb * f1.deriv(xb) / d2
    trace = 1.0 - 2.0 * xb - yb * f1.deriv(xb)
    third = 2.0 * f2.deriv(yb) * (trace / f1.deriv(xb)) * (yb * f1.deriv(xb) / f2(yb))
    return first, second, third


def hopf_function(params: ModelParams, d2: float) -> tuple[float, float, float] | None:
    """(Delta, P0, P2) along the upper coexistence branch, None if absent."""
    p = params.with_d2(d2)
    e = upper_interior(p)
    if e is None:
        return None
    c = char_coeffs(p, e.coords)
    return c.delta, c.P0, c.P2


def _delta(params: ModelParams, d2: float) -> float:
    r = hopf_function(params, d2)
    if r is None:
        raise NotFoundError(f"upper branch absent at d2={d2}")
    return r[0]


def find_hopf_values(params: ModelParams, search: tuple[float, float] | None = None,
                     grid: int = HOPF_GRID) -> list[float]:
    """Hopf thresholds on the upper branch, largest first, uncharacterised."""
    if search is None:
        lo = find_transcritical(params)
        hi, _ = find_saddle_node(params)
    else:
        lo, hi = search
    span = hi - lo
    ds = np.linspace(lo + 1e-9 * span, hi - 1e-9 * span, grid)
    vals = []
    for d in ds:
        r = hopf_function(params, float(d))
        vals.append(np.nan if r is None else r[0])
    roots = []
    for a, b, va, vb in zip(ds, ds[1:], vals, vals[1:]):
        if not (np.isfinite(va) and np.isfinite(vb)) or va * vb > 0.0:
            continue
        d = _bisect(lambda t: _delta(params, t), float(a), float(b))
        delta, p0, p2 = hopf_function(params, d)
        slope = (_delta(params, d + FD_STEP) - _delta(params, d - FD_STEP)) / (2 * FD_STEP)
        if p0 > 0.0 and p2 > 0.0 and abs(slope) > 1e-6:
            roots.append(d)
    return sorted(roots, reverse=True)


def find_hopf(params: ModelParams, search: tuple[float, float] | None = None,
              grid: int = HOPF_GRID, classify: bool = True, cfg=None
              ) -> list[tuple[float, Criticality]]:
    roots = find_hopf_values(params, search, grid)
    if not classify:
        return [(d, Criticality.UNDETERMINED) for d in roots]
    from .dynamics import classify_hopf
    return [(d, classify_hopf(params, d, cfg=cfg).criticality) for d in roots]


def thresholds(params: ModelParams, classify: bool = True, cfg=None) -> ThresholdReport:
    rep = ThresholdReport()
    d2s, point = find_saddle_node(params)
    rep.d2_sn, rep.sn_point = d2s, point
    q1, q2 = sn_transversality(params.with_d2(d2s), point)
    rep.transversality["sn_WtF_d2"] = q1
    rep.transversality["sn_WtD2F_VV"] = q2
    try:
        rep.d2_tc = find_transcritical(params)
        t1, t2, t3 = tc_transversality(params)
        rep.transversality["tc_WtF_d2"] = t1
        rep.transversality["tc_WtDF_V"] = t2
        rep.transversality["tc_WtD2F_VV"] = t3
        search = (rep.d2_tc, d2s)
    except NotFoundError:
        search = (1e-6 * d2s, d2s)
    rep.d2_hopf = find_hopf(params, search, classify=classify, cfg=cfg)
    for i, (d, _) in enumerate(rep.d2_hopf):
        slope = (_delta(params, d + FD_STEP) - _delta(params, d - FD_STEP)) / (2 * FD_STEP)
        rep.transversality[f"hopf{i}_dDelta_dd2"] = slope
    return rep
