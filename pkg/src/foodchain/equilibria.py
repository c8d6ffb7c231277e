"""Equilibria of the food chain and their linear stability."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
from scipy.optimize import brentq

from .model import CharCoeffs, ModelParams, NoSolutionError, PreconditionError, \
    char_coeffs, jacobian, rhs

HYPERBOLIC_TOL = 1e-8
RESIDUAL_TOL = 1e-9
X_TOL = 1e-14
GUARD_GRID = 200


class EqKind(str, Enum):
    TRIVIAL = "trivial"
    AXIAL = "axial"
    BOUNDARY = "boundary"
    INTERIOR_LOWER = "interior_lower"
    INTERIOR_UPPER = "interior_upper"


class Stability(str, Enum):
    STABLE = "stable"
    SADDLE = "saddle"
    UNSTABLE = "unstable"
    NON_HYPERBOLIC = "non_hyperbolic"


@dataclass(frozen=True)
class EquilibriumPoint:
    coords: np.ndarray
    kind: EqKind
    eigenvalues: np.ndarray
    stability: Stability
    stable_dim: int
    unstable_dim: int
    routh_hurwitz: bool | None = None
    degenerate: bool = False

    @property
    def is_interior(self) -> bool:
        return self.kind in (EqKind.INTERIOR_LOWER, EqKind.INTERIOR_UPPER)

    def to_dict(self) -> dict[str, Any]:
        d = {
            "coords": [float(c) for c in self.coords],
            "kind": self.kind.value,
            "eigenvalues": [[float(l.real), float(l.imag)] for l in self.eigenvalues],
            "stability": self.stability.value,
            "stable_dim": self.stable_dim,
            "unstable_dim": self.unstable_dim,
        }
        if self.routh_hurwitz is not None:
            d["routh_hurwitz_stable"] = self.routh_hurwitz
        if self.degenerate:
            d["degenerate"] = True
        return d


def _order_eigs(lam: np.ndarray) -> np.ndarray:
    return lam[np.lexsort((lam.imag, -lam.real))]


def classify(params: ModelParams, coords, kind: EqKind, degenerate: bool = False
             ) -> EquilibriumPoint:
    """Eigenvalues, manifold dimensions and stability class of an equilibrium.

    Interior points also get the Routh-Hurwitz verdict, which must agree with
    the eigenvalue verdict whenever the point is hyperbolic.
    """
    coords = np.array(coords, dtype=np.float64)
    res = np.max(np.abs(rhs(params, coords)))
    if res >= RESIDUAL_TOL:
        raise PreconditionError(f"rhs residual {res:.3g} at {coords} is not an equilibrium")
    lam = _order_eigs(np.linalg.eigvals(jacobian(params, coords)).astype(complex))
    stable_dim = int(np.sum(lam.real < -HYPERBOLIC_TOL))
    unstable_dim = int(np.sum(lam.real > HYPERBOLIC_TOL))
    if degenerate or stable_dim + unstable_dim < 3:
        stability = Stability.NON_HYPERBOLIC
    elif unstable_dim == 0:
        stability = Stability.STABLE
    elif stable_dim == 0:
        stability = Stability.UNSTABLE
    else:
        stability = Stability.SADDLE
    rh = None
    if kind in (EqKind.INTERIOR_LOWER, EqKind.INTERIOR_UPPER):
        rh = char_coeffs(params, coords).routh_hurwitz_stable()
        if stability is not Stability.NON_HYPERBOLIC and rh != (stability is Stability.STABLE):
            raise RuntimeError(
                f"Routh-Hurwitz ({rh}) disagrees with eigenvalues {lam} at {coords}")
    return EquilibriumPoint(coords, kind, lam, stability, stable_dim, unstable_dim, rh,
                            degenerate)


def trivial_axial(params: ModelParams) -> list[EquilibriumPoint]:
    return [classify(params, (0.0, 0.0, 0.0), EqKind.TRIVIAL),
            classify(params, (1.0, 0.0, 0.0), EqKind.AXIAL)]


def boundary_point(params: ModelParams) -> tuple[float, float] | None:
    """``(x_b, y_b)`` of the predator-free-top equilibrium, or None."""
    f1, d1 = params.f1, params.d1
    if not d1 < min(f1(1.0), f1.asymptote()):
        return None
    xb = f1.inverse(d1)
    return xb, xb * (1.0 - xb) / d1


def boundary_equilibrium(params: ModelParams) -> EquilibriumPoint | None:
    b = boundary_point(params)
    if b is None:
        return None
    return classify(params, (b[0], b[1], 0.0), EqKind.BOUNDARY)


def y_star(params: ModelParams, d2: float | None = None) -> float | None:
    """Intermediate-predator level of every interior equilibrium: f2(y) = d2."""
    d2 = params.d2 if d2 is None else d2
    try:
        return params.f2.inverse(d2)
    except NoSolutionError:
        return None


def critical_x(params: ModelParams, ys: float) -> float:
    """Maximiser of ``g(x) = 1 - x - ys * f1~(x)`` on [0, 1].

    ``g`` is concave, so this is where ``ys * f1~'(x) = -1`` (or an endpoint).
    """
    f1 = params.f1

    def gp(x):
        return -1.0 - ys * f1.tilde_deriv(x)

    if gp(0.0) <= 0.0:
        return 0.0
    if gp(1.0) >= 0.0:
        return 1.0
    return brentq(gp, 0.0, 1.0, xtol=X_TOL, rtol=4 * np.finfo(float).eps, maxiter=500)


def _x_roots(params: ModelParams, ys: float) -> tuple[list[float], float, float]:
    f1 = params.f1

    def g(x):
        return 1.0 - x - ys * f1.tilde(x)

    xc = critical_x(params, ys)
    gmax = g(xc)
    roots: list[float] = []
    if abs(gmax) < 1e-10:
        return [xc], xc, gmax
    if gmax < 0.0:
        return roots, xc, gmax
    if xc > 0.0 and g(0.0) < 0.0:
        roots.append(brentq(g, 0.0, xc, xtol=X_TOL, rtol=4 * np.finfo(float).eps))
    if xc < 1.0:
        roots.append(brentq(g, xc, 1.0, xtol=X_TOL, rtol=4 * np.finfo(float).eps))
    # guard against responses violating the convexity assumptions
    grid = np.linspace(0.0, 1.0, GUARD_GRID + 1)[1:]
    vals = np.array([g(x) for x in grid])
    for a, b, ga, gb in zip(grid, grid[1:], vals, vals[1:]):
        if ga * gb < 0.0 and not any(a <= r <= b for r in roots):
            roots.append(brentq(g, a, b, xtol=X_TOL))
    return sorted(roots), xc, gmax


def interior_equilibria(params: ModelParams) -> list[EquilibriumPoint]:
    """All feasible coexistence equilibria, lowest ``x`` first."""
    ys = y_star(params)
    if ys is None:
        return []
    f1, f2, d1 = params.f1, params.f2, params.d1
    roots, xc, gmax = _x_roots(params, ys)
    degenerate = abs(gmax) < 1e-10
    out = []
    for x in roots:
        if not f1(x) - d1 > 1e-12:
            continue
        z = (f1(x) - d1) / f2.tilde(ys)
        kind = EqKind.INTERIOR_LOWER if ys * f1.tilde_deriv(x) < -1.0 else EqKind.INTERIOR_UPPER
        out.append(classify(params, (x, ys, z), kind, degenerate=degenerate))
    return out


def upper_interior(params: ModelParams) -> EquilibriumPoint | None:
    for e in interior_equilibria(params):
        if e.kind is EqKind.INTERIOR_UPPER:
            return e
    return None


def all_equilibria(params: ModelParams) -> list[EquilibriumPoint]:
    eqs = trivial_axial(params)
    b = boundary_equilibrium(params)
    if b is not None:
        eqs.append(b)
    return eqs + interior_equilibria(params)


def interior_coeffs(params: ModelParams, point: EquilibriumPoint) -> CharCoeffs:
    return char_coeffs(params, point.coords)
