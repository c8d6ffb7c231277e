"""Functional responses and the three-species food-chain vector field.

The model is

    x' = x - x^2 - f1(x) y
    y' = f1(x) y - d1 y - f2(y) z
    z' = f2(y) z - d2 z

with saturating, concave responses ``f1`` and ``f2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any

import numpy as np

from . import kernels


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class NoSolutionError(ValueError):
    """A requested inverse or root does not exist."""


class PreconditionError(ValueError):
    """Input does not satisfy an operation's precondition."""


class Kind(str, Enum):
    HOLLING2 = "holling2"
    IVLEV = "ivlev"

    @property
    def code(self) -> int:
        return 0 if self is Kind.HOLLING2 else 1


def _check_u(u: float) -> float:
    u = float(u)
    if not u >= 0.0:  # also rejects nan
        raise DomainError(f"response argument must be >= 0, got {u!r}")
    return u


@dataclass(frozen=True)
class ResponseSpec:
    """A functional response ``Holling2: p1 u / (1 + p2 u)`` or
    ``Ivlev: p1 (1 - exp(-p2 u))``."""

    kind: Kind
    p1: float
    p2: float

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        for name in ("p1", "p2"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0.0):
                raise DomainError(f"{name} must be a positive finite number, got {v!r}")
            object.__setattr__(self, name, v)

    @classmethod
    def holling2(cls, a: float, b: float) -> ResponseSpec:
        return cls(Kind.HOLLING2, a, b)

    @classmethod
    def ivlev(cls, a: float, b: float) -> ResponseSpec:
        return cls(Kind.IVLEV, a, b)

    # -- evaluation -------------------------------------------------------
    def eval(self, u: float) -> float:
        u = _check_u(u)
        return kernels.resp(self.kind.code, self.p1, self.p2, u)

    __call__ = eval

    def deriv(self, u: float) -> float:
        u = _check_u(u)
        return kernels.resp_d1(self.kind.code, self.p1, self.p2, u)

    def deriv2(self, u: float) -> float:
        u = _check_u(u)
        return kernels.resp_d2(self.kind.code, self.p1, self.p2, u)

    def asymptote(self) -> float:
        if self.kind is Kind.HOLLING2:
            return self.p1 / self.p2
        return self.p1

    def initial_slope(self) -> float:
        """Limit of ``eval(u) / u`` as ``u -> 0``."""
        if self.kind is Kind.HOLLING2:
            return self.p1
        return self.p1 * self.p2

    def tilde(self, u: float) -> float:
        """Per-prey intensity ``eval(u) / u``, continuously extended at 0."""
        u = _check_u(u)
        a, b = self.p1, self.p2
        if self.kind is Kind.HOLLING2:
            return a / (1.0 + b * u)
        bu = b * u
        if bu < 1e-8:
            return a * b * (1.0 - 0.5 * bu + bu * bu / 6.0)
        return -a * math.expm1(-bu) / u

    def tilde_deriv(self, u: float) -> float:
        u = _check_u(u)
        a, b = self.p1, self.p2
        if self.kind is Kind.HOLLING2:
            q = 1.0 + b * u
            return -a * b / (q * q)
        bu = b * u
        if bu < 1e-4:
            # series of (f'(u) u - f(u)) / u^2 about 0
            return a * b * b * (-0.5 + bu / 3.0 - bu * bu / 8.0)
        return (self.deriv(u) * u - self.eval(u)) / (u * u)

    def inverse(self, v: float) -> float:
        """The unique ``u > 0`` with ``eval(u) == v``."""
        v = float(v)
        top = self.asymptote()
        if not (0.0 < v < top):
            raise NoSolutionError(f"{v!r} is outside the open range (0, {top!r})")
        a, b = self.p1, self.p2
        if self.kind is Kind.HOLLING2:
            return v / (a - b * v)
        return -math.log1p(-v / a) / b

    # -- serialisation ----------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "p1": self.p1, "p2": self.p2}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ResponseSpec:
        _require_keys(d, {"kind", "p1", "p2"}, "response")
        try:
            kind = Kind(str(d["kind"]).lower())
        except ValueError:
            raise DomainError(f"unknown response kind {d['kind']!r}") from None
        return cls(kind, _number(d["p1"], "p1"), _number(d["p2"], "p2"))


def invert_bracketed(f, v: float, lo: float = 0.0, hi: float = 1.0, tol: float = 1e-12,
                     max_expand: int = 200) -> float:
    """Bisection fallback for ``f(u) = v`` with ``f`` increasing and ``f(lo) < v``."""
    while f(hi) <= v:
        lo, hi = hi, 2.0 * hi
        max_expand -= 1
        if max_expand < 0:
            raise NoSolutionError("could not bracket the preimage")
    for _ in range(2000):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):  # interval exhausted at floating-point resolution
            break
        if f(mid) < v:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _require_keys(d: Any, keys: set[str], what: str, optional: set[str] = frozenset()):
    if not isinstance(d, dict):
        raise DomainError(f"{what} must be a JSON object")
    extra = set(d) - keys - set(optional)
    if extra:
        raise DomainError(f"unknown keys in {what}: {sorted(extra)}")
    missing = keys - set(d)
    if missing:
        raise DomainError(f"missing keys in {what}: {sorted(missing)}")


def _number(v: Any, name: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DomainError(f"{name} must be a number, got {v!r}")
    return float(v)


@dataclass(frozen=True)
class ModelParams:
    f1: ResponseSpec
    f2: ResponseSpec
    d1: float
    d2: float

    def __post_init__(self):
        for name in ("d1", "d2"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0.0):
                raise DomainError(f"{name} must be a positive finite number, got {v!r}")
            object.__setattr__(self, name, v)

    def with_d2(self, d2: float) -> ModelParams:
        return replace(self, d2=d2)

    def packed(self) -> np.ndarray:
        """Flat parameter vector consumed by :mod:`foodchain.kernels`."""
        return np.array([
            self.f1.kind.code, self.f1.p1, self.f1.p2,
            self.f2.kind.code, self.f2.p1, self.f2.p2,
            self.d1, self.d2,
        ], dtype=np.float64)

    def to_dict(self) -> dict[str, Any]:
        return {"f1": self.f1.to_dict(), "f2": self.f2.to_dict(),
                "d1": self.d1, "d2": self.d2}

    @classmethod
    def from_dict(cls, d: dict[str, Any], d2_default: float | None = None) -> ModelParams:
        _require_keys(d, {"f1", "f2", "d1"}, "model", optional={"d2"})
        d2 = d.get("d2", d2_default)
        if d2 is None:
            raise DomainError("model is missing d2")
        return cls(ResponseSpec.from_dict(d["f1"]), ResponseSpec.from_dict(d["f2"]),
                   _number(d["d1"], "d1"), _number(d2, "d2"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> ModelParams:
        return cls.from_dict(json.loads(text))


# Reference parameter sets (d2 is the bifurcation parameter; 0.1 is a
# placeholder inside the studied range).
HOLLING_DEFAULT = ModelParams(ResponseSpec.holling2(4.98, 6.2),
                             ResponseSpec.holling2(0.46, 2.0), d1=0.4, d2=0.1)
IVLEV_DEFAULT = ModelParams(ResponseSpec.ivlev(0.67, 5.349),
                           ResponseSpec.ivlev(0.1647, 2.457), d1=0.4, d2=0.1)


def as_state(s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64).reshape(3)
    if not np.all(s >= 0.0):
        raise DomainError(f"state components must be >= 0, got {s}")
    return s


def rhs(params: ModelParams, s) -> np.ndarray:
    s = as_state(s)
    out = np.empty(3)
    kernels.field(0, params.packed(), s, out)
    return out


def jacobian(params: ModelParams, s) -> np.ndarray:
    s = as_state(s)
    J = np.empty((3, 3))
    kernels.jacobian_into(params.packed(), s[0], s[1], s[2], J)
    return J


@dataclass(frozen=True)
class CharCoeffs:
    """``lambda^3 + P2 lambda^2 + P1 lambda + P0`` at an interior equilibrium."""

    P2: float
    P1: float
    P0: float

    @property
    def delta(self) -> float:
        return self.P1 * self.P2 - self.P0

    def routh_hurwitz_stable(self) -> bool:
        return bool(self.P2 > 0.0 and self.P0 > 0.0 and self.P1 * self.P2 > self.P0)

    def __call__(self, lam):
        return lam ** 3 + self.P2 * lam ** 2 + self.P1 * lam + self.P0


def char_coeffs(params: ModelParams, e, tol: float = 1e-9) -> CharCoeffs:
    e = as_state(e)
    if np.max(np.abs(rhs(params, e))) >= tol or np.any(e <= 0.0):
        raise PreconditionError(f"{e} is not an interior equilibrium")
    x, y, z = e
    f1, f2, d1, d2 = params.f1, params.f2, params.d1, params.d2
    A = 1.0 - 2.0 * x - y * f1.deriv(x)
    B = f1(x) - d1 - z * f2.deriv(y)
    P2 = -(A + B)
    P1 = A * B + y * f1(x) * f1.deriv(x) + d2 * z * f2.deriv(y)
    P0 = -d2 * z * f2.deriv(y) * A
    return CharCoeffs(P2, P1, P0)


AXIOM_GRID = (0.0, 1e-4, 1e-2, 0.1, 0.5, 1.0, 5.0, 50.0)


def check_response(spec: ResponseSpec, grid=AXIOM_GRID) -> list[str]:
    """Violations of the response axioms and per-prey-intensity assumptions.

    Returns human-readable messages; an empty list means every check passed.
    """
    bad = []
    if spec.eval(0.0) != 0.0:
        bad.append(f"f(0) = {spec.eval(0.0)!r} != 0")
    if not math.isfinite(spec.asymptote()):
        bad.append("asymptote is not finite")
    for u in grid:
        if not spec.deriv(u) > 0.0:
            bad.append(f"f'({u}) = {spec.deriv(u)!r} is not > 0")
        if not spec.deriv2(u) < 0.0:
            bad.append(f"f''({u}) = {spec.deriv2(u)!r} is not < 0")
        if not spec.tilde(u) > 0.0:
            bad.append(f"f~({u}) = {spec.tilde(u)!r} is not > 0")
        if not spec.tilde_deriv(u) < 0.0:
            bad.append(f"f~'({u}) = {spec.tilde_deriv(u)!r} is not < 0")
    # convexity of the intensity via second differences on the sorted grid
    g = sorted(grid)
    for u0, u1, u2 in zip(g, g[1:], g[2:]):
        t0, t1, t2 = spec.tilde(u0), spec.tilde(u1), spec.tilde(u2)
        lam = (u1 - u0) / (u2 - u0)
        if not t1 < (1.0 - lam) * t0 + lam * t2:
            bad.append(f"f~ is not convex on [{u0}, {u2}]")
    if not spec.tilde(g[-1]) < 0.05 * spec.initial_slope():
        bad.append(f"f~({g[-1]}) does not decay towards 0")
    return bad
