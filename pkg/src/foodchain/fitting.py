"""Least-squares transfer of one functional-response family onto another.

Parameters are optimised in log space, so every accepted iterate is a pair of
positive numbers and the fitted response automatically satisfies the
saturating/concave axioms.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .model import DomainError, Kind, ResponseSpec

STEP_TOL = 1e-10
SSE_RTOL = 1e-12
MAX_ITER = 500
N_MULTISTART = 16


class FitError(RuntimeError):
    """Damped Gauss-Newton did not converge; ``best`` holds the best iterate."""

    def __init__(self, msg: str, best: FitResult):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True)
class FitProblem:
    target: ResponseSpec
    family: Kind
    domain: tuple[float, float] = (0.0, 1.0)
    n_samples: int = 101
    init: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Kind(self.family))
        lo, hi = (float(v) for v in self.domain)
        if not (0.0 <= lo < hi and math.isfinite(hi)):
            raise DomainError(f"domain must satisfy 0 <= lo < hi, got {self.domain}")
        object.__setattr__(self, "domain", (lo, hi))
        if int(self.n_samples) != self.n_samples or self.n_samples < 10:
            raise DomainError("n_samples must be an integer >= 10")
        if self.init is not None and not all(v > 0 for v in self.init):
            raise DomainError("init parameters must be positive")

    def samples(self) -> np.ndarray:
        """Uniform grid ``lo + (hi - lo) i / n`` for ``i = 1..n``."""
        lo, hi = self.domain
        i = np.arange(1, self.n_samples + 1)
        return lo + (hi - lo) * i / self.n_samples

    def target_values(self) -> np.ndarray:
        return np.array([self.target(u) for u in self.samples()])

    def default_init(self) -> tuple[float, float]:
        """Match the target's asymptote and initial slope."""
        top = self.target.asymptote()
        slope = self.target.initial_slope()
        if self.family is Kind.IVLEV:
            return top, slope / top
        # Holling: p1 is the initial slope, p1 / p2 the asymptote
        return slope, slope / top


@dataclass
class FitResult:
    fitted: ResponseSpec
    sse: float
    sup_err: float
    iterations: int
    converged: bool = True
    history: list[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {"fitted": self.fitted.to_dict(), "sse": self.sse, "sup_err": self.sup_err,
                "iterations": self.iterations, "converged": self.converged}


def family_values(kind: Kind, p1: float, p2: float, u: np.ndarray) -> np.ndarray:
    if kind is Kind.HOLLING2:
        return p1 * u / (1.0 + p2 * u)
    return -p1 * np.expm1(-p2 * u)


def residuals(kind: Kind, theta: np.ndarray, u: np.ndarray, target: np.ndarray) -> np.ndarray:
    p1, p2 = np.exp(theta)
    return family_values(kind, p1, p2, u) - target


def residual_jacobian(kind: Kind, theta: np.ndarray, u: np.ndarray) -> np.ndarray:
    """d r / d(log p1, log p2), shape (n, 2)."""
    p1, p2 = np.exp(theta)
    J = np.empty((u.size, 2))
    if kind is Kind.HOLLING2:
        q = 1.0 + p2 * u
        J[:, 0] = p1 * u / q
        J[:, 1] = -p1 * p2 * u * u / (q * q)
    else:
        e = np.exp(-p2 * u)
        J[:, 0] = p1 * (1.0 - e)
        J[:, 1] = p1 * p2 * u * e
    return J


def _gauss_newton(problem: FitProblem, start: tuple[float, float], max_iter: int = MAX_ITER
                  ) -> FitResult:
    kind = problem.family
    u = problem.samples()
    t = problem.target_values()
    theta = np.log(np.asarray(start, dtype=np.float64))
    r = residuals(kind, theta, u, t)
    sse = float(r @ r)
    lam = 1e-3
    history = [sse]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = residual_jacobian(kind, theta, u)
        g = J.T @ r
        A = J.T @ J
        accepted = False
        while lam < 1e16:
            step = -np.linalg.solve(A + lam * np.diag(np.diag(A) + 1e-300), g)
            r_new = residuals(kind, theta + step, u, t)
            sse_new = float(r_new @ r_new)
            if np.isfinite(sse_new) and sse_new <= sse:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            converged = True  # no descent direction left: stationary point
            break
        lam = max(lam / 10.0, 1e-15)
        improvement = sse - sse_new
        theta = theta + step
        r, sse = r_new, sse_new
        history.append(sse)
        if np.linalg.norm(step) < STEP_TOL or improvement <= SSE_RTOL * max(sse, 1e-300) \
                or sse == 0.0:
            converged = True
            break
    p1, p2 = np.exp(theta)
    res = FitResult(ResponseSpec(kind, p1, p2), sse, float(np.max(np.abs(r))), it, converged,
                    history)
    if not converged:
        raise FitError(f"no convergence after {max_iter} iterations", res)
    return res


def _better(a: FitResult, b: FitResult) -> bool:
    ka = (a.sse, a.fitted.p1, a.fitted.p2)
    kb = (b.sse, b.fitted.p1, b.fitted.p2)
    return ka < kb


def fit(problem: FitProblem, multistart: bool = False, threads: int = 1,
        seed: int = 0) -> FitResult:
    """Damped Gauss-Newton fit of ``problem.family`` to ``problem.target``.

    With ``multistart`` the default start is joined by 16 log-uniform starts
    spanning two decades around it; the lowest-sse result wins (ties broken
    by the parameter pair).  The default-start run is always included.
    """
    start = problem.init if problem.init is not None else problem.default_init()
    best = _gauss_newton(problem, start)
    if not multistart:
        return best
    rng = np.random.default_rng(seed)
    starts = np.exp(np.log(start) + rng.uniform(-math.log(10), math.log(10),
                                                size=(N_MULTISTART, 2)))

    def run(s):
        try:
            return _gauss_newton(problem, tuple(s))
        except FitError as exc:
            return exc.best

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(s) for s in starts]
    for r in results:
        if r.converged and _better(r, best):
            best = r
    return best


def grid_search(problem: FitProblem, n: int = 200, span: float = 10.0) -> FitResult:
    """Independent optimiser: log grid around the default start, then Nelder-Mead.

    The grid covers ``[start / span, start * span]`` in each parameter.
    """
    from scipy.optimize import minimize

    kind = problem.family
    u = problem.samples()
    t = problem.target_values()
    s1, s2 = problem.default_init()
    g1 = np.geomspace(s1 / span, s1 * span, n)
    g2 = np.geomspace(s2 / span, s2 * span, n)
    P1, P2, U = g1[:, None, None], g2[None, :, None], u[None, None, :]
    if kind is Kind.HOLLING2:
        vals = P1 * U / (1.0 + P2 * U)
    else:
        vals = -P1 * np.expm1(-P2 * U)
    sse = ((vals - t) ** 2).sum(axis=2)
    i, j = np.unravel_index(np.argmin(sse), sse.shape)

    def obj(th):
        r = residuals(kind, th, u, t)
        return float(r @ r)

    opt = minimize(obj, np.log([g1[i], g2[j]]), method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-20, "maxiter": 20000, "maxfev": 40000})
    p1, p2 = np.exp(opt.x)
    r = residuals(kind, opt.x, u, t)
    return FitResult(ResponseSpec(kind, p1, p2), float(r @ r), float(np.max(np.abs(r))),
                     int(opt.nit), bool(opt.success))
