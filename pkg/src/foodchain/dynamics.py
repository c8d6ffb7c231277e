"""Trajectories, attractors, Lyapunov exponents and periodic orbits.

All time stepping goes through the Dormand-Prince kernels in
:mod:`foodchain.kernels`.  Periodic orbits are computed by Newton shooting on
a Poincare section and followed in ``d2`` by natural-parameter continuation.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterator, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.spatial import cKDTree

from . import kernels
from .bifurcation import Criticality
from .equilibria import (EquilibriumPoint, Stability, all_equilibria, boundary_point,
                         upper_interior, y_star)
from .model import DomainError, ModelParams, PreconditionError, as_state

log = logging.getLogger(__name__)

MAX_STEPS = 50_000_000
MAXIMA_CAPACITY = 200_000
MERGE_TOL = 1e-4
CHAOS_THRESHOLD = 0.005
EXTINCTION_THRESHOLD = 1e-6
EQUILIBRIUM_RANGE = 1e-6
LYAP_WARMUP = 100.0

CYCLE_RTOL = 1e-11
CYCLE_ATOL = 1e-13
NEWTON_TOL = 1e-8
FD_STEP = 1e-7


class IntegrationError(RuntimeError):
    """Step size underflow or step budget exhausted."""


class RecurrenceError(RuntimeError):
    """The trajectory did not return to a Poincare section."""


class CycleNotFoundError(RuntimeError):
    """Newton shooting failed to converge to a periodic orbit."""


def _check(status: int, what: str):
    if status == kernels.STEP_UNDERFLOW:
        raise IntegrationError(f"{what}: step size fell below {kernels.H_MIN} (stiffness?)")
    if status == kernels.MAX_STEPS:
        raise IntegrationError(f"{what}: step budget exhausted")


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-9
    atol: float = 1e-11
    max_step: float = 0.5
    t_transient: float = 5000.0
    t_window: float = 3000.0

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.max_step > 0):
            raise DomainError("rtol, atol and max_step must be positive")
        if not (self.t_transient > 0 and self.t_window > 0):
            raise DomainError("t_transient and t_window must be positive")

    def tight(self) -> IntegratorConfig:
        """Tolerances used for shooting and Floquet computations."""
        return replace(self, rtol=min(self.rtol, CYCLE_RTOL), atol=min(self.atol, CYCLE_ATOL))


DEFAULT_CONFIG = IntegratorConfig()


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    _dense: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.times)

    def __call__(self, t):
        """Dense-output state(s) at time(s) ``t`` inside the integration span."""
        t = np.asarray(t, dtype=np.float64)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if np.any(t < self.times[0]) or np.any(t > self.times[-1]):
            raise DomainError("time outside the trajectory span")
        j = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2)
        h = self.times[j + 1] - self.times[j]
        th = ((t - self.times[j]) / h)[:, None]
        rc = self._dense[j]
        t1 = 1.0 - th
        out = rc[:, 0] + th * (rc[:, 1] + t1 * (rc[:, 2] + th * (rc[:, 3] + t1 * rc[:, 4])))
        out = np.maximum(out, 0.0)
        return out[0] if scalar else out

    def sample(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        ts = np.arange(self.times[0], self.times[-1], dt)
        return ts, self(ts)


def integrate(params: ModelParams, ic, t_end: float, cfg: IntegratorConfig = DEFAULT_CONFIG,
              t0: float = 0.0) -> Trajectory:
    y0 = as_state(ic)
    ts, ys, rc, status = kernels.integrate_steps(
        params.packed(), y0, float(t0), float(t_end), cfg.rtol, cfg.atol, cfg.max_step,
        MAX_STEPS)
    _check(status, "integrate")
    return Trajectory(ts, ys, rc)


def advance(params: ModelParams, ic, duration: float, cfg: IntegratorConfig = DEFAULT_CONFIG
            ) -> np.ndarray:
    """Final state after ``duration`` time units (nothing recorded)."""
    y, status, _ = kernels.integrate_final(
        0, params.packed(), as_state(ic), 0.0, float(duration), cfg.rtol, cfg.atol,
        cfg.max_step, MAX_STEPS)
    _check(status, "advance")
    return y


def sample(params: ModelParams, ic, times, cfg: IntegratorConfig = DEFAULT_CONFIG,
           mode: int = 0) -> np.ndarray:
    """States at the sorted ``times`` starting from ``ic`` at t = 0."""
    y0 = np.asarray(ic, dtype=np.float64)
    out, status = kernels.integrate_sample(
        mode, params.packed(), y0, 0.0, np.asarray(times, dtype=np.float64), cfg.rtol,
        cfg.atol, cfg.max_step, MAX_STEPS)
    _check(status, "sample")
    return out


# ---------------------------------------------------------------------------
# attractors


class AttractorKind(str, Enum):
    EQUILIBRIUM = "equilibrium"
    PERIODIC = "periodic"
    CHAOTIC = "chaotic"
    BOUNDARY_EXTINCTION = "boundary_extinction"
    ERROR = "error"


def cluster_values(values, tol: float = MERGE_TOL) -> np.ndarray:
    """Merge sorted values whose gaps are <= ``tol``; returns cluster means."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        return v
    breaks = np.flatnonzero(np.diff(v) > tol) + 1
    return np.array([g.mean() for g in np.split(v, breaks)])


@dataclass
class AttractorSummary:
    d2: float
    kind: AttractorKind
    k: int | None
    x_maxima: np.ndarray
    y_maxima: np.ndarray
    z_maxima: np.ndarray
    lyap_max: float
    min_z: float
    window_start: np.ndarray
    final_state: np.ndarray
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "d2": self.d2, "kind": self.kind.value, "k": self.k,
            "lyap_max": self.lyap_max, "min_z": self.min_z,
            "x_maxima": self.x_maxima.tolist(), "y_maxima": self.y_maxima.tolist(),
            "z_maxima": self.z_maxima.tolist(), "error": self.error,
        }


@dataclass
class _Window:
    start: np.ndarray
    end: np.ndarray
    maxima: list[np.ndarray]
    lo: np.ndarray
    hi: np.ndarray
    lyap: float


def _scan(params: ModelParams, y0, cfg: IntegratorConfig, lyap: bool, t_window: float | None = None,
          tau: float = 1.0) -> _Window:
    t_window = cfg.t_window if t_window is None else t_window
    yend, mx, counts, lo, hi, lsum, nren, status = kernels.window_scan(
        params.packed(), np.asarray(y0, dtype=np.float64), 0.0, float(t_window), cfg.rtol,
        cfg.atol, cfg.max_step, MAX_STEPS, lyap, tau, LYAP_WARMUP if lyap else 0.0,
        MAXIMA_CAPACITY)
    _check(status, "window scan")
    exponent = lsum / (nren * tau) if nren else float("nan")
    return _Window(np.array(y0, dtype=np.float64), yend,
                   [mx[i, :counts[i]].copy() for i in range(3)], lo, hi, exponent)


def attractor_summary(params: ModelParams, ic, cfg: IntegratorConfig = DEFAULT_CONFIG
                      ) -> AttractorSummary:
    """Classify the attractor reached from ``ic``.

    After ``t_transient`` the window collects local maxima of each variable,
    the component ranges and the largest Lyapunov exponent.  A window whose
    minimum ``z`` is below the extinction threshold is confirmed by a second
    window before extinction is declared.
    """
    y = advance(params, ic, cfg.t_transient, cfg)
    w = _scan(params, y, cfg, lyap=True)
    if w.lo[2] < EXTINCTION_THRESHOLD:
        w2 = _scan(params, w.end, cfg, lyap=True)
        if w2.hi[2] < EXTINCTION_THRESHOLD:
            return _summary(params.d2, AttractorKind.BOUNDARY_EXTINCTION, None, w2)
        w = w2
    ranges = w.hi - w.lo
    if np.max(ranges) < EQUILIBRIUM_RANGE or _near_stable_equilibrium(params, w.end):
        return _summary(params.d2, AttractorKind.EQUILIBRIUM, None, w)
    if w.lyap > CHAOS_THRESHOLD:
        return _summary(params.d2, AttractorKind.CHAOTIC, None, w)
    k = len(cluster_values(w.maxima[2]))
    return _summary(params.d2, AttractorKind.PERIODIC, max(k, 1), w)


def _near_stable_equilibrium(params: ModelParams, s, tol: float = 1e-4) -> bool:
    """True if ``s`` is within ``tol`` of an asymptotically stable equilibrium.

    This catches slowly spiralling approaches (weakly damped foci near a
    Hopf threshold) whose window ranges are still far above round-off.
    """
    for e in all_equilibria(params):
        if e.stability is Stability.STABLE and np.linalg.norm(s - e.coords) < tol:
            return True
    return False


def _summary(d2: float, kind: AttractorKind, k, w: _Window) -> AttractorSummary:
    return AttractorSummary(
        d2, kind, k, cluster_values(w.maxima[0]), cluster_values(w.maxima[1]),
        cluster_values(w.maxima[2]), float(w.lyap), float(w.lo[2]), w.start, w.end)


def lyapunov_max(params: ModelParams, ic, cfg: IntegratorConfig = DEFAULT_CONFIG,
                 tau: float = 1.0, min_renorm: int = 2000) -> float:
    """Largest Lyapunov exponent by tangent-vector renormalisation."""
    y = advance(params, ic, cfg.t_transient, cfg)
    t_window = max(cfg.t_window, min_renorm * tau + LYAP_WARMUP + tau)
    return _scan(params, y, cfg, lyap=True, t_window=t_window, tau=tau).lyap


@dataclass(frozen=True)
class ExtinctionVerdict:
    extinct: bool
    time: float | None
    min_z_final: float

    def to_dict(self) -> dict[str, Any]:
        return {"verdict": "extinct" if self.extinct else "coexistent",
                "time": self.time, "min_z_final_window": self.min_z_final}


def extinction(params: ModelParams, ic, cfg: IntegratorConfig = DEFAULT_CONFIG,
               threshold: float = EXTINCTION_THRESHOLD) -> ExtinctionVerdict:
    """Integrate from ``ic`` and decide whether the top predator dies out.

    Extinction time is the last time ``z`` was at or above ``threshold``;
    extinction must persist for at least one ``t_window`` before the end.
    """
    t_end = cfg.t_transient + cfg.t_window
    traj = integrate(params, ic, t_end, cfg)
    for _ in range(8):
        z = traj.states[:, 2]
        above = np.flatnonzero(z >= threshold)
        final = traj.times >= traj.times[-1] - cfg.t_window
        min_final = float(z[final].min())
        if above.size and above[-1] == len(z) - 1:
            return ExtinctionVerdict(False, None, min_final)
        j = above[-1] if above.size else 0
        t_ext = float(traj.times[j])
        if traj.times[-1] - t_ext >= cfg.t_window:
            return ExtinctionVerdict(True, t_ext, min_final)
        more = integrate(params, traj.states[-1], traj.times[-1] + cfg.t_window, cfg,
                         t0=traj.times[-1])
        traj = Trajectory(np.concatenate([traj.times, more.times[1:]]),
                          np.concatenate([traj.states, more.states[1:]]),
                          np.concatenate([traj._dense, more._dense]))
    raise IntegrationError("extinction could not be confirmed")


# ---------------------------------------------------------------------------
# Poincare sections and periodic orbits


@dataclass(frozen=True)
class Section:
    """The plane ``normal . s = offset`` crossed in ``direction`` (+1/-1/0)."""

    normal: np.ndarray
    offset: float
    direction: int = 1

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        if not np.linalg.norm(n) > 0:
            raise DomainError("section normal must be nonzero")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def y_level(cls, y: float, direction: int = 1) -> Section:
        return cls(np.array([0.0, 1.0, 0.0]), y, direction)

    def value(self, s) -> float:
        return float(self.normal @ np.asarray(s, dtype=np.float64)[:3] - self.offset)

    @property
    def _frame(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.normal / np.linalg.norm(self.normal)
        origin = self.offset * self.normal / (self.normal @ self.normal)
        cand = [e - (e @ n) * n for e in np.eye(3)]
        order = sorted(range(3), key=lambda i: -np.linalg.norm(cand[i]))
        b1 = cand[order[0]] / np.linalg.norm(cand[order[0]])
        b2 = cand[order[1]] - (cand[order[1]] @ b1) * b1
        b2 /= np.linalg.norm(b2)
        if order[0] > order[1]:
            b1, b2 = b2, b1
        return origin, np.array([b1, b2])

    def coords(self, s) -> np.ndarray:
        origin, basis = self._frame
        return basis @ (np.asarray(s, dtype=np.float64)[:3] - origin)

    def point(self, c) -> np.ndarray:
        origin, basis = self._frame
        return origin + basis.T @ np.asarray(c, dtype=np.float64)


def poincare_return(params: ModelParams, section: Section, s, direction: int | None = None,
                    cfg: IntegratorConfig = DEFAULT_CONFIG, t_min: float = 1e-6
                    ) -> tuple[np.ndarray, float]:
    """Next crossing of ``section`` from ``s`` (which must lie on it)."""
    s = np.asarray(s, dtype=np.float64)
    if abs(section.value(s)) > 1e-9 * max(1.0, np.linalg.norm(section.normal)):
        raise PreconditionError("starting point is not on the section")
    return _crossing(params, section, s, cfg, direction, t_min)


def _crossing(params, section, s, cfg, direction=None, t_min=1e-6, mode=0):
    direction = section.direction if direction is None else direction
    y, t, status = kernels.next_crossing(
        mode, params.packed(), np.asarray(s, dtype=np.float64), 0.0, section.normal,
        section.offset, int(direction), 10.0 * cfg.t_window, t_min, cfg.rtol, cfg.atol,
        cfg.max_step, MAX_STEPS)
    if status == kernels.NO_CROSSING:
        raise RecurrenceError(f"no return to the section within {10.0 * cfg.t_window}")
    _check(status, "poincare return")
    return y, t


class CycleStability(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


@dataclass
class LimitCycle:
    anchor: np.ndarray
    period: float
    floquet: np.ndarray
    stability: CycleStability
    samples: np.ndarray
    d2: float
    section: Section
    residual: float
    iterations: int = 0
    transverse_exponent: float | None = None

    @property
    def trivial_multiplier(self) -> complex:
        return complex(self.floquet[np.argmin(np.abs(self.floquet - 1.0))])

    @property
    def amplitude(self) -> float:
        return float(0.5 * np.linalg.norm(self.samples.max(0) - self.samples.min(0)))

    @property
    def min_z(self) -> float:
        return float(self.samples[:, 2].min())

    def to_dict(self) -> dict[str, Any]:
        d = {
            "d2": self.d2,
            "anchor": self.anchor.tolist(),
            "period": self.period,
            "floquet": [[float(m.real), float(m.imag)] for m in self.floquet],
            "stability": self.stability.value,
            "residual": self.residual,
            "amplitude": self.amplitude,
            "section": {"normal": self.section.normal.tolist(), "offset": self.section.offset,
                        "direction": self.section.direction},
            "samples": self.samples.tolist(),
        }
        if self.transverse_exponent is not None:
            d["transverse_exponent"] = self.transverse_exponent
        return d


def monodromy(params: ModelParams, anchor, period: float, cfg: IntegratorConfig) -> np.ndarray:
    y0 = np.concatenate([np.asarray(anchor, dtype=np.float64), np.eye(3).ravel()])
    y, status, _ = kernels.integrate_final(
        2, params.packed(), y0, 0.0, float(period), cfg.rtol, cfg.atol, cfg.max_step,
        MAX_STEPS)
    _check(status, "monodromy")
    return y[3:].reshape(3, 3)


def find_cycle(params: ModelParams, guess, section: Section,
               cfg: IntegratorConfig = DEFAULT_CONFIG, max_iter: int = 50,
               n_samples: int = 2000, tol: float = NEWTON_TOL) -> LimitCycle:
    """Periodic orbit through ``section`` near ``guess`` by Newton shooting.

    The unknowns are the two in-plane coordinates of the anchor; the
    Jacobian of the return-map displacement is built by forward differences.
    """
    cfg_t = cfg.tight()
    c = section.coords(guess)

    def displacement(cc):
        s = section.point(cc)
        if np.any(s < 0.0):
            raise CycleNotFoundError("iterate left the nonnegative octant")
        y, t = _crossing(params, section, s, cfg_t)
        return section.coords(y) - cc, t

    try:
        F, T = displacement(c)
        for it in range(max_iter + 1):
            nf = np.linalg.norm(F)
            if nf < tol:
                break
            if it == max_iter:
                raise CycleNotFoundError(f"Newton did not converge (|F|={nf:.3g})")
            J = np.empty((2, 2))
            for j in range(2):
                cj = c.copy()
                cj[j] += FD_STEP
                Fj, _ = displacement(cj)
                J[:, j] = (Fj - F) / FD_STEP
            step = -np.linalg.solve(J, F)
            lam = 1.0
            for _ in range(12):
                trial = c + lam * step
                try:
                    Ft, Tt = displacement(trial)
                except (CycleNotFoundError, RecurrenceError):
                    Ft = None
                if Ft is not None and np.linalg.norm(Ft) < nf:
                    break
                lam *= 0.5
            else:
                raise CycleNotFoundError("line search failed")
            c, F, T = trial, Ft, Tt
    except (RecurrenceError, IntegrationError, np.linalg.LinAlgError) as exc:
        raise CycleNotFoundError(str(exc)) from exc

    anchor = section.point(c)
    Phi = monodromy(params, anchor, T, cfg_t)
    mu = np.linalg.eigvals(Phi).astype(complex)
    mu = mu[np.argsort(-np.abs(mu))]
    trivial = np.argmin(np.abs(mu - 1.0))
    if abs(mu[trivial] - 1.0) > 1e-4:
        raise CycleNotFoundError("converged onto an equilibrium (no unit multiplier)")
    others = np.delete(mu, trivial)
    unstable = bool(np.any(np.abs(others) > 1.0 + 1e-6))
    pts = sample(params, anchor, np.linspace(0.0, T, n_samples), cfg_t)
    return LimitCycle(anchor, float(T), mu,
                      CycleStability.UNSTABLE if unstable else CycleStability.STABLE,
                      pts, params.d2, section, float(np.linalg.norm(F)), it)


def cycle_points(params: ModelParams, cycle: LimitCycle, n: int,
                 cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    return sample(params, cycle.anchor, np.linspace(0.0, cycle.period, n), cfg.tight())


# -- Hopf cycles ---------------------------------------------------------------


def _hopf_direction(params: ModelParams, eq: EquilibriumPoint) -> np.ndarray:
    J = np.array(_jac(params, eq.coords))
    lam, V = np.linalg.eig(J)
    i = int(np.argmax(np.abs(lam.imag)))
    if abs(lam[i].imag) == 0.0:
        raise CycleNotFoundError("equilibrium has no oscillatory pair")
    v = V[:, i]
    # direction in the oscillation plane lying in y = y*
    w = v.imag[1] * v.real - v.real[1] * v.imag
    w /= np.linalg.norm(w)
    if (J @ w)[1] < 0.0:
        w = -w
    return w


def _jac(params, s):
    from .model import jacobian
    return jacobian(params, s)


def hopf_cycle(params: ModelParams, eq: EquilibriumPoint | None = None,
               cfg: IntegratorConfig = DEFAULT_CONFIG, radii=None) -> LimitCycle:
    """Small cycle surrounding the upper coexistence equilibrium.

    Newton shooting on the section ``y = y*`` is started from ``E + r w``,
    where ``w`` spans the oscillatory eigenplane within that section, for
    increasing radii ``r`` (both orientations of ``w``).  The first solution
    that is a genuine cycle rather than the equilibrium itself is returned.
    """
    eq = upper_interior(params) if eq is None else eq
    if eq is None:
        raise CycleNotFoundError("no upper coexistence equilibrium")
    E = eq.coords
    w = _hopf_direction(params, eq)
    section = Section.y_level(E[1])
    radii = np.geomspace(1e-3, 0.3, 12) if radii is None else radii
    for r in radii:
        for sgn in (1.0, -1.0):
            guess = E + sgn * r * w
            if np.any(guess < 0.0):
                continue
            try:
                cyc = find_cycle(params, guess, section, cfg)
            except CycleNotFoundError:
                continue
            if cyc.amplitude > 1e-6:
                return cyc
    raise CycleNotFoundError("no cycle found around the equilibrium")


@dataclass
class HopfClassification:
    d2_hopf: float
    criticality: Criticality
    d2_probe: float | None = None
    cycle: LimitCycle | None = None


def classify_hopf(params: ModelParams, d2_hopf: float, delta: float = 5e-4,
                  cfg: IntegratorConfig | None = None) -> HopfClassification:
    """Sub/supercritical from the cycle found ``delta`` away from threshold.

    An unstable cycle around a stable equilibrium means subcritical; a stable
    cycle around an unstable equilibrium means supercritical.  Both sides of
    the threshold are probed.
    """
    cfg = DEFAULT_CONFIG if cfg is None else cfg
    for side in (-1.0, 1.0):
        p = params.with_d2(d2_hopf + side * delta)
        eq = upper_interior(p)
        if eq is None:
            continue
        try:
            cyc = hopf_cycle(p, eq, cfg)
        except CycleNotFoundError:
            continue
        eq_stable = eq.stability is Stability.STABLE
        if cyc.stability is CycleStability.UNSTABLE and eq_stable:
            return HopfClassification(d2_hopf, Criticality.SUB, p.d2, cyc)
        if cyc.stability is CycleStability.STABLE and not eq_stable:
            return HopfClassification(d2_hopf, Criticality.SUPER, p.d2, cyc)
    return HopfClassification(d2_hopf, Criticality.UNDETERMINED)


# -- continuation ----------------------------------------------------------------


@dataclass
class CycleBranch:
    points: list[tuple[float, LimitCycle]]
    terminated: bool
    d2_end: float

    def __iter__(self) -> Iterator[tuple[float, LimitCycle]]:
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def d2_last(self) -> float:
        return self.points[-1][0]


def continue_cycle(params: ModelParams, start: LimitCycle, d2_end: float, step: float = 2e-4,
                   min_step: float = 1e-6, cfg: IntegratorConfig = DEFAULT_CONFIG,
                   max_iter: int = 25, boundary_z: float = 1e-7) -> CycleBranch:
    """Follow a cycle branch in ``d2`` from ``start.d2`` towards ``d2_end``.

    Each step warm-starts Newton from the previous anchor (linearly
    extrapolated once two points exist) on the section ``y = y*(d2)``.  A
    failed step is halved; the branch terminates when the step drops below
    ``min_step``.  A solution touching ``z = 0`` counts as a failure (the
    branch has merged with the planar cycle).
    """
    sign = 1.0 if d2_end > start.d2 else -1.0
    pts = [(start.d2, start)]
    h = step
    while sign * (d2_end - pts[-1][0]) > 1e-14:
        d_prev, c_prev = pts[-1]
        d_new = d_prev + sign * min(h, abs(d2_end - d_prev))
        p = params.with_d2(d_new)
        ys = y_star(p)
        guess = c_prev.anchor.copy()
        if len(pts) >= 2:
            d_pp, c_pp = pts[-2]
            guess = guess + (c_prev.anchor - c_pp.anchor) * (d_new - d_prev) / (d_prev - d_pp)
        ok = ys is not None
        if ok:
            guess[1] = ys
            guess = np.maximum(guess, 0.0)
            try:
                cyc = find_cycle(p, guess, Section.y_level(ys, start.section.direction), cfg,
                                 max_iter=max_iter)
                ok = (cyc.min_z > boundary_z
                      and np.linalg.norm(cyc.anchor - c_prev.anchor) < 0.25
                      and abs(cyc.period - c_prev.period) < 0.5 * c_prev.period)
            except CycleNotFoundError:
                ok = False
        if ok:
            pts.append((d_new, cyc))
            h = min(step, 2.0 * h)
        else:
            h *= 0.5
            if h < min_step:
                log.info("cycle branch terminated near d2=%.6g", d_prev)
                return CycleBranch(pts, True, d_prev)
    return CycleBranch(pts, False, pts[-1][0])


# -- the planar cycle ----------------------------------------------------------


def boundary_cycle(params: ModelParams, cfg: IntegratorConfig = DEFAULT_CONFIG,
                   t_settle: float = 2000.0) -> LimitCycle:
    """Attracting cycle of the predator-free-top plane ``z = 0``.

    Its ``transverse_exponent`` is the period average of ``f2(y) - d2``;
    a negative value means the cycle attracts nearby interior orbits.
    """
    b = boundary_point(params)
    if b is None:
        raise CycleNotFoundError("no boundary equilibrium")
    xb, yb = b
    trace = 1.0 - 2.0 * xb - yb * params.f1.deriv(xb)
    if not trace > 0.0:
        raise CycleNotFoundError("boundary equilibrium is stable within the plane")
    s = advance(params, (xb * 1.05, yb, 0.0), t_settle, cfg)
    section = Section.y_level(yb)
    s, _ = _crossing(params, section, s, cfg, t_min=0.0)
    if np.linalg.norm(s[:2] - np.array([xb, yb])) < 1e-6:
        raise CycleNotFoundError("planar orbit converged to the boundary equilibrium")
    cyc = find_cycle(params, s, section, cfg)
    Phi = monodromy(params, cyc.anchor, cyc.period, cfg.tight())
    cyc.transverse_exponent = float(np.log(Phi[2, 2]) / cyc.period)
    return cyc


def transverse_exponent_quadrature(params: ModelParams, cycle: LimitCycle) -> float:
    """Trapezoidal period average of ``f2(y) - d2`` over the cycle samples."""
    y = cycle.samples[:, 1]
    f = np.array([params.f2(v) for v in y]) - params.d2
    return float(trapezoid(f, dx=cycle.period / (len(y) - 1)) / cycle.period)


# ---------------------------------------------------------------------------
# sweeps and crisis proximity

DEFAULT_SEED = (0.45, 0.5, 0.8)


def sweep(params: ModelParams, d2_grid: Sequence[float], ic_policy: str = "continuation",
          ic=DEFAULT_SEED, cfg: IntegratorConfig = DEFAULT_CONFIG, threads: int = 1
          ) -> list[AttractorSummary]:
    """Attractor summaries along ``d2_grid`` (in the given order).

    ``continuation`` seeds each point with the final state of the previous
    one (re-seeding from ``ic`` after an extinction or error); ``fixed``
    starts every point from ``ic`` and may run on ``threads`` threads.
    """
    if ic_policy not in ("continuation", "fixed"):
        raise DomainError(f"unknown ic policy {ic_policy!r}")
    top = params.f2.asymptote()
    for d in d2_grid:
        if not 0.0 < d < top:
            raise DomainError(f"d2={d} outside (0, {top})")
    seed = as_state(ic)

    def one(d2, start):
        try:
            return attractor_summary(params.with_d2(float(d2)), start, cfg)
        except (IntegrationError, DomainError) as exc:
            nan = np.array([])
            return AttractorSummary(float(d2), AttractorKind.ERROR, None, nan, nan, nan,
                                    float("nan"), float("nan"), start, start, str(exc))

    if ic_policy == "fixed":
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                return list(pool.map(lambda d: one(d, seed), d2_grid))
        return [one(d, seed) for d in d2_grid]
    out = []
    start = seed
    for d in d2_grid:
        s = one(d, start)
        out.append(s)
        bad = s.kind in (AttractorKind.BOUNDARY_EXTINCTION, AttractorKind.ERROR)
        start = seed if bad else s.final_state
    return out


def crisis_check(params: ModelParams, cycle: LimitCycle, summary: AttractorSummary,
                 cfg: IntegratorConfig = DEFAULT_CONFIG, dt: float = 0.02,
                 n_cycle: int = 20000) -> float:
    """Minimum distance between the post-transient attractor and ``cycle``."""
    if summary.kind in (AttractorKind.BOUNDARY_EXTINCTION, AttractorKind.ERROR):
        raise PreconditionError(f"no interior attractor at d2={summary.d2}")
    times = np.arange(0.0, cfg.t_window, dt)
    traj = sample(params, summary.window_start, times, cfg)
    ring = cycle_points(params, cycle, n_cycle, cfg)
    return min_distance(ring, traj)


def min_distance(ref: np.ndarray, pts: np.ndarray) -> float:
    """Smallest Euclidean distance from any of ``pts`` to any of ``ref``.

    A sparse subsample of ``pts`` gives an upper bound first; bounding the
    full KD-tree search with it keeps far-away queries cheap.
    """
    tree = cKDTree(ref)
    stride = max(1, len(pts) // 300)
    ub = float(tree.query(pts[::stride])[0].min())
    dist, _ = tree.query(pts, distance_upper_bound=ub * (1.0 + 1e-9) + 1e-300)
    return float(min(ub, dist.min()))


COLLISION_DISTANCE = 1e-2
