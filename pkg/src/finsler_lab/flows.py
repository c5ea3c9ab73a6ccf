"""Fixed-step RK4 integration of the geodesic system x' = y, y' = -2G(x, y)."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.interpolate import CubicSpline

from . import expr as ex
from .expr import Expr
from .geometry import MIN_FIBRE_NORM, PhasePoint, SampleDomain, SpraySpec

STEP_DRIFT_LIMIT = 1e-2


class DomainExitError(ValueError):
    pass


class StepTooLargeError(ArithmeticError):
    pass


class UnknownMonitorError(KeyError):
    pass


@dataclass
class Trajectory:
    """Uniform time grid, states and monitor logs; ``stop_reason`` is empty
    when the run reached the horizon."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    monitors: dict = field(default_factory=dict)
    stop_reason: str = ""

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def __len__(self):
        return len(self.t)

    def point(self, k: int) -> PhasePoint:
        return PhasePoint(self.x[k], self.y[k])

    def write_csv(self, path_or_file) -> None:
        n = self.dim
        names = sorted(self.monitors)
        header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)] + names
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for k in range(len(self.t)):
                row = [self.t[k], *self.x[k], *self.y[k], *(self.monitors[m][k] for m in names)]
                w.writerow([repr(float(v)) for v in row])
        finally:
            if own:
                fh.close()


class _Field:
    def __init__(self, s: SpraySpec):
        self.coeffs = list(s.coeffs)

    def __call__(self, x, y):
        G = ex.evaluate_many(self.coeffs, x, y).T  # (m, n)
        return y, -2.0 * G


def _inside(domain: SampleDomain | None, x: np.ndarray) -> np.ndarray:
    if domain is None:
        return np.ones(len(x), bool)
    lo = np.asarray(domain.x_min, float)
    hi = np.asarray(domain.x_max, float)
    return np.all((x >= lo) & (x <= hi), axis=1)


def integrate_many(s: SpraySpec, init: PhasePoint, h: float, T: float,
                   monitors: Mapping[str, Expr] | None = None,
                   domain: SampleDomain | None = None, energy: Expr | None = None,
                   check_step: bool = True) -> list[Trajectory]:
    """RK4 for a batch of initial states, advanced together.

    A trajectory stops early (with ``stop_reason``) when it leaves ``domain``,
    when |y| drops below the slit threshold, or when the spray cannot be
    evaluated.  ``energy`` (default: L of the spray's metric, if any) is
    watched between consecutive steps; a relative jump above 1e-2 raises
    :class:`StepTooLargeError`.
    """
    if h <= 0 or T <= 0:
        raise ValueError("step and horizon must be positive")
    x0 = np.atleast_2d(np.asarray(init.x, float))
    y0 = np.atleast_2d(np.asarray(init.y, float))
    if not np.all(_inside(domain, x0)):
        raise DomainExitError("initial point lies outside the declared x-domain")
    monitors = dict(monitors or {})
    if not check_step:
        energy = None
    elif energy is None and s.metric is not None:
        energy = s.metric.energy
    names = sorted(monitors)
    mon_exprs = [monitors[k] for k in names]
    steps = int(round(T / h))
    m, n = x0.shape
    F = _Field(s)

    xs = np.empty((steps + 1, m, n))
    ys = np.empty((steps + 1, m, n))
    logs = np.empty((steps + 1, len(names), m))
    xs[0], ys[0] = x0, y0
    alive = np.ones(m, bool)
    last = np.full(m, steps)
    reason = [""] * m

    def measure(x, y):
        return ex.evaluate_many(mon_exprs, x, y) if names else np.empty((0, len(x)))

    def energy_of(x, y):
        return ex.evaluate_many([energy], x, y)[0]

    logs[0] = measure(x0, y0)
    E_prev = energy_of(x0, y0) if energy is not None else None

    x, y = x0.copy(), y0.copy()
    for k in range(steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        xa, ya = x[idx], y[idx]
        try:
            k1x, k1y = F(xa, ya)
            k2x, k2y = F(xa + 0.5 * h * k1x, ya + 0.5 * h * k1y)
            k3x, k3y = F(xa + 0.5 * h * k2x, ya + 0.5 * h * k2y)
            k4x, k4y = F(xa + h * k3x, ya + h * k3y)
        except ex.DomainError as err:
            for j in idx:
                alive[j] = False
                last[j] = k
                reason[j] = f"spray undefined near t={k * h:.6g}: {err}"
            xs[k + 1:, idx], ys[k + 1:, idx] = x[idx], y[idx]
            break
        xn = xa + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        yn = ya + (h / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y)
        bad_dom = ~_inside(domain, xn)
        bad_slit = np.linalg.norm(yn, axis=1) < MIN_FIBRE_NORM
        stop = bad_dom | bad_slit
        for j, flag_d, flag_s in zip(idx[stop], bad_dom[stop], bad_slit[stop]):
            alive[j] = False
            last[j] = k
            reason[j] = (f"left the x-domain at t={(k + 1) * h:.6g}" if flag_d
                         else f"|y| fell below {MIN_FIBRE_NORM:g} at t={(k + 1) * h:.6g}")
        keep = idx[~stop]
        x[keep], y[keep] = xn[~stop], yn[~stop]
        xs[k + 1], ys[k + 1] = x, y
        if keep.size:
            if E_prev is not None:
                E_new = energy_of(x[keep], y[keep])
                jump = np.abs(E_new - E_prev[keep]) / np.maximum(np.abs(E_prev[keep]), 1e-300)
                if np.any(jump > STEP_DRIFT_LIMIT):
                    raise StepTooLargeError(
                        f"energy changed by {jump.max():.3e} in one step at t={(k + 1) * h:.6g}; reduce h")
                E_prev[keep] = E_new
            logs[k + 1][:, keep] = measure(x[keep], y[keep])

    t = h * np.arange(steps + 1)
    out = []
    for j in range(m):
        K = last[j] + 1
        mons = {name: logs[:K, q, j].copy() for q, name in enumerate(names)}
        out.append(Trajectory(t[:K].copy(), xs[:K, j].copy(), ys[:K, j].copy(), mons, reason[j]))
    return out


def integrate(s: SpraySpec, init: PhasePoint, h: float, T: float,
              monitors: Mapping[str, Expr] | None = None,
              domain: SampleDomain | None = None, energy: Expr | None = None,
              check_step: bool = True) -> Trajectory:
    if init.is_batch:
        raise ValueError("use integrate_many for batches")
    return integrate_many(s, init, h, T, monitors, domain, energy, check_step)[0]


@dataclass(frozen=True)
class Drift:
    max_drift: float
    relative_drift: float
    first_exceed_time: float | None


def drift_report(traj: Trajectory, name: str, threshold: float = 1e-6) -> Drift:
    """Drift of a monitor relative to its initial value; ``first_exceed_time``
    is the first time the relative drift exceeds ``threshold``."""
    if name not in traj.monitors:
        raise UnknownMonitorError(f"monitor {name!r} was not recorded; have {sorted(traj.monitors)}")
    v = traj.monitors[name]
    d = np.abs(v - v[0])
    rel = d / max(abs(v[0]), 1e-300) if v[0] != 0 else d
    over = np.flatnonzero(rel > threshold)
    return Drift(float(d.max()), float(rel.max()), float(traj.t[over[0]]) if over.size else None)


def arc_length_path(traj: Trajectory):
    """Cubic interpolation of x as a function of Euclidean arc length in x-space.

    Arc length is accumulated from the speed |y| on the time grid by the
    trapezoid rule with an end-slope correction.  Returns (spline, total length).
    """
    speed = np.linalg.norm(traj.y, axis=1)
    h = traj.t[1] - traj.t[0]
    s = np.zeros(len(speed))
    s[1:] = np.cumsum(0.5 * h * (speed[1:] + speed[:-1]))
    if len(speed) >= 3:
        ds = np.gradient(speed, h)
        s[1:] -= np.cumsum(h * h / 12.0 * (ds[1:] - ds[:-1]))
    return CubicSpline(s, traj.x, axis=0), float(s[-1])


def path_distance(a: Trajectory, b: Trajectory, samples: int = 400) -> float:
    """Largest x-space distance between two paths compared at equal arc length
    over their common length."""
    sa, la = arc_length_path(a)
    sb, lb = arc_length_path(b)
    grid = np.linspace(0.0, min(la, lb), samples)
    return float(np.max(np.linalg.norm(sa(grid) - sb(grid), axis=1)))


def order_estimate(s: SpraySpec, init: PhasePoint, T: float = 1.0, h: float = 0.1,
                   h_ref: float = 1e-4) -> tuple[float, float, float]:
    """Errors at T for steps h and h/2 against an h_ref run and their ratio."""
    ref = integrate(s, init, h_ref, T, check_step=False)
    errs = []
    for hh in (h, h / 2):
        tr = integrate(s, init, hh, T, check_step=False)
        errs.append(float(np.linalg.norm(np.r_[tr.x[-1] - ref.x[-1], tr.y[-1] - ref.y[-1]])))
    return errs[0], errs[1], errs[0] / errs[1]
