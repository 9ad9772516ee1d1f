"""Geodesics of the standard dual metric.

The integrated system is the full second-order system in ``(v, u, x)``:

    v'' = c/2 H s - s u'/2 - H_u u'^2 / 2
    u'' = -c s
    x_i'' = c/2 H_i u'

with ``s = sum H_i x_i'`` and ``c = 2 v' + u' H``. Along solutions ``c`` and
``c2 = sum (x_i')^2 + u'^2 / 2`` are constant, and so is the speed
``g(gamma', gamma') = c^2 / 2 + c2``. States are flat arrays
``[position, velocity]``; a leading batch axis integrates an ensemble.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ode import _initial_step, dopri5
from .ppwave import DualChart, U, V, make_frame

GROWTH_TOL = 1e-4


class GrowthBoundViolation(AssertionError):
    pass


@dataclass
class GeodesicState:
    t: float
    position: np.ndarray
    velocity: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])


def geodesic_rhs(dual: DualChart, y: np.ndarray) -> np.ndarray:
    """Time derivative of ``[position, velocity]`` (batched over leading axes)."""
    y = np.asarray(y, dtype=float)
    n = dual.dim
    xd = y[..., n:]
    H = dual.chart.profile.jet(y[..., :n], order=1)
    h, grad = H.value, H.grad
    vd, ud = xd[..., V], xd[..., U]
    c = 2.0 * vd + ud * h
    s = np.einsum("...i,...i->...", grad[..., 2:], xd[..., 2:])
    out = np.empty_like(y)
    out[..., :n] = xd
    # v'' = (c H - u') s / 2 - H_u u'^2 / 2
    out[..., n + V] = 0.5 * ((c * h - ud) * s - grad[..., U] * ud * ud)
    out[..., n + U] = -c * s
    out[..., n + 2:] = (0.5 * c * ud)[..., None] * grad[..., 2:]
    return out


def monitors(dual: DualChart, y: np.ndarray):
    """``(c, c2, speed)`` for a state or a batch of states."""
    y = np.asarray(y, dtype=float)
    n = dual.dim
    x, xd = y[..., :n], y[..., n:]
    h = dual.chart.profile.jet(x, order=1).value
    vd, ud = xd[..., V], xd[..., U]
    c = 2.0 * vd + ud * h
    front = (xd[..., 2:] * xd[..., 2:]).sum(axis=-1)
    c2 = front + 0.5 * ud * ud
    # g(xd, xd) from the metric components
    speed = 2.0 * vd * vd + 2.0 * h * vd * ud + 0.5 * (1.0 + h * h) * ud * ud + front
    return c, c2, speed


def relative_drift(value, initial):
    return np.abs(value - initial) / (1.0 + np.abs(initial))


@dataclass
class Trajectory:
    coordinate_names: tuple
    t: np.ndarray
    states: np.ndarray  # (steps, 2n)
    c: np.ndarray
    c2: np.ndarray
    speed: np.ndarray

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, : len(self.coordinate_names)]

    @property
    def velocities(self) -> np.ndarray:
        return self.states[:, len(self.coordinate_names):]

    def max_drift(self) -> dict:
        return {
            "c": float(np.max(relative_drift(self.c, self.c[0]))),
            "c2": float(np.max(relative_drift(self.c2, self.c2[0]))),
            "speed": float(np.max(relative_drift(self.speed, self.speed[0]))),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *self.coordinate_names, "c", "c2", "speed"])
            for row in zip(self.t, self.positions, self.c, self.c2, self.speed):
                t, pos, c, c2, sp = row
                w.writerow([repr(float(t)), *(repr(float(p)) for p in pos), repr(float(c)), repr(float(c2)), repr(float(sp))])


def integrate(dual: DualChart, state, t_end: float, rtol: float = 1e-10, atol: float = 1e-10) -> Trajectory:
    """Integrate one geodesic from ``state`` (GeodesicState or flat array) to ``t_end``."""
    if isinstance(state, GeodesicState):
        t0, y0 = state.t, state.as_array()
    else:
        t0, y0 = 0.0, np.asarray(state, dtype=float)
    if not math.isfinite(t_end):
        raise ValueError("t_end must be finite")
    f = lambda t, y: geodesic_rhs(dual, y)  # noqa: E731
    ts, ys = [t0], [y0]
    for t, y in dopri5(f, t0, y0, t_end, rtol, atol):
        ts.append(t)
        ys.append(y)
    states = np.array(ys)
    c, c2, speed = monitors(dual, states)
    return Trajectory(dual.coordinate_names, np.array(ts), states, c, c2, speed)


def random_unit_states(dual: DualChart, count: int, rng, box: float = 1.0) -> np.ndarray:
    """Random positions in ``[-box, box]^n`` with g-unit velocities.

    Velocities are uniform on the unit sphere of the orthonormal frame
    ``{T, X_i, Z}`` and mapped to coordinates through it.
    """
    n = dual.dim
    out = np.empty((count, 2 * n))
    for m in range(count):
        p = rng.uniform(-box, box, n)
        w = rng.normal(size=n)
        w /= np.linalg.norm(w)
        out[m, :n] = p
        out[m, n:] = make_frame(dual, p).vectors @ w
    return out


@dataclass
class ProbeReport:
    profile: str
    members: int
    horizon: float
    steps: int
    max_drift_c: float
    max_drift_c2: float
    max_drift_speed: float
    max_growth_excess: float  # max over t, i of |x_i(t)| - |x_i(0)| - sqrt(c2) t
    max_u_excess: float  # same for u with sqrt(2 c2)
    max_abs_u: float
    bounds_hold: bool
    violations: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _probe_batch(dual: DualChart, y0: np.ndarray, horizon: float, rtol: float, atol: float,
                 block: int = 512):
    # accepted states are buffered and checked a block at a time; every step is checked
    n = dual.dim
    c0, c20, s0 = monitors(dual, y0)
    x0 = np.abs(y0[:, 2:n])
    u0 = np.abs(y0[:, U])
    root = np.sqrt(c20)
    stats = {"drift": np.zeros(3), "growth": -np.inf, "u_excess": -np.inf, "max_u": float(np.max(u0))}
    ts = np.empty(block)
    ys = np.empty((block,) + y0.shape)

    def flush(count):
        t, y = ts[:count, None], ys[:count]
        c, c2, sp = monitors(dual, y)
        stats["drift"] = np.maximum(stats["drift"], [
            np.max(relative_drift(c, c0)),
            np.max(relative_drift(c2, c20)),
            np.max(relative_drift(sp, s0)),
        ])
        if n > 2:
            excess = np.abs(y[:, :, 2:n]) - x0 - (root * t)[..., None]
            stats["growth"] = max(stats["growth"], float(np.max(excess)))
        u = np.abs(y[:, :, U])
        stats["u_excess"] = max(stats["u_excess"], float(np.max(u - u0 - np.sqrt(2.0) * root * t)))
        stats["max_u"] = max(stats["max_u"], float(np.max(u)))

    steps = fill = 0
    f = lambda t, y: geodesic_rhs(dual, y)  # noqa: E731
    for t, y in dopri5(f, 0.0, y0, horizon, rtol, atol):
        ts[fill] = t
        ys[fill] = y
        fill += 1
        steps += 1
        if fill == block:
            flush(fill)
            fill = 0
    if fill:
        flush(fill)
    return steps, stats["drift"], stats["growth"], stats["u_excess"], stats["max_u"]


def _probe_compiled(dual: DualChart, y0: np.ndarray, horizon: float, rtol: float, atol: float):
    from .compiled import probe_members

    f = lambda t, y: geodesic_rhs(dual, y)  # noqa: E731
    h0 = [_initial_step(f, 0.0, row, f(0.0, row), rtol, atol) for row in y0]
    steps, stats, _ = probe_members(dual.chart.profile.expr, y0, horizon, rtol, atol, h0)
    return (int(steps.max()), stats[:, :3].max(axis=0), float(stats[:, 3].max()),
            float(stats[:, 4].max()), float(stats[:, 5].max()))


def completeness_probe(dual: DualChart, ensemble: int = 100, horizon: float = 1e3, seed: int = 0,
                       rtol: float = 1e-10, atol: float = 1e-10, jobs: int = 1, batch: int = 100,
                       box: float = 1.0, raise_on_violation: bool = True,
                       engine: str = "compiled") -> ProbeReport:
    """Integrate an ensemble of random unit-speed geodesics to ``horizon``.

    Checks the conservation of ``c``, ``c2`` and the speed, and the linear growth
    bounds ``|x_i(t)| <= |x_i(0)| + sqrt(c2) t`` and ``|u(t)| <= |u(0)| + sqrt(2 c2) t``
    after every accepted step. A violated growth bound raises
    :class:`GrowthBoundViolation`. ``engine="numpy"`` integrates each batch with
    a shared step size through :func:`ppdual.ode.dopri5`; ``"compiled"`` gives
    every member its own step size in machine code. ``steps`` in the report is
    the largest per-batch (numpy) or per-member (compiled) step count.
    """
    if not math.isfinite(horizon):
        raise ValueError("horizon must be finite")
    if engine not in ("compiled", "numpy"):
        raise ValueError(f"unknown engine {engine!r}")
    rng = np.random.default_rng(seed)
    y0 = random_unit_states(dual, ensemble, rng, box)
    chunks = [y0[i:i + batch] for i in range(0, ensemble, batch)]
    worker = _probe_compiled if engine == "compiled" else _probe_batch
    args = [(dual, chunk, horizon, rtol, atol) for chunk in chunks]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(worker, *zip(*args)))
    else:
        results = [worker(*a) for a in args]
    steps = max(r[0] for r in results)
    drift = np.max([r[1] for r in results], axis=0)
    growth = max(r[2] for r in results)
    u_excess = max(r[3] for r in results)
    max_u = max(r[4] for r in results)
    violations = []
    if growth > GROWTH_TOL:
        violations.append(f"transverse growth exceeds bound by {growth:.3e}")
    if u_excess > GROWTH_TOL:
        violations.append(f"u growth exceeds bound by {u_excess:.3e}")
    report = ProbeReport(
        dual.chart.profile.text, ensemble, float(horizon), steps,
        float(drift[0]), float(drift[1]), float(drift[2]),
        float(growth), float(u_excess), max_u, not violations, violations,
    )
    if violations and raise_on_violation:
        raise GrowthBoundViolation("; ".join(violations))
    return report
