"""Machine-code geodesic probes for long horizons.

The numpy integrator pays interpreter overhead on every stage of every step,
which dominates for stiff-ish profiles that need hundreds of thousands of
steps. Here the profile is translated into straight-line Python computing its
value and gradient (forward mode on scalars), compiled with numba, and a
single-trajectory DOPRI5 loop with the same tableau and controller as
:mod:`ppdual.ode` runs each ensemble member with its own step size. The numpy
path remains the reference implementation and is used to test this one.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from .jet import DomainError
from .ode import ALPHA, BETA, FAC_MAX, FAC_MIN, SAFETY, A, E, StepUnderflowError
from .scalar_field import BinOp, Call, Const, Expr, Neg, Pow, Var

_A = np.zeros((7, 7))
for _s, _row in enumerate(A):
    _A[_s, : len(_row)] = _row
_E = np.array(E)

OK, UNDERFLOW, TOO_MANY_STEPS = 0, 1, 2


class _Emitter:
    """Straight-line code for value and gradient of an expression tree."""

    def __init__(self):
        self.lines = []
        self.count = 0

    def tmp(self, expr: str) -> str:
        name = f"t{self.count}"
        self.count += 1
        self.lines.append(f"    {name} = {expr}")
        return name

    def emit(self, node: Expr):
        # returns (value name, {coordinate index: gradient name})
        if isinstance(node, Const):
            return repr(float(node.value)), {}
        if isinstance(node, Var):
            return self.tmp(f"x[{node.index}]"), {node.index: "1.0"}
        if isinstance(node, Neg):
            a, ga = self.emit(node.arg)
            return self.tmp(f"-{a}"), {j: self.tmp(f"-{g}") for j, g in ga.items()}
        if isinstance(node, BinOp):
            a, ga = self.emit(node.left)
            b, gb = self.emit(node.right)
            keys = sorted(set(ga) | set(gb))
            if node.op in "+-":
                val = self.tmp(f"{a} {node.op} {b}")
                grad = {}
                for j in keys:
                    left, right = ga.get(j, "0.0"), gb.get(j, "0.0")
                    grad[j] = self.tmp(f"{left} {node.op} {right}")
                return val, grad
            if node.op == "*":
                val = self.tmp(f"{a} * {b}")
                grad = {j: self.tmp(f"{a} * {gb.get(j, '0.0')} + {b} * {ga.get(j, '0.0')}") for j in keys}
                return val, grad
            self.lines.append(f"    if {b} == 0.0:")
            self.lines.append("        raise DomainError('division by zero')")
            r = self.tmp(f"1.0 / {b}")
            val = self.tmp(f"{a} * {r}")
            grad = {j: self.tmp(f"({ga.get(j, '0.0')} - {val} * {gb.get(j, '0.0')}) * {r}") for j in keys}
            return val, grad
        if isinstance(node, Pow):
            a, ga = self.emit(node.base)
            k = node.exponent
            if k == 0:
                return "1.0", {}
            if k < 0:
                self.lines.append(f"    if {a} == 0.0:")
                self.lines.append("        raise DomainError('division by zero')")
            low = self.tmp(f"{a} ** {k - 1}")
            val = self.tmp(f"{low} * {a}")
            d = self.tmp(f"{float(k)!r} * {low}")
            return val, {j: self.tmp(f"{d} * {g}") for j, g in ga.items()}
        a, ga = self.emit(node.arg)
        if node.func == "sin":
            val, d = self.tmp(f"math.sin({a})"), self.tmp(f"math.cos({a})")
        elif node.func == "cos":
            val, d = self.tmp(f"math.cos({a})"), self.tmp(f"-math.sin({a})")
        elif node.func == "exp":
            val = self.tmp(f"math.exp({a})")
            d = val
        else:
            self.lines.append(f"    if {a} <= 0.0:")
            self.lines.append("        raise DomainError('log of a nonpositive number')")
            val, d = self.tmp(f"math.log({a})"), self.tmp(f"1.0 / {a}")
        return val, {j: self.tmp(f"{d} * {g}") for j, g in ga.items()}


def profile_source(expr: Expr, dim: int) -> str:
    """Source of ``_profile(x, grad) -> value`` that also fills ``grad``."""
    em = _Emitter()
    val, grad = em.emit(expr)
    body = [f"    grad[{j}] = 0.0" for j in range(dim) if j not in grad]
    body += [f"    grad[{j}] = {g}" for j, g in sorted(grad.items())]
    return "\n".join(["def _profile(x, grad):", *em.lines, *body, f"    return {val}", ""])


_CACHE: dict = {}


def compile_profile(expr: Expr, dim: int):
    key = (expr, dim)
    fn = _CACHE.get(key)
    if fn is None:
        namespace = {"math": math, "DomainError": DomainError}
        exec(profile_source(expr, dim), namespace)  # noqa: S102 - generated from a parsed tree
        fn = _CACHE[key] = numba.njit(cache=False)(namespace["_profile"])
    return fn


@numba.njit(cache=False)
def _rhs(profile, y, out, grad):
    n = y.shape[0] // 2
    h = profile(y[:n], grad)
    vd = y[n]
    ud = y[n + 1]
    c = 2.0 * vd + ud * h
    s = 0.0
    for i in range(2, n):
        s += grad[i] * y[n + i]
    for i in range(n):
        out[i] = y[n + i]
    out[n] = 0.5 * ((c * h - ud) * s - grad[1] * ud * ud)
    out[n + 1] = -c * s
    for i in range(2, n):
        out[n + i] = 0.5 * c * ud * grad[i]


@numba.njit(cache=False)
def _monitors(profile, y, grad):
    n = y.shape[0] // 2
    h = profile(y[:n], grad)
    vd = y[n]
    ud = y[n + 1]
    front = 0.0
    for i in range(2, n):
        front += y[n + i] * y[n + i]
    c = 2.0 * vd + ud * h
    c2 = front + 0.5 * ud * ud
    speed = 2.0 * vd * vd + 2.0 * h * vd * ud + 0.5 * (1.0 + h * h) * ud * ud + front
    return c, c2, speed


@numba.njit(cache=False)
def _probe_member(profile, y0, horizon, rtol, atol, h0, max_steps, a, e, stats, final):
    """Integrate one member; ``stats`` receives drift(3), growth, u excess, max |u|."""
    m = y0.shape[0]
    n = m // 2
    grad = np.empty(n)
    k = np.empty((7, m))
    ys = np.empty(m)
    y = y0.copy()
    c0, c20, s0 = _monitors(profile, y, grad)
    root = math.sqrt(c20)
    for j in range(6):
        stats[j] = 0.0
    stats[3] = -np.inf
    stats[4] = -np.inf
    stats[5] = abs(y0[1])
    _rhs(profile, y, k[0], grad)
    t = 0.0
    h = h0
    err_old = 1e-4
    steps = 0
    eps = np.finfo(np.float64).eps
    while horizon - t > 0.0:
        if steps >= max_steps:
            return steps, TOO_MANY_STEPS, t
        if h < 16.0 * eps * max(abs(t), 1.0):
            return steps, UNDERFLOW, t
        last = h >= horizon - t
        hs = horizon - t if last else h
        for s in range(1, 7):
            for i in range(m):
                acc = 0.0
                for q in range(s):
                    acc += a[s, q] * k[q, i]
                ys[i] = y[i] + hs * acc
            _rhs(profile, ys, k[s], grad)
        en = 0.0
        for i in range(m):
            err = 0.0
            for q in range(7):
                err += e[q] * k[q, i]
            sc = atol + rtol * max(abs(y[i]), abs(ys[i]))
            r = hs * err / sc
            en += r * r
        en = math.sqrt(en / m)
        if en <= 1.0:
            steps += 1
            t = horizon if last else t + hs
            for i in range(m):
                y[i] = ys[i]
                k[0, i] = k[6, i]
            fac = SAFETY * max(en, 1e-10) ** (-ALPHA) * err_old ** BETA
            h = hs * min(FAC_MAX, max(FAC_MIN, fac))
            err_old = max(en, 1e-4)
            c, c2, sp = _monitors(profile, y, grad)
            stats[0] = max(stats[0], abs(c - c0) / (1.0 + abs(c0)))
            stats[1] = max(stats[1], abs(c2 - c20) / (1.0 + abs(c20)))
            stats[2] = max(stats[2], abs(sp - s0) / (1.0 + abs(s0)))
            for i in range(2, n):
                stats[3] = max(stats[3], abs(y[i]) - abs(y0[i]) - root * t)
            u = abs(y[1])
            stats[4] = max(stats[4], u - abs(y0[1]) - math.sqrt(2.0) * root * t)
            stats[5] = max(stats[5], u)
        else:
            h = hs * max(FAC_MIN, SAFETY * en ** -0.2)
    for i in range(m):
        final[i] = y[i]
    return steps, OK, t


def probe_members(expr: Expr, y0: np.ndarray, horizon: float, rtol: float, atol: float,
                  h0, max_steps: int = 50_000_000):
    """Run every row of ``y0`` to ``horizon`` from initial steps ``h0``.

    Returns per-member step counts, a ``(members, 6)`` array holding the
    drifts of c, c2 and the speed, the transverse and u growth excess and max |u|,
    and the states at ``horizon``.
    """
    y0 = np.atleast_2d(np.asarray(y0, dtype=float))
    h0 = np.broadcast_to(np.asarray(h0, dtype=float), (len(y0),))
    n = y0.shape[1] // 2
    profile = compile_profile(expr, n)
    steps = np.zeros(len(y0), dtype=np.int64)
    stats = np.zeros((len(y0), 6))
    final = np.zeros_like(y0)
    for r, row in enumerate(y0):
        count, status, t = _probe_member(profile, row, float(horizon), rtol, atol, float(h0[r]), max_steps,
                                         _A, _E, stats[r], final[r])
        if status == UNDERFLOW:
            raise StepUnderflowError(t, 0.0)
        if status == TOO_MANY_STEPS:
            raise RuntimeError(f"maximum number of steps ({max_steps}) exceeded at t={t}")
        steps[r] = count
    return steps, stats, final
