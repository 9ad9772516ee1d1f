"""Plane wave limits of Lorentzian metrics in lightlike coordinates.

A lightlike chart has coordinates ``(x0, x1, ..., xn)`` and a metric whose
``x0`` row is fixed to ``h00 = 0, h01 = 1, h0j = 0`` (``j >= 2``), so that
``N = d/dx0`` is null everywhere. The scaling

    phi(x~) = (x~0, W^2 x~1, W x~2, ..., W x~n)

with a constant ``W > 0`` gives the family ``g_W = W^-2 phi^* h``. Written out,
``(g_W)_11`` carries a factor ``W^2``, ``(g_W)_1j`` a factor ``W``, the front block
no factor, and every component is evaluated at ``phi(x~)``. As ``W -> 0`` the
family tends to the plane wave

    2 dx0 dx1 + h_ij(x0, 0, ..., 0) dx^i dx^j      (i, j >= 2)

which is computed here by substituting zeros into the component expressions.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .almost_kahler import OddDimensionError, classify, exterior_derivative_omega
from .geometry import MetricField, christoffel, endomorphism_norm, riemann
from .jet import DomainError
from .ppwave import make_dual, make_ppwave
from .scalar_field import Const, ScalarField, restrict

PLANE_WAVE_TOL = 1e-9
HOMOTHETY_TOL = 1e-10
# below this, a deviation from the limit counts as exactly zero
ZERO_DEVIATION = 1e-13


class LightlikeChartError(ValueError):
    pass


class ConversionError(ArithmeticError):
    pass


def lightlike_coordinates(dim: int) -> tuple:
    return tuple(f"x{i}" for i in range(dim))


_KEY = re.compile(r"h(\d+),(\d+)|h(\d)(\d)")


def _parse_key(key) -> tuple:
    if isinstance(key, str):
        m = _KEY.fullmatch(key.strip())
        if not m:
            raise LightlikeChartError(f"bad component key {key!r}; use 'h12' or 'h1,12'")
        i, j = (int(g) for g in m.groups() if g is not None)
    else:
        i, j = (int(k) for k in key)
    return (i, j) if i <= j else (j, i)


def _scaling(dim: int, omega: float) -> np.ndarray:
    s = np.full(dim, float(omega))
    s[0] = 1.0
    s[1] = omega * omega
    return s


def _prefactor(i: int, j: int, omega: float) -> float:
    # (g_W)_ij = W^-2 s_i s_j h_ij; tabulated for the free entries
    if i == 1 and j == 1:
        return omega * omega
    if i == 1:
        return omega
    return 1.0


def _lorentz_ok(g: np.ndarray, tol: float = 1e-12) -> bool:
    eig = np.linalg.eigvalsh(g)
    return bool(np.all(np.abs(eig) > tol) and np.sum(eig < 0) == 1)


@dataclass(frozen=True)
class LightlikeChart:
    """Metric in lightlike form; ``components`` maps free ``(i, j)``, ``1 <= i <= j``, to fields."""

    dim: int
    components: tuple  # ((i, j), ScalarField) pairs, sorted

    @property
    def coordinate_names(self) -> tuple:
        return lightlike_coordinates(self.dim)

    def field(self, i: int, j: int) -> ScalarField:
        return dict(self.components)[(min(i, j), max(i, j))]

    def _assemble(self, point, omega: float = None) -> tuple:
        # metric (or scaled metric when omega is given) with derivatives
        n = self.dim
        x = np.asarray(point, dtype=float)
        if x.shape != (n,):
            raise ValueError(f"point has dimension {x.shape}, chart has {n}")
        s = np.ones(n) if omega is None else _scaling(n, omega)
        y = s * x
        g = np.zeros((n, n))
        dg = np.zeros((n, n, n))
        ddg = np.zeros((n, n, n, n))
        g[0, 1] = g[1, 0] = 1.0
        for (i, j), f in self.components:
            jet = f.jet(y)
            p = 1.0 if omega is None else _prefactor(i, j, omega)
            for a, b in {(i, j), (j, i)}:
                g[a, b] = p * jet.value
                dg[a, b] = p * jet.grad * s
                ddg[a, b] = p * jet.hess * np.outer(s, s)
        return g, dg, ddg

    def metric(self) -> MetricField:
        return MetricField(self.dim, "lorentzian", self._assemble, self.coordinate_names)

    def matrix(self, point) -> np.ndarray:
        return self._assemble(point)[0]

    def null_field(self) -> np.ndarray:
        e = np.zeros(self.dim)
        e[0] = 1.0
        return e

    def to_dict(self) -> dict:
        comps = {f"h{i},{j}" if max(i, j) > 9 else f"h{i}{j}": f.text for (i, j), f in self.components}
        return {"kind": "lightlike", "dimension": self.dim, "components": comps}


def probe_points(dim: int, count: int = 8, seed: int = 0, box: float = 0.5) -> np.ndarray:
    """The origin followed by seeded uniform points in ``[-box, box]^dim``."""
    rng = np.random.default_rng(seed)
    return np.vstack([np.zeros(dim), rng.uniform(-box, box, (count, dim))])


def make_lightlike_chart(dim: int, table: dict, probes: int = 8, seed: int = 0) -> LightlikeChart:
    """Lightlike chart of dimension ``dim`` (coordinates ``x0..x{dim-1}``).

    ``table`` maps keys ``"h11"``, ``"h1,12"`` or ``(i, j)`` to expressions
    (text, numbers or ScalarFields). Missing free entries default to zero for
    ``h1j`` and to the identity on the front block. Entries with an index 0 are
    fixed and cannot be set.
    """
    if dim < 3:
        raise LightlikeChartError("lightlike charts need at least three coordinates")
    names = lightlike_coordinates(dim)
    given = {}
    for key, value in table.items():
        i, j = _parse_key(key)
        if i == 0:
            raise LightlikeChartError(f"h{i}{j} is fixed by the lightlike form and cannot be overridden")
        if j >= dim:
            raise LightlikeChartError(f"component h{i}{j} outside a {dim}-dimensional chart")
        if (i, j) in given:
            raise LightlikeChartError(f"component h{i}{j} given twice")
        if isinstance(value, ScalarField):
            f = value
        elif isinstance(value, (int, float)):
            f = ScalarField(Const(float(value)), names)
        else:
            f = ScalarField.parse(str(value), names)
        if tuple(f.coordinate_names) != names:
            raise LightlikeChartError(f"component h{i}{j} uses coordinates {f.coordinate_names}")
        given[(i, j)] = f
    comps = {}
    for i in range(1, dim):
        for j in range(i, dim):
            default = 1.0 if (i == j and i >= 2) else 0.0
            comps[(i, j)] = given.get((i, j), ScalarField(Const(default), names))
    chart = LightlikeChart(dim, tuple(sorted(comps.items())))
    for p in probe_points(dim, probes, seed):
        try:
            g = chart.matrix(p)
        except DomainError as exc:
            raise LightlikeChartError(f"component undefined at probe point {p.tolist()}: {exc}") from exc
        if not _lorentz_ok(g):
            raise LightlikeChartError(f"metric is not Lorentzian at probe point {p.tolist()}")
    return chart


def chart_from_dict(data: dict) -> LightlikeChart:
    if data.get("kind", "lightlike") != "lightlike":
        raise LightlikeChartError(f"expected a lightlike chart, got kind {data.get('kind')!r}")
    return make_lightlike_chart(int(data["dimension"]), dict(data.get("components", {})))


def load_chart(path) -> LightlikeChart:
    return chart_from_dict(json.loads(Path(path).read_text()))


def save_chart(chart: LightlikeChart, path) -> None:
    Path(path).write_text(json.dumps(chart.to_dict(), indent=2, sort_keys=True) + "\n")


# scaled family -----------------------------------------------------------------

@dataclass(frozen=True)
class PenroseFamily:
    source: LightlikeChart
    omega: float

    @property
    def dim(self) -> int:
        return self.source.dim

    def scaling(self) -> np.ndarray:
        """Diagonal of the scaling map ``phi``."""
        return _scaling(self.dim, self.omega)

    def components(self, point):
        return self.source._assemble(point, self.omega)

    def metric(self) -> MetricField:
        return MetricField(self.dim, "lorentzian", self.components, self.source.coordinate_names)

    def matrix(self, point) -> np.ndarray:
        return self.components(point)[0]

    def homothety_residual(self, point) -> float:
        """``max |phi^* h - W^2 g_W|`` at ``point``, with the pullback as ``D h(phi(x)) D``."""
        s = self.scaling()
        x = np.asarray(point, dtype=float)
        pulled = s[:, None] * self.source.matrix(s * x) * s[None, :]
        return float(np.max(np.abs(pulled - self.omega**2 * self.matrix(x))))

    def connection_residual(self, point) -> float:
        """Christoffel symbols of ``g_W`` against those of ``phi^* h``.

        A linear map transforms them as ``G~^k_ij(x) = s_i s_j / s_k G^k_ij(phi(x))``,
        and constant rescaling leaves them unchanged.
        """
        s = self.scaling()
        x = np.asarray(point, dtype=float)
        mine = christoffel(self.metric(), x).gamma
        theirs = christoffel(self.source.metric(), s * x).gamma
        theirs = theirs * s[None, :, None] * s[None, None, :] / s[:, None, None]
        return float(np.max(np.abs(mine - theirs)))


def scale_metric(chart: LightlikeChart, omega: float) -> PenroseFamily:
    omega = float(omega)
    if not omega > 0.0:
        raise ValueError(f"scaling parameter must be positive, got {omega}")
    return PenroseFamily(chart, omega)


# limit ----------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneWaveLimit:
    dim: int
    front: tuple  # ((i, j), ScalarField) for 2 <= i <= j, depending on x0 only
    source: LightlikeChart = None

    @property
    def coordinate_names(self) -> tuple:
        return lightlike_coordinates(self.dim)

    def components(self, point):
        n = self.dim
        x = np.asarray(point, dtype=float)
        g = np.zeros((n, n))
        dg = np.zeros((n, n, n))
        ddg = np.zeros((n, n, n, n))
        g[0, 1] = g[1, 0] = 1.0
        for (i, j), f in self.front:
            jet = f.jet(x)
            for a, b in {(i, j), (j, i)}:
                g[a, b] = jet.value
                dg[a, b] = jet.grad
                ddg[a, b] = jet.hess
        return g, dg, ddg

    def metric(self) -> MetricField:
        return MetricField(self.dim, "lorentzian", self.components, self.coordinate_names)

    def matrix(self, point) -> np.ndarray:
        return self.components(point)[0]

    def expressions(self) -> dict:
        """All nonzero limit components as expression strings."""
        out = {"h01": "1"}
        for (i, j), f in self.front:
            if not (isinstance(f.expr, Const) and f.expr.value == 0.0):
                out[f"h{i},{j}" if j > 9 else f"h{i}{j}"] = f.text
        return out

    def front_is_constant(self) -> bool:
        return not any(f.depends_on("x0") for _, f in self.front)

    def front_matrix(self, x0: float = 0.0) -> np.ndarray:
        point = np.zeros(self.dim)
        point[0] = x0
        return self.matrix(point)[2:, 2:]


def take_limit(chart: LightlikeChart) -> PlaneWaveLimit:
    zeros = {name: 0.0 for name in chart.coordinate_names[1:]}
    front = tuple(
        ((i, j), ScalarField(restrict(f.expr, zeros), chart.coordinate_names))
        for (i, j), f in chart.components
        if i >= 2
    )
    return PlaneWaveLimit(chart.dim, front, chart)


def limit_deviation(chart: LightlikeChart, limit: PlaneWaveLimit, omega: float, points) -> float:
    family = scale_metric(chart, omega)
    return max(float(np.max(np.abs(family.matrix(p) - limit.matrix(p)))) for p in points)


def first_order_coefficient(chart: LightlikeChart, points) -> float:
    """Largest ``|d/dW (g_W)_ij|`` at ``W = 0`` over ``points``.

    Only ``(g_W)_1j = W h_1j(...)`` and the front block ``h_ij(x0, W^2 x1, W x2, ...)``
    contribute, the latter through ``sum_k x_k d_k h_ij`` with ``k >= 2``.
    """
    worst = 0.0
    for p in points:
        q = np.zeros(chart.dim)
        q[0] = p[0]
        for (i, j), f in chart.components:
            if i == 1 and j == 1:
                continue
            jet = f.jet(q, order=1)
            c = jet.value if i == 1 else jet.grad[2:] @ np.asarray(p)[2:]
            worst = max(worst, abs(float(c)))
    return worst


def convergence_check(chart: LightlikeChart, omegas=(1e-1, 1e-2, 1e-3), samples: int = 20,
                      seed: int = 0, box: float = 1.0) -> dict:
    """Observed decay of ``max |g_W - h_PW|`` along a decreasing ``W`` sequence.

    Each successive ratio of deviations must be at most three times the ratio
    of the ``W`` values (decay at least linear). When the family has a nonzero
    first-order term the ratio must also be at least a third of it (decay
    exactly linear). Deviations below ``ZERO_DEVIATION`` count as exact.
    """
    omegas = [float(w) for w in omegas]
    if any(b >= a for a, b in zip(omegas, omegas[1:])):
        raise ValueError("omega sequence must be strictly decreasing")
    limit = take_limit(chart)
    rng = np.random.default_rng(seed)
    points = rng.uniform(-box, box, (samples, chart.dim))
    devs = [limit_deviation(chart, limit, w, points) for w in omegas]
    linear = first_order_coefficient(chart, points) > 1e-8
    ratios, ok = [], True
    for k in range(1, len(omegas)):
        w_ratio = omegas[k] / omegas[k - 1]
        if devs[k] <= ZERO_DEVIATION:
            ratios.append(0.0)
            continue
        if devs[k - 1] <= ZERO_DEVIATION:
            ratios.append(float("inf"))
            ok = False
            continue
        r = devs[k] / devs[k - 1]
        ratios.append(r)
        if r > 3.0 * w_ratio or (linear and r < w_ratio / 3.0):
            ok = False
    monotone = all(b <= a or b <= ZERO_DEVIATION for a, b in zip(devs, devs[1:]))
    return {
        "omegas": omegas,
        "deviations": devs,
        "ratios": ratios,
        "first_order": linear,
        "monotone": monotone,
        "order_ok": ok,
    }


# plane wave certificate ----------------------------------------------------------

@dataclass(frozen=True)
class PlaneWaveCertificate:
    ok: bool
    lightlike: float  # max |h(V, V)|
    parallel: float  # max |Gamma^k_{i1}|, i.e. |nabla V|
    curvature: float  # max endomorphism norm of R(X, Y) on V-perp
    offending: str = ""

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def limit_is_plane_wave(limit: PlaneWaveLimit, points=None, tol: float = PLANE_WAVE_TOL,
                        samples: int = 8, seed: int = 0) -> PlaneWaveCertificate:
    """Check that ``V = d/dx1`` is null and parallel and that ``R(X, Y) = 0`` on ``V``-perp.

    ``V``-perp is spanned by ``d/dx1, ..., d/dxn`` since ``h(V, d_k) = delta_k0``.
    """
    if points is None:
        points = probe_points(limit.dim, samples, seed, box=1.0)
    metric = limit.metric()
    n = limit.dim
    lightlike = parallel = curvature = 0.0
    offending = ""
    for p in points:
        g = limit.matrix(p)
        lightlike = max(lightlike, abs(float(g[1, 1])))
        gamma = christoffel(metric, p).gamma
        par = float(np.max(np.abs(gamma[:, :, 1])))
        if par > parallel:
            parallel = par
            if par > tol and not offending:
                k, i = np.unravel_index(np.argmax(np.abs(gamma[:, :, 1])), gamma[:, :, 1].shape)
                offending = f"Gamma^{k}_({i},1) = {gamma[k, i, 1]:.3e} at {np.asarray(p).tolist()}"
        curv = riemann(metric, p)
        for a in range(1, n):
            for b in range(a + 1, n):
                e = endomorphism_norm(curv, metric, a, b)
                if e > curvature:
                    curvature = e
                    if e > tol and not offending:
                        offending = f"R(d{a}, d{b}) has norm {e:.3e} at {np.asarray(p).tolist()}"
    if lightlike > tol and not offending:
        offending = f"h(V, V) = {lightlike:.3e}"
    ok = lightlike <= tol and parallel <= tol and curvature <= tol
    return PlaneWaveCertificate(ok, lightlike, parallel, curvature, "" if ok else offending)


def ricci_max(metric: MetricField, points) -> float:
    return max(float(np.max(np.abs(riemann(metric, p).ricci))) for p in points)


# Brinkmann conversion and the dual ---------------------------------------------

def brinkmann_map(limit: PlaneWaveLimit) -> np.ndarray:
    """Jacobian ``M`` of the linear map ``(v, u, y) -> x~`` bringing a constant front to the identity.

    ``x~0 = u``, ``x~1 = v`` and ``x~_front = L y`` with ``L^T A L = I`` for the front block ``A``.
    """
    if not limit.front_is_constant():
        raise ConversionError("limit computed; Brinkmann conversion unsupported")
    a = limit.front_matrix()
    try:
        c = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise ConversionError("front block is not positive definite") from exc
    if abs(np.linalg.det(a)) < 1e-12:
        raise ConversionError("front block is singular")
    n = limit.dim
    m = np.zeros((n, n))
    m[0, 1] = 1.0  # x~0 = u
    m[1, 0] = 1.0  # x~1 = v
    m[2:, 2:] = np.linalg.inv(c).T
    return m


def limit_to_dual_pipeline(limit: PlaneWaveLimit, profile: str = "0", samples: int = 8,
                           seed: int = 0) -> dict:
    """Convert the limit to Brinkmann form and verify the almost Kähler dual.

    The limit of a chart with constant front is flat, so the wave profile of
    the Brinkmann chart is supplied by the caller (``"0"`` by default) in the
    coordinates ``(v, u, x3, ...)``.
    """
    n = limit.dim
    if n % 2 or n < 4:
        raise OddDimensionError(f"dual construction needs even dimension >= 4, got {n}")
    if not limit.front_is_constant():
        return {"status": "limit computed; Brinkmann conversion unsupported"}
    m = brinkmann_map(limit)
    rng = np.random.default_rng(seed)
    points = rng.uniform(-1.0, 1.0, (samples, n))
    flat = np.eye(n)
    flat[:2, :2] = [[0.0, 1.0], [1.0, 0.0]]
    pullback = max(float(np.max(np.abs(m.T @ limit.matrix(m @ p) @ m - flat))) for p in points)
    dual = make_dual(make_ppwave(n, profile))
    report = classify(dual, points)
    report["max_domega"] = max(float(np.max(np.abs(exterior_derivative_omega(dual, p)))) for p in points)
    return {
        "status": "converted",
        "front_transform": m[2:, 2:].tolist(),
        "pullback_residual": pullback,
        "classification": report,
    }


def penrose_report(chart: LightlikeChart, omegas=(1.0, 0.5, 0.1, 0.01), sweep=(1e-1, 1e-2, 1e-3),
                   samples: int = 20, seed: int = 0, profile: str = "0") -> dict:
    rng = np.random.default_rng(seed)
    points = rng.uniform(-0.5, 0.5, (samples, chart.dim))
    homothety = max(scale_metric(chart, w).homothety_residual(p) for w in omegas for p in points)
    connection = max(scale_metric(chart, w).connection_residual(p) for w in omegas for p in points[:4])
    limit = take_limit(chart)
    cert = limit_is_plane_wave(limit, points[: min(samples, 8)])
    report = {
        "source": chart.to_dict(),
        "omegas": [float(w) for w in omegas],
        "max_homothety_residual": homothety,
        "max_connection_residual": connection,
        "convergence": convergence_check(chart, sweep, samples, seed),
        "limit": limit.expressions(),
        "plane_wave": cert.as_dict(),
    }
    if chart.dim % 2 == 0 and chart.dim >= 4:
        report["dual"] = limit_to_dual_pipeline(limit, profile, min(samples, 8), seed)
    else:
        report["dual"] = {"status": "odd dimension; no almost complex structure"}
    return report


def fixture_charts() -> dict:
    """Reference lightlike charts used by the tests and the CLI."""
    return {
        "minkowski": make_lightlike_chart(4, {}),
        "exp_front": make_lightlike_chart(4, {"h22": "exp(x0)"}),
        "sin_offdiag": make_lightlike_chart(4, {"h23": "sin(x0)", "h22": "1", "h33": "1"}),
        "mixed": make_lightlike_chart(4, {"h11": "x2^2", "h12": "x0", "h22": "1 + x2", "h33": "1"}),
        "schwarzschild": make_lightlike_chart(4, {
            "h11": "-(1 - 2/(x0 + 3))",
            "h22": "(x0 + 3)^2",
            "h33": "(x0 + 3)^2*cos(x2)^2",
        }),
    }

