"""pp-wave charts, their standard Riemannian duals and the orthonormal frame.

A pp-wave chart has coordinates ``(v, u, x3, ..., xn)`` and metric

    h = H(u, x) du^2 + 2 dv du + sum (dx^i)^2

Its standard dual is ``g = h + 2 T_flat (x) T_flat`` for the unit timelike field
``T = (H + 1)/2 d_v - d_u``; in coordinates

    g_vv = 2,  g_vu = H,  g_uu = (1 + H^2)/2,  g_ii = 1.

The torus variant replaces ``(v, u, x3..xn)`` with angles ``(phi, theta)`` and
a flat ``2n``-torus with coordinates ``x1..x2n``; every formula carries over.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import MetricField, metric_from_jets
from .jet import Jet2
from .scalar_field import BinOp, Call, Const, Neg, Pow, ScalarField, Var

V, U = 0, 1  # indices of the null and wave coordinates


class ChartError(ValueError):
    pass


def ppwave_coordinates(n: int) -> tuple:
    return ("v", "u") + tuple(f"x{i}" for i in range(3, n + 1))


def torus_coordinates(n: int) -> tuple:
    return ("phi", "theta") + tuple(f"x{i}" for i in range(1, 2 * n + 1))


@dataclass(frozen=True)
class PpWaveChart:
    dim: int
    profile: ScalarField
    kind: str = "ppwave"
    # transverse index pairs (a, b) with J X_a = X_b, as chart indices
    pairs: tuple = field(default=())

    @property
    def coordinate_names(self) -> tuple:
        return self.profile.coordinate_names

    @property
    def transverse(self) -> range:
        return range(2, self.dim)

    def profile_jet(self, point, order: int = 2) -> Jet2:
        return self.profile.jet(point, order)

    def metric(self) -> MetricField:
        """The Lorentzian metric ``h``."""
        n = self.dim

        def entries(x):
            out = {(V, U): 1.0, (U, U): self.profile.jet(x)}
            out.update({(i, i): 1.0 for i in range(2, n)})
            return out

        return metric_from_jets(entries, n, "lorentzian", self.coordinate_names)

    def null_vector(self) -> np.ndarray:
        e = np.zeros(self.dim)
        e[V] = 1.0
        return e


@dataclass(frozen=True)
class TorusChart(PpWaveChart):
    kind: str = "torus"

    @property
    def half_rank(self) -> int:
        return (self.dim - 2) // 2


def _consecutive_pairs(dim: int) -> tuple:
    return tuple((a, a + 1) for a in range(2, dim, 2))


def make_ppwave(n: int, H) -> PpWaveChart:
    """pp-wave chart of dimension ``n`` with profile ``H`` (text or ScalarField)."""
    if n < 3:
        raise ChartError("pp-wave charts need dimension n >= 3")
    names = ppwave_coordinates(n)
    profile = ScalarField.parse(H, names) if isinstance(H, str) else H
    if tuple(profile.coordinate_names) != names:
        raise ChartError(f"profile coordinates {profile.coordinate_names} do not match {names}")
    if profile.depends_on("v"):
        raise ChartError("profile H must not depend on v")
    pairs = _consecutive_pairs(n) if n % 2 == 0 else ()
    return PpWaveChart(n, profile, "ppwave", pairs)


def is_plane_wave(chart: PpWaveChart, samples: int = 16, tol: float = 1e-8, seed: int = 0) -> bool:
    """True when H is quadratic in the transverse coordinates.

    Probes whether the transverse Hessian is independent of the transverse
    position: pairs of random points sharing ``(v, u)`` must agree.
    """
    rng = np.random.default_rng(seed)
    t = list(chart.transverse)
    if not t:
        return True
    for _ in range(samples):
        p = rng.uniform(-2.0, 2.0, chart.dim)
        q = p.copy()
        q[t] = rng.uniform(-2.0, 2.0, len(t))
        hp = chart.profile_jet(p).hess[np.ix_(t, t)]
        hq = chart.profile_jet(q).hess[np.ix_(t, t)]
        scale = 1.0 + max(np.max(np.abs(hp)), np.max(np.abs(hq)))
        if np.max(np.abs(hp - hq)) > tol * scale:
            return False
    return True


# standard dual -------------------------------------------------------------

@dataclass(frozen=True)
class DualChart:
    chart: PpWaveChart

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def coordinate_names(self) -> tuple:
        return self.chart.coordinate_names

    def metric(self) -> MetricField:
        n = self.dim

        def entries(x):
            H = self.chart.profile.jet(x)
            out = {(V, V): 2.0, (V, U): H, (U, U): 0.5 * (1.0 + H * H)}
            out.update({(i, i): 1.0 for i in range(2, n)})
            return out

        return metric_from_jets(entries, n, "riemannian", self.coordinate_names)

    def matrix(self, point) -> np.ndarray:
        H = float(self.chart.profile(point))
        g = np.eye(self.dim)
        g[V, V] = 2.0
        g[V, U] = g[U, V] = H
        g[U, U] = 0.5 * (1.0 + H * H)
        return g

    def timelike_field(self, point) -> np.ndarray:
        """``T = (H + 1)/2 d_v - d_u`` in coordinate components."""
        H = float(self.chart.profile(point))
        t = np.zeros(self.dim)
        t[V] = 0.5 * (H + 1.0)
        t[U] = -1.0
        return t


def make_dual(chart: PpWaveChart) -> DualChart:
    return DualChart(chart)


@dataclass(frozen=True)
class FrameData:
    """Orthonormal frame ``{T, X_3, ..., X_n, Z}`` at a point.

    ``vectors`` holds the frame vectors as columns; ``dvectors[k, a, l]`` is
    ``d_l`` of component ``k`` of frame vector ``a``.
    """

    point: np.ndarray
    labels: tuple
    vectors: np.ndarray
    dvectors: np.ndarray
    H: Jet2
    coordinate_names: tuple

    def index(self, label: str) -> int:
        return self.labels.index(label)


def frame_labels(chart: PpWaveChart) -> tuple:
    names = chart.coordinate_names
    return ("T",) + tuple("X" + names[i][1:] for i in chart.transverse) + ("Z",)


def make_frame(dual: DualChart, point) -> FrameData:
    point = np.asarray(point, dtype=float)
    n = dual.dim
    H = dual.chart.profile_jet(point)
    e = np.zeros((n, n))
    de = np.zeros((n, n, n))
    e[V, 0] = 0.5 * (float(H.value) + 1.0)
    e[U, 0] = -1.0
    e[V, n - 1] = 0.5 * (float(H.value) - 1.0)
    e[U, n - 1] = -1.0
    for a, i in enumerate(dual.chart.transverse, start=1):
        e[i, a] = 1.0
    de[V, 0] = 0.5 * H.grad
    de[V, n - 1] = 0.5 * H.grad
    return FrameData(point, frame_labels(dual.chart), e, de, H, dual.coordinate_names)


def dual_ricci_closed_form(dual: DualChart, point) -> np.ndarray:
    """Frame-basis Ricci tensor of the standard dual, assembled from the H-jet."""
    H = dual.chart.profile_jet(point)
    t = list(dual.chart.transverse)
    grad = H.grad[t]
    hess = H.hess
    lap = float(np.trace(hess[np.ix_(t, t)]))
    mixed = hess[U, t]
    n = dual.dim
    ric = np.zeros((n, n))
    z = n - 1
    ric[0, 0] = 0.5 * lap
    ric[z, z] = -0.5 * lap
    ric[0, z] = ric[z, 0] = -0.5 * float(grad @ grad)
    ric[0, 1:z] = ric[1:z, 0] = 0.5 * mixed
    ric[z, 1:z] = ric[1:z, z] = -0.5 * mixed
    ric[1:z, 1:z] = -0.5 * np.outer(grad, grad)
    return ric


def dual_scalar_closed_form(dual: DualChart, point) -> float:
    H = dual.chart.profile_jet(point, order=1)
    grad = H.grad[list(dual.chart.transverse)]
    return -0.5 * float(grad @ grad)


# torus ---------------------------------------------------------------------

def _integer_affine(node) -> bool:
    """Integer combination of coordinates plus an arbitrary constant."""
    if isinstance(node, (Const, Var)):
        return True
    if isinstance(node, Neg):
        return _integer_affine(node.arg)
    if isinstance(node, BinOp):
        if node.op in "+-":
            return _integer_affine(node.left) and _integer_affine(node.right)
        if node.op == "*":
            for c, other in ((node.left, node.right), (node.right, node.left)):
                if isinstance(c, Const) and float(c.value).is_integer():
                    return _integer_affine(other)
        return False
    return False


def is_periodic(node) -> bool:
    """Structural 2 pi-periodicity: coordinates only inside sin/cos of integer-affine arguments."""
    if isinstance(node, Const):
        return True
    if isinstance(node, Var):
        return False
    if isinstance(node, Call):
        if node.func in ("sin", "cos") and _integer_affine(node.arg):
            return True
        return is_periodic(node.arg)
    if isinstance(node, Neg):
        return is_periodic(node.arg)
    if isinstance(node, Pow):
        return is_periodic(node.base)
    return is_periodic(node.left) and is_periodic(node.right)


def make_torus_chart(n: int, H) -> TorusChart:
    """Plane-fronted wave on the ``(2n + 2)``-torus with flat front.

    ``n`` is the complex dimension of the front torus, so the chart has
    coordinates ``(phi, theta, x1, ..., x2n)``.
    """
    if n < 1:
        raise ChartError("torus front needs n >= 1")
    names = torus_coordinates(n)
    profile = ScalarField.parse(H, names) if isinstance(H, str) else H
    if tuple(profile.coordinate_names) != names:
        raise ChartError(f"profile coordinates {profile.coordinate_names} do not match {names}")
    if profile.depends_on("phi"):
        raise ChartError("profile H must not depend on phi")
    if not is_periodic(profile.expr):
        raise ChartError("torus profile must be built from sin/cos of integer combinations of coordinates")
    pairs = tuple((2 + k, 2 + n + k) for k in range(n))
    return TorusChart(2 * n + 2, profile, "torus", pairs)


# chart files ----------------------------------------------------------------

def chart_to_dict(chart: PpWaveChart) -> dict:
    return {"dimension": chart.dim, "kind": chart.kind, "profile": chart.profile.text}


def chart_from_dict(data: dict) -> PpWaveChart:
    kind = data.get("kind", "ppwave")
    dim = int(data["dimension"])
    if kind == "ppwave":
        return make_ppwave(dim, data["profile"])
    if kind == "torus":
        if dim < 4 or dim % 2:
            raise ChartError("torus charts have even dimension >= 4")
        return make_torus_chart((dim - 2) // 2, data["profile"])
    raise ChartError(f"unknown chart kind {kind!r}")


def save_chart(chart: PpWaveChart, path) -> None:
    Path(path).write_text(json.dumps(chart_to_dict(chart), indent=2) + "\n")


def load_chart(path) -> PpWaveChart:
    return chart_from_dict(json.loads(Path(path).read_text()))


def chart_for(dim: int, profile: str, kind: str = "ppwave") -> PpWaveChart:
    return chart_from_dict({"dimension": dim, "kind": kind, "profile": profile})
