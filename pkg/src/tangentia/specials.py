"""Worked special-function classes: distance functions to closed sets
(with nearest-point sets and the medial axis), infimal convolution, and
pointwise maxima of smooth families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .funcspace import DirectionalFunction

__all__ = [
    "ClosedSetModel",
    "distance_function",
    "nearest_set",
    "distance_directional_derivative",
    "MedialPoint",
    "medial_scan",
    "medial_to_csv",
    "inf_convolution",
    "MaxFamily",
    "max_family_derivative",
]


def _segment_nearest(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    t = float((p - a) @ ab) / float(ab @ ab)
    t = min(max(t, 0.0), 1.0)
    return a + t * ab


@dataclass(frozen=True)
class ClosedSetModel:
    """A closed set A given as finite points, a polygon boundary, or a
    grid level-set.

    Nearest-point queries on the grid kind are cell-accurate only: the
    candidates are linear zero crossings along grid edges.
    """

    kind: str  # "points" | "polygon" | "levelset"
    points: Optional[np.ndarray] = None  # (k, n) for points/levelset candidates
    vertices: Optional[np.ndarray] = None  # (k, 2) closed loop for polygon
    query_tol: float = 1e-9

    @property
    def dimension(self) -> int:
        if self.kind == "polygon":
            return 2
        return self.points.shape[1]

    @classmethod
    def from_points(cls, pts) -> "ClosedSetModel":
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.size == 0:
            raise ValueError("the set must be nonempty")
        return cls("points", points=pts)

    @classmethod
    def from_polygon(cls, vertices) -> "ClosedSetModel":
        verts = np.atleast_2d(np.asarray(vertices, dtype=float))
        if verts.shape[0] < 3 or verts.shape[1] != 2:
            raise ValueError("polygon needs >= 3 2D vertices (closed loop)")
        return cls("polygon", vertices=verts)

    @classmethod
    def from_grid_levelset(cls, grid, level: float = 0.0) -> "ClosedSetModel":
        """Zero crossings of grid samples along grid edges, per axis."""
        shaped = grid.samples.reshape(grid.resolution) - level
        axes = grid.axes()
        n = grid.dimension
        cands = []
        for ax in range(n):
            lo = [slice(None)] * n
            hi = [slice(None)] * n
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            a = shaped[tuple(lo)]
            b = shaped[tuple(hi)]
            cross = (a == 0.0) | (a * b < 0.0)
            idx = np.argwhere(cross)
            for ind in idx:
                va = a[tuple(ind)]
                vb = b[tuple(ind)]
                t = 0.0 if va == vb else va / (va - vb)
                point = np.array(
                    [axes[d][ind[d]] for d in range(n)], dtype=float
                )
                step = axes[ax][1] - axes[ax][0]
                point[ax] += t * step
                cands.append(point)
        if not cands:
            raise ValueError("level set is empty on the grid")
        return cls("levelset", points=np.array(cands))

    def candidate_points(self) -> np.ndarray:
        if self.kind in ("points", "levelset"):
            return self.points
        return self.vertices


def nearest_set(
    A: ClosedSetModel, x, rel_tol: float = 1e-6
) -> Tuple[float, List[np.ndarray]]:
    """Distance to A and every nearest point within relative tolerance.

    Exact enumeration over points and polygon edges; level-set models
    return cell-accurate candidates.  x must lie off the set.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if A.kind == "polygon":
        cands = []
        verts = A.vertices
        k = verts.shape[0]
        for i in range(k):
            cands.append(_segment_nearest(x, verts[i], verts[(i + 1) % k]))
        cands = np.array(cands)
    else:
        cands = A.points
    d = np.linalg.norm(cands - x[None, :], axis=1)
    dmin = float(np.min(d))
    if dmin <= A.query_tol:
        raise ValueError(
            f"point {tuple(x)} lies on the set (distance {dmin:.3e}); "
            "the distance function is defined off the set only"
        )
    close = cands[d <= dmin * (1.0 + rel_tol)]
    # dedup coincident candidates (shared polygon vertices etc.)
    out: List[np.ndarray] = []
    for p in close:
        if all(np.linalg.norm(p - q) > 1e-9 * (1.0 + dmin) for q in out):
            out.append(p)
    return dmin, out


def distance_directional_derivative(A: ClosedSetModel, x, theta) -> float:
    """min over nearest points y of theta . (x - y)/|x - y|."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    _, nearest = nearest_set(A, x)
    vals = []
    for y in nearest:
        u = x - y
        vals.append(float(theta @ u) / float(np.linalg.norm(u)))
    return min(vals)


def distance_function(A: ClosedSetModel) -> DirectionalFunction:
    """The 1-Lipschitz distance-to-A as a DirectionalFunction."""
    n = A.dimension

    def ev(x):
        if A.kind == "polygon":
            verts = A.vertices
            k = verts.shape[0]
            best = math.inf
            for i in range(k):
                q = _segment_nearest(x, verts[i], verts[(i + 1) % k])
                best = min(best, float(np.linalg.norm(x - q)))
            return best
        return float(np.min(np.linalg.norm(A.points - x[None, :], axis=1)))

    batch = None
    if A.kind in ("points", "levelset"):

        def batch(pts):
            from scipy.spatial.distance import cdist

            return np.min(cdist(pts, A.points), axis=1)

    def deriv(x, theta):
        return distance_directional_derivative(A, x, theta)

    pts = A.candidate_points()
    lo = pts.min(axis=0) - 1.0
    hi = pts.max(axis=0) + 1.0
    return DirectionalFunction(
        evaluator=ev,
        dimension=n,
        derivative=deriv,
        lipschitz=1.0,
        batch_evaluator=batch,
        support=(lo, hi),
        label=f"dist[{A.kind}]",
    )


# ---------------------------------------------------------------------------
# medial axis by grid scan


@dataclass(frozen=True)
class MedialPoint:
    point: Tuple[float, ...]
    distance: float
    multiplicity: int


def medial_scan(
    A: ClosedSetModel,
    box,
    resolution,
    tie_factor: float = 0.6,
    angular_dedup: float = 1e-4,
) -> List[MedialPoint]:
    """Grid points annotated with their nearest-point multiplicity.

    Ties are counted with an absolute tolerance of tie_factor * cell
    (grid arithmetic never produces exact ties) and nearest points
    closer than angular_dedup radians apart, as seen from x, count once.
    Multiplicity >= 2 constitutes the detected medial axis.
    """
    lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in box)
    n = A.dimension
    if np.isscalar(resolution):
        resolution = (int(resolution),) * n
    axes = [np.linspace(lo[i], hi[i], resolution[i]) for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    cell = float(np.max((hi - lo) / (np.array(resolution) - 1)))
    tie = tie_factor * cell

    out = []
    for x in pts:
        try:
            dmin, _ = nearest_set(A, x)
        except ValueError:
            continue  # on the set
        _, nearest = nearest_set(A, x, rel_tol=tie / dmin if dmin > 0 else 0.0)
        dirs = []
        for y in nearest:
            u = (x - y) / np.linalg.norm(x - y)
            if all(
                math.acos(min(1.0, max(-1.0, float(u @ v)))) > angular_dedup
                for v in dirs
            ):
                dirs.append(u)
        out.append(MedialPoint(tuple(x), dmin, len(dirs)))
    return out


def medial_to_csv(points: Sequence[MedialPoint], path, dimension: int):
    cols = [f"x{i + 1}" for i in range(dimension)] + ["dist", "multiplicity"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for p in points:
            row = [f"{c:.12g}" for c in p.point]
            row += [f"{p.distance:.12g}", str(p.multiplicity)]
            fh.write(",".join(row) + "\n")


# ---------------------------------------------------------------------------
# infimal convolution


def inf_convolution(
    u: DirectionalFunction,
    coupling: Callable[[np.ndarray, np.ndarray], float],
    x,
    y_box,
    y_resolution: int = 257,
    tol: float = 1e-9,
    strict: bool = False,
):
    """min over the y-box of u(y) + coupling(x, y), grid plus local descent.

    Returns (value, minimizer list, boundary_flag); a minimum attained
    on the box boundary means the box was too small, which is an error
    in strict mode.
    """
    from scipy.optimize import minimize

    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in y_box)
    n = u.dimension
    axes = [np.linspace(lo[i], hi[i], y_resolution) for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    ys = np.stack([m.ravel() for m in mesh], axis=-1)
    vals = u.evaluate_many(ys) + np.array([coupling(x, y) for y in ys])

    obj = lambda y: u(y) + float(coupling(x, y))  # noqa: E731
    vmin = float(np.min(vals))
    cell = float(np.max((hi - lo) / (y_resolution - 1)))
    seeds = ys[vals <= vmin + max(10.0 * tol, cell)]
    minimizers: List[np.ndarray] = []
    best = vmin
    refined = []
    for s in seeds:
        res = minimize(
            obj,
            s,
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-14},
        )
        y = np.clip(res.x, lo, hi)
        refined.append((float(obj(y)), y))
    for v, _ in refined:
        best = min(best, v)
    for v, y in refined:
        if v <= best + tol and all(
            np.linalg.norm(y - m) > 1e-6 * (1.0 + np.linalg.norm(y))
            for m in minimizers
        ):
            minimizers.append(y)
    boundary = any(
        np.any(np.abs(m - lo) < 2.0 * cell) or np.any(np.abs(m - hi) < 2.0 * cell)
        for m in minimizers
    )
    if strict and boundary:
        raise ValueError(
            "infimal convolution minimum attained at the y-box boundary; "
            "enlarge the box"
        )
    return best, minimizers, boundary


# ---------------------------------------------------------------------------
# pointwise maxima of smooth families


@dataclass(frozen=True)
class MaxFamily:
    """Finitely many C1 members with gradient oracles.

    Member gradients are spot-checked against central differences at
    construction (10 seeded probes, 1e-5 agreement).
    """

    members: Tuple[Callable[[np.ndarray], float], ...]
    gradients: Tuple[Callable[[np.ndarray], np.ndarray], ...]
    dimension: int
    active_tol: float = 1e-9

    def __post_init__(self):
        if not self.members:
            raise ValueError("family must be nonempty")
        if len(self.members) != len(self.gradients):
            raise ValueError("need one gradient per member")
        rng = np.random.default_rng(0)
        probes = rng.uniform(-1.0, 1.0, size=(10, self.dimension))
        h = 1e-6
        eye = np.eye(self.dimension)
        for fk, gk in zip(self.members, self.gradients):
            for p in probes:
                g = np.asarray(gk(p), dtype=float)
                fd = np.array(
                    [
                        (fk(p + h * eye[i]) - fk(p - h * eye[i])) / (2.0 * h)
                        for i in range(self.dimension)
                    ]
                )
                if np.max(np.abs(g - fd)) > 1e-5 * (1.0 + np.max(np.abs(g))):
                    raise ValueError(
                        "member gradient disagrees with finite differences "
                        f"at probe {tuple(p)}"
                    )

    def value(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return max(float(fk(x)) for fk in self.members)

    def as_function(self, with_oracle: bool = True) -> DirectionalFunction:
        deriv = None
        if with_oracle:
            deriv = lambda x, th: max_family_derivative(self, x, th)  # noqa: E731
        return DirectionalFunction(
            evaluator=lambda x: self.value(x),
            dimension=self.dimension,
            derivative=deriv,
            label="maxfamily",
        )


def max_family_derivative(F: MaxFamily, x, theta) -> float:
    """max over the active members of grad f_k(x) . theta."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    vals = np.array([fk(x) for fk in F.members])
    top = float(np.max(vals))
    active = np.flatnonzero(vals >= top - F.active_tol * (1.0 + abs(top)))
    return max(float(np.asarray(F.gradients[k](x)) @ theta) for k in active)
