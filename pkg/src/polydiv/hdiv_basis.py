"""Canonical bases of the polygonal H(div) spaces.

Normal functions stitch the vectors (x, y) and n_i (plus the two rescaled
misc vectors) to Poisson solutions driven by edge-indicator boundary data;
internal functions use homogeneous Dirichlet solves with monomial-family
sources.  Three space variants are provided: the classical space, the
reduced space with per-edge Lagrange boundary data, and the reduced space
with the natural globally-constant harmonic part.

Boundary traces of the construction are the prescribed Dirichlet data, so
normal traces are evaluated exactly from the data while interior values use
the finite-element fields.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .geometry import Edge, Point2, Polygon, ShapeViolation, validate_shape
from .polyfam import (
    BoundaryConstructorKind,
    InnerPolyKind,
    LagrangeSet,
    inner_poly,
    internal_count,
    lagrange_set,
)
from .poisson import (
    BoundaryData,
    ScalarField,
    TriMesh,
    default_mesh_size,
    solve_poisson_many,
    triangulate,
)
from .quadrature import QuadRule2D, triangle_rule

__all__ = [
    "SpaceTag",
    "HdivSpaceKind",
    "VectorField",
    "FunctionOrigin",
    "CanonicalBasis",
    "canonical_basis",
    "field_value",
    "normal_trace",
    "export_traces",
    "export_interior",
]


class SpaceTag(Enum):
    CLASSICAL = "classical"
    REDUCED_LAGRANGE_BC = "reduced"
    REDUCED_NATURAL = "reduced-natural"


@dataclass(frozen=True)
class HdivSpaceKind:
    """Space variant, order, and the constructor families used for the
    Poisson problems (boundary data g and second members h)."""

    tag: SpaceTag
    k: int
    boundary_constructor: BoundaryConstructorKind = BoundaryConstructorKind.LAGRANGIAN
    inner_constructor: InnerPolyKind = InnerPolyKind.HERMITE

    @property
    def per_edge_count(self) -> int:
        return self.k + 3 if self.tag is SpaceTag.CLASSICAL else self.k + 1

    @property
    def internal_total(self) -> int:
        return internal_count(self.k)

    def dimension(self, n_edges: int) -> int:
        return n_edges * self.per_edge_count + self.internal_total


class VectorField:
    """Vector field sum((x, y) c_f u_f) + sum(a_f u_f) over scalar fields.

    Linear combinations stay in this representation, which keeps exact
    boundary traces available for every combination.
    """

    __slots__ = ("mesh", "position_terms", "const_terms")

    def __init__(
        self,
        mesh: TriMesh,
        position_terms: Optional[Dict[ScalarField, float]] = None,
        const_terms: Optional[Dict[ScalarField, np.ndarray]] = None,
    ):
        self.mesh = mesh
        self.position_terms = dict(position_terms or {})
        self.const_terms = {f: np.asarray(a, dtype=float) for f, a in (const_terms or {}).items()}

    @classmethod
    def position(cls, u: ScalarField) -> "VectorField":
        return cls(u.mesh, {u: 1.0}, None)

    @classmethod
    def constant_vector(cls, a: Sequence[float], u: ScalarField) -> "VectorField":
        return cls(u.mesh, None, {u: np.asarray(a, dtype=float)})

    def __add__(self, other: "VectorField") -> "VectorField":
        pos = dict(self.position_terms)
        for f, c in other.position_terms.items():
            pos[f] = pos.get(f, 0.0) + c
        con = {f: a.copy() for f, a in self.const_terms.items()}
        for f, a in other.const_terms.items():
            con[f] = con.get(f, np.zeros(2)) + a
        return VectorField(self.mesh, pos, con)

    def __mul__(self, c) -> "VectorField":
        c = float(c)
        return VectorField(
            self.mesh,
            {f: c * v for f, v in self.position_terms.items()},
            {f: c * a for f, a in self.const_terms.items()},
        )

    __rmul__ = __mul__

    def __sub__(self, other: "VectorField") -> "VectorField":
        return self + other * (-1.0)

    def value(self, x: float, y: float) -> np.ndarray:
        """Field value inside the polygon (finite-element interpolation)."""
        out = np.zeros(2)
        for f, c in self.position_terms.items():
            v, _ = f.value_and_grad(x, y)
            out += c * v * np.array([x, y])
        for f, a in self.const_terms.items():
            v, _ = f.value_and_grad(x, y)
            out += v * a
        return out

    def trace_components(self, edge: Edge, s) -> Tuple[np.ndarray, np.ndarray]:
        """Exact boundary trace (q_x, q_y) on the edge at arc parameters s."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        pts = edge.point_at(s)
        qx = np.zeros_like(s)
        qy = np.zeros_like(s)
        for f, c in self.position_terms.items():
            data = c * np.asarray(f.boundary_value(edge.index, s), dtype=float)
            qx += pts[..., 0] * data
            qy += pts[..., 1] * data
        for f, a in self.const_terms.items():
            data = np.asarray(f.boundary_value(edge.index, s), dtype=float)
            qx += a[0] * data
            qy += a[1] * data
        return qx, qy

    def normal_trace_on(self, edge: Edge, s) -> np.ndarray:
        qx, qy = self.trace_components(edge, s)
        nx, ny = edge.normal
        return qx * nx + qy * ny

    def values_at_rule(self, rule: QuadRule2D) -> Tuple[np.ndarray, np.ndarray]:
        """(q_x, q_y) at the mesh quadrature points of ``rule``."""
        x, y, _ = self.mesh.rule_points(rule)
        qx = np.zeros_like(x)
        qy = np.zeros_like(y)
        for f, c in self.position_terms.items():
            u = c * f.values_at_rule(rule)
            qx += x * u
            qy += y * u
        for f, a in self.const_terms.items():
            u = f.values_at_rule(rule)
            qx += a[0] * u
            qy += a[1] * u
        return qx, qy


@dataclass(frozen=True)
class FunctionOrigin:
    group: str          # "normal" or "internal"
    edge: int = -1      # edge index for normal functions
    label: str = ""


@dataclass
class CanonicalBasis:
    """Canonical basis of one polygonal H(div) space on a shared mesh."""

    polygon: Polygon
    spec: HdivSpaceKind
    mesh: TriMesh
    normal_groups: List[List[VectorField]]
    internal_group: List[VectorField]
    origins: List[FunctionOrigin]
    tau_bc: float

    @property
    def functions(self) -> List[VectorField]:
        out: List[VectorField] = []
        for g in self.normal_groups:
            out.extend(g)
        out.extend(self.internal_group)
        return out

    @property
    def size(self) -> int:
        return sum(len(g) for g in self.normal_groups) + len(self.internal_group)


def _boundary_constructor_trace(
    kind: BoundaryConstructorKind, lagr: LagrangeSet, m: int, L: float
) -> Callable:
    if kind is BoundaryConstructorKind.LAGRANGIAN:
        return lambda s, m=m: lagr.eval(m, s)
    if kind is BoundaryConstructorKind.CANONICAL_CENTERED_SCALED:
        return lambda s, m=m: (2.0 * np.asarray(s, float) / L - 1.0) ** m
    if kind is BoundaryConstructorKind.CANONICAL_CENTERED_UNSCALED:
        return lambda s, m=m: (np.asarray(s, float) - L / 2.0) ** m
    raise ValueError(kind)


def _misc_vectors(edge: Edge) -> Tuple[np.ndarray, np.ndarray]:
    """The two rescaled misc vectors (103); each dots to one with the edge
    normal.  Axis-collinear edges get the documented (1, 0)/(0, 1) stand-ins
    so failing shapes can still be assembled for diagnosis."""
    nx, ny = edge.normal
    e3 = np.array([1.0, 0.0]) if abs(nx) < 1e-12 else np.array([nx + ny * ny / nx, 0.0])
    e4 = np.array([0.0, 1.0]) if abs(ny) < 1e-12 else np.array([0.0, ny + nx * nx / ny])
    return e3, e4


def _measure_tau_bc(gs: Sequence[ScalarField], polygon: Polygon, mesh: TriMesh) -> float:
    """Ten times the measured boundary interpolation error of the harmonic
    solves, floored at 1e-12.

    Samples stay clear of the corner cells: the discontinuous data is
    resolved there by the corner rule, so the deviation within one mesh cell
    of a vertex is a modelling choice, not solver error."""
    err = 0.0
    for g in gs:
        for e in polygon.edges:
            margin = max(2.0 * mesh.h, 0.05 * e.length)
            if 2.0 * margin >= e.length:
                s = np.array([e.length / 2.0])
            else:
                s = np.linspace(margin, e.length - margin, 16)
            data = np.asarray(g.boundary_value(e.index, s), dtype=float)
            for si, di in zip(s, data):
                pt = e.point_at(si)
                try:
                    v, _ = g.value_and_grad(float(pt[0]), float(pt[1]))
                except Exception:
                    continue
                err = max(err, abs(v - di))
    return 10.0 * max(err, 1e-12)


def canonical_basis(
    polygon: Polygon,
    spec: HdivSpaceKind,
    mesh: Optional[TriMesh] = None,
    h: Optional[float] = None,
    fe_degree: int = 2,
    allow_invalid: bool = False,
    max_workers: Optional[int] = None,
) -> CanonicalBasis:
    """Construct the canonical basis, sharing one mesh for all solves."""
    diag = validate_shape(polygon)
    if diag.violations and not allow_invalid:
        raise ShapeViolation(diag)
    if mesh is None:
        mesh = triangulate(polygon, h if h is not None else default_mesh_size(polygon))

    k = spec.k
    n = polygon.n_edges
    hull = (polygon.hull_barycenter, polygon.hull_area)
    rule_degree = 2 * k + 4

    def h_source(i: int, j: int) -> Callable:
        return lambda x, y, i=i, j=j: inner_poly(spec.inner_constructor, i, j, x, y, hull)

    # one batch of Poisson problems: edge f-functions, harmonic g's, then
    # the homogeneous internal h-functions
    problems: List[Tuple[Optional[Callable], BoundaryData]] = []
    f_index: Dict[Tuple[int, int], int] = {}
    boundary_source = h_source(k - 1, k - 1) if k >= 1 else None
    lagr_sets = [lagrange_set(e, k) for e in polygon.edges]
    for e in polygon.edges:
        for m in range(k + 1):
            trace = _boundary_constructor_trace(
                spec.boundary_constructor, lagr_sets[e.index], m, e.length
            )
            f_index[(e.index, m)] = len(problems)
            problems.append((boundary_source, BoundaryData.indicator(polygon, e.index, trace)))
    g_index: Dict[int, int] = {}
    if spec.tag is SpaceTag.REDUCED_NATURAL:
        shared = len(problems)
        problems.append((None, BoundaryData.constant(polygon, 2.0)))
        for e in polygon.edges:
            g_index[e.index] = shared
    else:
        for e in polygon.edges:
            g_index[e.index] = len(problems)
            problems.append((None, BoundaryData.indicator(polygon, e.index, 2.0)))
    hfield_index: Dict[Tuple[int, int], int] = {}
    for l in range(k):
        for m in range(k):
            hfield_index[(l, m)] = len(problems)
            problems.append((h_source(l, m), BoundaryData.zero(polygon)))

    fields = solve_poisson_many(
        mesh, problems, degree=fe_degree, rule_degree=rule_degree, max_workers=max_workers
    )
    f_of = lambda e, m: fields[f_index[(e, m)]]
    g_of = lambda e: fields[g_index[e]]
    h_of = lambda l, m: fields[hfield_index[(l, m)]]

    normal_groups: List[List[VectorField]] = []
    origins: List[FunctionOrigin] = []
    for e in polygon.edges:
        group: List[VectorField] = []
        g = g_of(e.index)
        for m in range(k + 1):
            fn = VectorField.position(f_of(e.index, m)) + VectorField.constant_vector(
                e.normal, g
            )
            group.append(fn)
            origins.append(FunctionOrigin("normal", e.index, f"edge{e.index}:core{m}"))
        if spec.tag is SpaceTag.CLASSICAL:
            e3, e4 = _misc_vectors(e)
            m_last = max(k - 1, 0)  # f_{i,k} stands in for f_{i,k+1}
            group.append(
                VectorField.position(f_of(e.index, 0)) - VectorField.constant_vector(e3, g)
            )
            origins.append(FunctionOrigin("normal", e.index, f"edge{e.index}:misc-x"))
            group.append(
                VectorField.position(f_of(e.index, m_last)) - VectorField.constant_vector(e4, g)
            )
            origins.append(FunctionOrigin("normal", e.index, f"edge{e.index}:misc-y"))
        normal_groups.append(group)

    internal_group: List[VectorField] = []
    for l in range(k - 1):  # F_l, sources h_{l, k-1}
        internal_group.append(VectorField.position(h_of(l, k - 1)))
        origins.append(FunctionOrigin("internal", -1, f"F{l}"))
    for l in range(k):      # G_l, sources h_{k-1, l}
        internal_group.append(VectorField.position(h_of(k - 1, l)))
        origins.append(FunctionOrigin("internal", -1, f"G{l}"))
    for l in range(k):
        for m in range(k):
            internal_group.append(VectorField.constant_vector((1.0, 0.0), h_of(l, m)))
            origins.append(FunctionOrigin("internal", -1, f"Hx{l}{m}"))
    for l in range(k):
        for m in range(k):
            internal_group.append(VectorField.constant_vector((0.0, 1.0), h_of(l, m)))
            origins.append(FunctionOrigin("internal", -1, f"Hy{l}{m}"))

    gs = [g_of(e.index) for e in polygon.edges]
    tau = _measure_tau_bc(gs, polygon, mesh)

    basis = CanonicalBasis(
        polygon=polygon,
        spec=spec,
        mesh=mesh,
        normal_groups=normal_groups,
        internal_group=internal_group,
        origins=origins,
        tau_bc=tau,
    )
    expected = spec.dimension(n)
    if basis.size != expected:
        raise AssertionError(f"basis size {basis.size} != space dimension {expected}")
    return basis


def field_value(v: VectorField, pt: Union[Point2, Tuple[float, float]]) -> np.ndarray:
    x, y = (pt.x, pt.y) if isinstance(pt, Point2) else (float(pt[0]), float(pt[1]))
    return v.value(x, y)


def normal_trace(v: VectorField, e: Edge, s) -> np.ndarray:
    """q . n on the edge at arc parameter(s) s, from the exact trace."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < -1e-12) or np.any(s_arr > e.length + 1e-12):
        from .geometry import OutOfRange

        raise OutOfRange(f"arc parameter outside [0, {e.length}]")
    out = v.normal_trace_on(e, np.clip(s_arr, 0.0, e.length))
    return out if out.shape else float(out)


def export_traces(
    functions: Sequence[VectorField],
    polygon: Polygon,
    path,
    samples_per_edge: int = 33,
) -> None:
    """CSV of sampled normal traces: columns edge, s, value, function_id."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["edge", "s", "value", "function_id"])
        for fid, fn in enumerate(functions):
            for e in polygon.edges:
                s = np.linspace(0.0, e.length, samples_per_edge)
                vals = fn.normal_trace_on(e, s)
                for si, vi in zip(s, vals):
                    w.writerow([e.index, repr(float(si)), repr(float(vi)), fid])


def export_interior(
    functions: Sequence[VectorField],
    mesh: TriMesh,
    path,
    rule_degree: int = 2,
) -> None:
    """CSV of interior samples: columns x, y, vx, vy, function_id."""
    rule = triangle_rule(rule_degree)
    x, y, _ = mesh.rule_points(rule)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "vx", "vy", "function_id"])
        for fid, fn in enumerate(functions):
            qx, qy = fn.values_at_rule(rule)
            for xi, yi, vx, vy in zip(x, y, qx, qy):
                w.writerow([repr(float(xi)), repr(float(yi)), repr(float(vx)), repr(float(vy)), fid])
