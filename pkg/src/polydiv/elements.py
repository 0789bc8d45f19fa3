"""Degree-of-freedom sets for the element configurations Ia/Ib/IbShifted/
IIa/IIb/IIbShifted, transfer-matrix assembly, duality tuning, condition
numbers, and classification of degenerating basis functions.

Edge moments integrate in the arc-length measure with exact boundary traces;
interior moments integrate the finite-element fields over the shared mesh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .geometry import Edge, Polygon, ShapeViolation, validate_shape
from .hdiv_basis import CanonicalBasis, FunctionOrigin, HdivSpaceKind, SpaceTag, VectorField
from .polyfam import BoundaryProjectorKind, InnerPolyKind, boundary_projector, inner_poly
from .quadrature import edge_rule_points, triangle_rule

__all__ = [
    "CountMismatch",
    "SingularTransfer",
    "ElementConfig",
    "Dof",
    "TransferMatrix",
    "TunedBasis",
    "DegenerationReport",
    "dof_set",
    "apply_dof",
    "assemble_transfer",
    "tune_basis",
    "condition_2norm",
    "classify_degenerate",
    "zero_rows",
    "edge_block_singular_ratios",
    "boundary_characterization_matrix",
    "CONFIG_NAMES",
    "COND_CEILING",
]

CONFIG_NAMES = ("Ia", "Ib", "IbShifted", "IIa", "IIb", "IIbShifted")
COND_CEILING = 1e14


class CountMismatch(AssertionError):
    pass


class SingularTransfer(RuntimeError):
    pass


@dataclass(frozen=True)
class ElementConfig:
    """One element: configuration name, space, misc vector v and projector
    families.  Quadrature orders default to k+3 points on edges and degree
    2k+4 in the interior."""

    config: str
    space: HdivSpaceKind
    v: Tuple[float, float] = (1.0, 1.0)
    boundary_projector: BoundaryProjectorKind = BoundaryProjectorKind.HERMITE
    inner_projector: InnerPolyKind = InnerPolyKind.HERMITE
    boundary_rule_points: Optional[int] = None
    interior_rule_degree: Optional[int] = None

    def __post_init__(self):
        if self.config not in CONFIG_NAMES:
            raise ValueError(f"config must be one of {CONFIG_NAMES}")

    @property
    def k(self) -> int:
        return self.space.k

    @property
    def n_edge_points(self) -> int:
        return self.boundary_rule_points or (self.k + 3)

    @property
    def rule_degree(self) -> int:
        return self.interior_rule_degree or (2 * self.k + 4)

    @property
    def is_I_family(self) -> bool:
        return self.config in ("Ia", "Ib", "IbShifted")


@dataclass
class Dof:
    """A tagged linear functional on vector fields.

    Moment kinds carry precomputed quadrature nodes/weights and kernels;
    point kinds evaluate the trace at the edge midpoint.  ``shift`` is the
    constant subtracted by the Shifted variants.
    """

    kind: str
    label: str
    edge: Optional[Edge] = None
    s: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None
    kernel: Optional[np.ndarray] = None       # evaluated on the edge nodes
    vvec: Optional[np.ndarray] = None         # misc vector of the I family
    shift: float = 0.0
    # interior moments
    family: Optional[InnerPolyKind] = None
    ij: Tuple[int, int] = (0, 0)
    coupled_ij: Optional[Tuple[Tuple[int, int], Tuple[int, int]]] = None
    hull: Optional[tuple] = None
    rule_degree: int = 4
    _kernel_cache: dict = field(default_factory=dict, repr=False)

    def apply(self, q: VectorField) -> float:
        e = self.edge
        if self.kind == "core":
            return float(np.dot(self.w, self.kernel * q.normal_trace_on(e, self.s)))
        if self.kind == "misc-I":
            qx, qy = q.trace_components(e, self.s)
            return float(np.dot(self.w, self.s * (self.vvec[0] * qx + self.vvec[1] * qy)))
        if self.kind == "misc-IIa":
            return float(np.dot(self.w, q.normal_trace_on(e, self.s)))
        if self.kind == "misc-IIb":
            return float(q.normal_trace_on(e, np.array([e.length / 2.0]))[0]) - self.shift
        if self.kind == "supp-int-x":
            qx, _ = q.trace_components(e, self.s)
            return float(np.dot(self.w, self.kernel * qx)) * e.normal[0]
        if self.kind == "supp-int-y":
            _, qy = q.trace_components(e, self.s)
            return float(np.dot(self.w, self.kernel * qy)) * e.normal[1]
        if self.kind == "supp-pt-x":
            qx, _ = q.trace_components(e, np.array([e.length / 2.0]))
            return float(qx[0]) * e.normal[0] - self.shift
        if self.kind == "supp-pt-y":
            _, qy = q.trace_components(e, np.array([e.length / 2.0]))
            return float(qy[0]) * e.normal[1] - self.shift
        if self.kind.startswith("internal"):
            return self._apply_internal(q)
        raise ValueError(self.kind)

    def _kernels_on(self, mesh) -> tuple:
        key = id(mesh)
        if key not in self._kernel_cache:
            rule = triangle_rule(self.rule_degree)
            x, y, w = mesh.rule_points(rule)
            if self.kind == "internal-coupled":
                (lx, mx), (ly, my) = self.coupled_ij
                kx = inner_poly(self.family, lx, mx, x, y, self.hull)
                ky = inner_poly(self.family, ly, my, x, y, self.hull)
            elif self.kind == "internal-x":
                kx = inner_poly(self.family, self.ij[0], self.ij[1], x, y, self.hull)
                ky = None
            else:
                kx = None
                ky = inner_poly(self.family, self.ij[0], self.ij[1], x, y, self.hull)
            self._kernel_cache[key] = (rule, w, kx, ky)
        return self._kernel_cache[key]

    def _apply_internal(self, q: VectorField) -> float:
        rule, w, kx, ky = self._kernels_on(q.mesh)
        qx, qy = q.values_at_rule(rule)
        out = 0.0
        if kx is not None:
            out += float(np.dot(w, kx * qx))
        if ky is not None:
            out += float(np.dot(w, ky * qy))
        return out


def dof_set(polygon: Polygon, cfg: ElementConfig) -> List[Dof]:
    """Ordered degrees of freedom: per edge core (ascending projector
    degree), misc, supplementary (x then y); interior moments last, x
    component then y component in (l, m) order, coupled moment final."""
    diag = validate_shape(polygon, cfg.config if cfg.is_I_family else None, cfg.v)
    if diag.violations:
        raise ShapeViolation(diag)
    return _dof_set_unchecked(polygon, cfg)


def _dof_set_unchecked(polygon: Polygon, cfg: ElementConfig) -> List[Dof]:
    k = cfg.k
    reduced = cfg.space.tag is not SpaceTag.CLASSICAL
    dofs: List[Dof] = []
    for e in polygon.edges:
        s, w = edge_rule_points(e, cfg.n_edge_points)
        for i in range(1, k + 1):
            kernel = np.asarray(boundary_projector(cfg.boundary_projector, i, s, e.length))
            dofs.append(Dof("core", f"edge{e.index}:core{i}", edge=e, s=s, w=w, kernel=kernel))
        if cfg.is_I_family:
            dofs.append(
                Dof("misc-I", f"edge{e.index}:misc", edge=e, s=s, w=w, vvec=np.asarray(cfg.v, float))
            )
        elif cfg.config == "IIa":
            dofs.append(Dof("misc-IIa", f"edge{e.index}:misc", edge=e, s=s, w=w))
        else:
            shift = 1.0 if cfg.config == "IIbShifted" else 0.0
            dofs.append(Dof("misc-IIb", f"edge{e.index}:misc", edge=e, shift=shift))
        if not reduced:
            pts = e.point_at(s)
            if cfg.config == "Ia":
                ones = np.ones_like(s)
                dofs.append(Dof("supp-int-x", f"edge{e.index}:supp-x", edge=e, s=s, w=w, kernel=ones))
                dofs.append(Dof("supp-int-y", f"edge{e.index}:supp-y", edge=e, s=s, w=w, kernel=ones))
            elif cfg.config in ("Ib", "IbShifted"):
                shift = 1.0 if cfg.config == "IbShifted" else 0.0
                dofs.append(Dof("supp-pt-x", f"edge{e.index}:supp-x", edge=e, shift=shift))
                dofs.append(Dof("supp-pt-y", f"edge{e.index}:supp-y", edge=e, shift=shift))
            else:  # IIa / IIb / IIbShifted share the coordinate-weighted moments
                dofs.append(
                    Dof("supp-int-x", f"edge{e.index}:supp-x", edge=e, s=s, w=w, kernel=pts[:, 0])
                )
                dofs.append(
                    Dof("supp-int-y", f"edge{e.index}:supp-y", edge=e, s=s, w=w, kernel=pts[:, 1])
                )
    hull = (polygon.hull_barycenter, polygon.hull_area)
    if k > 0:
        for l in range(k + 1):
            for m in range(k):
                if (l, m) == (k, k - 1):
                    continue
                dofs.append(
                    Dof(
                        "internal-x",
                        f"int:x:q{l}{m}",
                        family=cfg.inner_projector,
                        ij=(l, m),
                        hull=hull,
                        rule_degree=cfg.rule_degree,
                    )
                )
        for l in range(k + 1):
            for m in range(k):
                if (l, m) == (k, k - 1):
                    continue
                dofs.append(
                    Dof(
                        "internal-y",
                        f"int:y:q{m}{l}",
                        family=cfg.inner_projector,
                        ij=(m, l),
                        hull=hull,
                        rule_degree=cfg.rule_degree,
                    )
                )
        dofs.append(
            Dof(
                "internal-coupled",
                "int:coupled",
                family=cfg.inner_projector,
                coupled_ij=((k, k - 1), (k - 1, k)),
                hull=hull,
                rule_degree=cfg.rule_degree,
            )
        )
    expected = cfg.space.dimension(polygon.n_edges)
    if len(dofs) != expected:
        raise CountMismatch(f"{len(dofs)} DOFs assembled, space dimension {expected}")
    return dofs


def apply_dof(d: Dof, q: VectorField) -> float:
    return d.apply(q)


@dataclass
class TransferMatrix:
    """Lambda with Lambda_ij = sigma_i(phi_j), DOFs and functions grouped by
    edge then internal."""

    matrix: np.ndarray
    row_labels: List[str]
    col_labels: List[str]
    edge_rows: List[slice]
    edge_cols: List[slice]
    internal_rows: slice
    internal_cols: slice

    _svals: Optional[np.ndarray] = None

    @property
    def singular_values(self) -> np.ndarray:
        if self._svals is None:
            self._svals = np.linalg.svd(self.matrix, compute_uv=False)
        return self._svals

    @property
    def cond2(self) -> float:
        sv = self.singular_values
        if sv[-1] == 0.0:
            return math.inf
        return float(sv[0] / sv[-1])

    @property
    def internal_submatrix(self) -> np.ndarray:
        return self.matrix[self.internal_rows, self.internal_cols]

    def edge_block(self, i: int) -> np.ndarray:
        return self.matrix[self.edge_rows[i], self.edge_cols[i]]


def assemble_transfer(dofs: Sequence, basis: Union[CanonicalBasis, Sequence]) -> TransferMatrix:
    """Assemble Lambda for any basis whose functions the DOFs accept."""
    if isinstance(basis, CanonicalBasis):
        functions = basis.functions
        col_labels = [o.label for o in basis.origins]
        group_sizes = [len(g) for g in basis.normal_groups]
    else:
        functions = list(getattr(basis, "functions", basis))
        col_labels = [f"fn{j}" for j in range(len(functions))]
        group_sizes = []
        if hasattr(basis, "normal_groups"):
            group_sizes = [len(g) for g in basis.normal_groups]
    n = len(functions)
    if len(dofs) != n:
        raise CountMismatch(f"{len(dofs)} DOFs vs {n} functions")
    L = np.empty((n, n))
    for i, d in enumerate(dofs):
        for j, fn in enumerate(functions):
            L[i, j] = d.apply(fn)
    row_labels = [getattr(d, "label", f"dof{i}") for i, d in enumerate(dofs)]
    edge_rows: List[slice] = []
    edge_cols: List[slice] = []
    start = 0
    for size in group_sizes:
        edge_rows.append(slice(start, start + size))
        edge_cols.append(slice(start, start + size))
        start += size
    return TransferMatrix(
        matrix=L,
        row_labels=row_labels,
        col_labels=col_labels,
        edge_rows=edge_rows,
        edge_cols=edge_cols,
        internal_rows=slice(start, n),
        internal_cols=slice(start, n),
    )


def _inverse_transpose(L: np.ndarray) -> np.ndarray:
    """Inverse transpose with two Newton refinement sweeps, keeping the
    duality residual near machine precision for moderate conditionings."""
    n = L.shape[0]
    eye = np.eye(n)
    X = np.linalg.solve(L, eye)
    for _ in range(2):
        X = X + X @ (eye - L @ X)
    return X.T


@dataclass
class TunedBasis:
    """Basis dual to the DOFs: phi'_j = sum_m A_jm phi_m with A the inverse
    transpose of the transfer matrix."""

    functions: List
    A: np.ndarray
    origins: List[FunctionOrigin]
    transfer: TransferMatrix

    def duality_residual(self) -> float:
        n = self.A.shape[0]
        return float(np.max(np.abs(self.transfer.matrix @ self.A.T - np.eye(n))))


def tune_basis(
    T: TransferMatrix,
    basis: Union[CanonicalBasis, Sequence],
    cond_ceiling: float = COND_CEILING,
) -> TunedBasis:
    cond = T.cond2
    if not np.isfinite(cond) or cond > cond_ceiling:
        raise SingularTransfer(
            f"transfer matrix condition {cond:.3e} above ceiling {cond_ceiling:.0e};"
            " the shape/DOF combination is not unisolvent"
        )
    A = _inverse_transpose(T.matrix)
    if isinstance(basis, CanonicalBasis):
        raw = basis.functions
        origins = list(basis.origins)
    else:
        raw = list(getattr(basis, "functions", basis))
        origins = [FunctionOrigin("normal", -1, f"fn{j}") for j in range(len(raw))]
    tuned = []
    for j in range(A.shape[0]):
        fn = raw[0] * A[j, 0]
        for m in range(1, A.shape[1]):
            if A[j, m] != 0.0:
                fn = fn + raw[m] * A[j, m]
        tuned.append(fn)
    return TunedBasis(functions=tuned, A=A, origins=origins, transfer=T)


def condition_2norm(T: Union[TransferMatrix, np.ndarray]) -> float:
    """2-norm condition number via the full singular value decomposition."""
    if isinstance(T, TransferMatrix):
        return T.cond2
    sv = np.linalg.svd(np.asarray(T, dtype=float), compute_uv=False)
    if sv[-1] == 0.0:
        return math.inf
    return float(sv[0] / sv[-1])


@dataclass
class DegenerationReport:
    normal_kept: int
    degenerated: int
    internal: int
    per_edge_degenerated: List[int]
    details: List[Tuple[str, str]]  # (function label, classification)


def classify_degenerate(
    tb: TunedBasis,
    basis: CanonicalBasis,
    boundary_samples: int = 50,
    rule_degree: int = 2,
) -> DegenerationReport:
    """Classify tuned functions: one of normal origin whose boundary normal
    trace stays below 100 tau_bc while its interior magnitude exceeds
    10 tau_bc has degenerated into an internal function."""
    tau = basis.tau_bc
    polygon = basis.polygon
    rule = triangle_rule(rule_degree)
    per_edge = [0] * polygon.n_edges
    kept = deg = internal = 0
    details: List[Tuple[str, str]] = []
    for fn, origin in zip(tb.functions, tb.origins):
        if origin.group == "internal":
            internal += 1
            details.append((origin.label, "internal"))
            continue
        bmax = 0.0
        for e in polygon.edges:
            s = np.linspace(0.0, e.length, boundary_samples)
            bmax = max(bmax, float(np.max(np.abs(fn.normal_trace_on(e, s)))))
        qx, qy = fn.values_at_rule(rule)
        imax = float(np.max(np.hypot(qx, qy)))
        if bmax < 100.0 * tau and imax > 10.0 * tau:
            deg += 1
            if origin.edge >= 0:
                per_edge[origin.edge] += 1
            details.append((origin.label, "degenerated"))
        else:
            kept += 1
            details.append((origin.label, "normal"))
    return DegenerationReport(
        normal_kept=kept,
        degenerated=deg,
        internal=internal,
        per_edge_degenerated=per_edge,
        details=details,
    )


def zero_rows(T: TransferMatrix, rel_tol: float = 1e-10) -> List[int]:
    """Indices of rows that vanish relative to the largest matrix entry."""
    scale = np.max(np.abs(T.matrix))
    if scale == 0.0:
        return list(range(T.matrix.shape[0]))
    return [i for i in range(T.matrix.shape[0]) if np.max(np.abs(T.matrix[i])) < rel_tol * scale]


def edge_block_singular_ratios(T: TransferMatrix) -> List[float]:
    """Per-edge block smallest/largest singular value ratios."""
    out = []
    for i in range(len(T.edge_rows)):
        block = T.edge_block(i)
        sv = np.linalg.svd(block, compute_uv=False)
        out.append(float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0)
    return out


def boundary_characterization_matrix(
    point_of: Callable,
    normal: Sequence[float],
    l2: int,
    t_mid: float = 0.5,
    npoints: Optional[int] = None,
) -> np.ndarray:
    """Single-edge unisolvence matrix of the point-value configuration with
    canonical monomial decomposition and canonical kernels.

    The edge is parametrized by t in [0, 1] through ``point_of``; boundary
    restrictions are decomposed as (a1, a2) + (x, y) sum_r b_r x^r.  Rows:
    the two first-order component moments, the midpoint normal value, then
    the q . n moments against x^r for r = 1..l2.
    """
    nx, ny = float(normal[0]), float(normal[1])
    npts = npoints or (2 * l2 + 6)
    from .polyfam import gauss_legendre_nodes

    z, w = gauss_legendre_nodes(npts)
    t = (z + 1.0) / 2.0
    w = w / 2.0
    xt, yt = point_of(t)
    xm, ym = point_of(np.array([t_mid]))
    xm, ym = float(xm[0]), float(ym[0])
    c_mid = xm * nx + ym * ny
    dim = l2 + 3
    M = np.zeros((dim, dim))

    def col_components(col):
        """(q_x(t), q_y(t)) of the col-th decomposition function."""
        if col == 0:
            return np.ones_like(t), np.zeros_like(t)
        if col == 1:
            return np.zeros_like(t), np.ones_like(t)
        r = col - 2
        return xt ** (r + 1), yt * xt ** r

    for col in range(dim):
        qx, qy = col_components(col)
        M[0, col] = np.dot(w, qx * nx * xt)
        M[1, col] = np.dot(w, qy * ny * yt)
        if col == 0:
            M[2, col] = nx
        elif col == 1:
            M[2, col] = ny
        else:
            M[2, col] = c_mid * xm ** (col - 2)
        qn = qx * nx + qy * ny
        for r in range(1, l2 + 1):
            M[2 + r, col] = np.dot(w, qn * xt ** r)
    return M
