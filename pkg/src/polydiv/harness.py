"""Command-line orchestration: shape validation, basis and element builds,
conditioning sweeps, and the comparison of the reduced elements with the
classical Raviart-Thomas ones.

Outputs are CSV files (comma separated, header row, '.' decimal), JSON
summaries, and optional hand-emitted SVG charts.  Runs are deterministic:
rows are sorted, never emitted in execution order.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .catalog import resolve_shape
from .elements import (
    CONFIG_NAMES,
    ElementConfig,
    SingularTransfer,
    assemble_transfer,
    classify_degenerate,
    dof_set,
    tune_basis,
    zero_rows,
)
from .geometry import Polygon, ShapeViolation, validate_shape
from .hdiv_basis import (
    CanonicalBasis,
    HdivSpaceKind,
    SpaceTag,
    canonical_basis,
    export_interior,
    export_traces,
)
from .poisson import triangulate
from .polyfam import (
    INNER_CONSTRUCTOR_KINDS,
    BoundaryConstructorKind,
    BoundaryProjectorKind,
    InnerPolyKind,
)
from .rt_classical import rt_basis, rt_dofs

__all__ = ["main", "StudyConfig", "StudyRow", "cmd_validate", "cmd_basis", "cmd_element", "cmd_condstudy", "cmd_rtcompare"]

_SPACE_TAGS = {t.value: t for t in SpaceTag}


def _space_kind(space: str, k: int, bcons: int, icons: int) -> HdivSpaceKind:
    return HdivSpaceKind(
        tag=_SPACE_TAGS[space],
        k=k,
        boundary_constructor=BoundaryConstructorKind(bcons),
        inner_constructor=INNER_CONSTRUCTOR_KINDS[icons],
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def _truncate(x: float) -> str:
    return "SINGULAR" if not math.isfinite(x) else str(int(x))


@dataclass
class StudyConfig:
    """Parameter grid of a conditioning study."""

    shapes: List[str]
    orders: List[int]
    configs: List[str]
    space: str = "classical"
    bproj: List[int] = field(default_factory=lambda: [3])
    iproj: List[int] = field(default_factory=lambda: [3])
    bcons: List[int] = field(default_factory=lambda: [1])
    icons: List[int] = field(default_factory=lambda: [2])
    h_divisor: int = 64
    expect_fail: List[str] = field(default_factory=list)

    @classmethod
    def from_json(cls, path) -> "StudyConfig":
        data = json.loads(Path(path).read_text())
        return cls(**data)


@dataclass
class StudyRow:
    shape: str
    k: int
    config: str
    bproj: int
    iproj: int
    bcons: int
    icons: int
    cond2: float
    degenerated: int
    wall_time: float


def cmd_validate(shape: str, config: Optional[str] = None, v=(1.0, 1.0), out=None) -> int:
    """Run the shape admissibility rules; exit code 0 when admissible."""
    out = out if out is not None else sys.stdout
    polygon = resolve_shape(shape)
    diag = validate_shape(polygon, config, v)
    for rec in diag.violations:
        print(f"VIOLATION edge={rec.edge} rule={rec.rule} value={rec.value!r}", file=out)
    for rec in diag.warnings:
        print(f"warning   edge={rec.edge} rule={rec.rule} value={rec.value!r}", file=out)
    print(("FAIL" if diag.violations else "PASS") + f" {shape}", file=out)
    return 1 if diag.violations else 0


def _build_basis(polygon: Polygon, space: str, k: int, bcons: int, icons: int, h: Optional[float], allow_invalid=False) -> CanonicalBasis:
    spec = _space_kind(space, k, bcons, icons)
    return canonical_basis(polygon, spec, h=h, allow_invalid=allow_invalid)


def cmd_basis(shape: str, space: str, k: int, outdir, bcons: int = 1, icons: int = 2, h: Optional[float] = None) -> dict:
    """Build the canonical basis and export trace/interior samples."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    polygon = resolve_shape(shape)
    basis = _build_basis(polygon, space, k, bcons, icons, h)
    export_traces(basis.functions, polygon, outdir / "traces.csv")
    export_interior(basis.functions, basis.mesh, outdir / "interior.csv")
    summary = {
        "shape": shape,
        "space": space,
        "k": k,
        "size": basis.size,
        "tau_bc": basis.tau_bc,
        "mesh_triangles": basis.mesh.n_triangles,
    }
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


def _write_lambda_csv(T, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([""] + T.col_labels)
        for label, row in zip(T.row_labels, T.matrix):
            w.writerow([label] + [_fmt(x) for x in row])


def cmd_element(
    shape: str,
    space: str,
    config: str,
    k: int,
    outdir,
    bproj: int = 3,
    iproj: int = 3,
    bcons: int = 1,
    icons: int = 2,
    h: Optional[float] = None,
    v=(1.0, 1.0),
) -> dict:
    """Assemble one element end to end and write lambda.csv, traces.csv,
    interior.csv and summary.json."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    polygon = resolve_shape(shape)
    basis = _build_basis(polygon, space, k, bcons, icons, h)
    spec = basis.spec
    cfg = ElementConfig(
        config,
        spec,
        v=tuple(v),
        boundary_projector=BoundaryProjectorKind(bproj),
        inner_projector=InnerPolyKind(iproj),
    )
    dofs = dof_set(polygon, cfg)
    T = assemble_transfer(dofs, basis)
    _write_lambda_csv(T, outdir / "lambda.csv")
    summary: dict = {
        "shape": shape,
        "space": space,
        "config": config,
        "k": k,
        "cond2": T.cond2,
        "cond2_truncated": _truncate(T.cond2),
        "zero_rows": zero_rows(T),
        "counts": {"dofs": len(dofs), "functions": basis.size},
        "tau_bc": basis.tau_bc,
    }
    # off-support normal trace per edge (support restriction diagnostic)
    off_support = []
    for e in polygon.edges:
        worst = 0.0
        for group_idx, group in enumerate(basis.normal_groups):
            if group_idx == e.index:
                continue
            s = np.linspace(0.0, e.length, 25)
            for fn in group:
                worst = max(worst, float(np.max(np.abs(fn.normal_trace_on(e, s)))))
        off_support.append(worst)
    summary["off_support_max"] = off_support
    try:
        tuned = tune_basis(T, basis)
        report = classify_degenerate(tuned, basis)
        summary["duality_residual"] = tuned.duality_residual()
        summary["degenerated"] = report.degenerated
        summary["degenerated_per_edge"] = report.per_edge_degenerated
        export_traces(tuned.functions, polygon, outdir / "traces.csv")
        export_interior(tuned.functions, basis.mesh, outdir / "interior.csv")
    except SingularTransfer as exc:
        summary["singular"] = str(exc)
        export_traces(basis.functions, polygon, outdir / "traces.csv")
        export_interior(basis.functions, basis.mesh, outdir / "interior.csv")
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


def run_condstudy(study: StudyConfig) -> List[StudyRow]:
    rows: List[StudyRow] = []
    for shape_name in study.shapes:
        polygon = resolve_shape(shape_name)
        h = polygon.diameter / study.h_divisor
        mesh = triangulate(polygon, h)
        for k in study.orders:
            for bcons, icons in itertools.product(study.bcons, study.icons):
                spec = _space_kind(study.space, k, bcons, icons)
                try:
                    basis = canonical_basis(polygon, spec, mesh=mesh, allow_invalid=shape_name in study.expect_fail)
                except ShapeViolation:
                    continue
                for config, bproj, iproj in itertools.product(study.configs, study.bproj, study.iproj):
                    t0 = time.perf_counter()
                    cfg = ElementConfig(
                        config,
                        spec,
                        boundary_projector=BoundaryProjectorKind(bproj),
                        inner_projector=InnerPolyKind(iproj),
                    )
                    try:
                        dofs = dof_set(polygon, cfg)
                        T = assemble_transfer(dofs, basis)
                        cond = T.cond2
                        try:
                            report = classify_degenerate(tune_basis(T, basis), basis)
                            degen = report.degenerated
                        except SingularTransfer:
                            degen = -1
                    except ShapeViolation:
                        cond = math.inf
                        degen = -1
                    rows.append(
                        StudyRow(
                            shape=shape_name,
                            k=k,
                            config=config,
                            bproj=bproj,
                            iproj=iproj,
                            bcons=bcons,
                            icons=icons,
                            cond2=cond,
                            degenerated=degen,
                            wall_time=time.perf_counter() - t0,
                        )
                    )
    rows.sort(key=lambda r: (r.cond2 if math.isfinite(r.cond2) else math.inf, r.shape, r.k, r.config, r.bproj, r.iproj, r.bcons, r.icons))
    return rows


def write_study_csv(rows: Sequence[StudyRow], path, timings_path=None) -> None:
    """Write the deterministic study table; wall times go to a side file so
    study.csv stays byte-identical across reruns."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["shape", "k", "config", "bproj", "iproj", "bcons", "icons", "cond2", "cond2_truncated", "degenerated"]
        )
        for r in rows:
            w.writerow(
                [
                    r.shape,
                    r.k,
                    r.config,
                    r.bproj,
                    r.iproj,
                    r.bcons,
                    r.icons,
                    "SINGULAR" if not math.isfinite(r.cond2) else _fmt(r.cond2),
                    _truncate(r.cond2),
                    r.degenerated,
                ]
            )
    if timings_path is not None:
        with open(timings_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["shape", "k", "config", "bproj", "iproj", "bcons", "icons", "wall_time_s"])
            for r in rows:
                w.writerow([r.shape, r.k, r.config, r.bproj, r.iproj, r.bcons, r.icons, f"{r.wall_time:.4f}"])


_BAND_COLORS = ["#4363d8", "#e6194B", "#3cb44b", "#ffe119", "#f032e6", "#42d4f4", "#9A6324"]


def write_study_svg(rows: Sequence[StudyRow], path) -> None:
    """Minimal line chart of sorted conditionings with parameter bands."""
    finite = [r for r in rows if math.isfinite(r.cond2)]
    if not finite:
        Path(path).write_text("<svg xmlns='http://www.w3.org/2000/svg'/>")
        return
    width, height, band_h = 900, 420, 18
    n = len(finite)
    logs = [math.log10(max(r.cond2, 1.0)) for r in finite]
    lo, hi = min(logs), max(logs)
    span = max(hi - lo, 1e-9)
    xs = [40 + 820 * i / max(n - 1, 1) for i in range(n)]
    ys = [300 - 260 * (v - lo) / span for v in logs]
    pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(xs, ys))
    params = [
        ("iproj", [r.iproj for r in finite]),
        ("bproj", [r.bproj for r in finite]),
        ("bcons", [r.bcons for r in finite]),
        ("icons", [r.icons for r in finite]),
    ]
    bands = []
    for row_idx, (_, vals) in enumerate(params):
        y0 = 310 + row_idx * (band_h + 4)
        for i, val in enumerate(vals):
            color = _BAND_COLORS[(int(val) - 1) % len(_BAND_COLORS)]
            x0 = 40 + 820 * i / n
            bands.append(
                f"<rect x='{x0:.1f}' y='{y0}' width='{820 / n:.2f}' height='{band_h}' fill='{color}'/>"
            )
    svg = (
        f"<svg xmlns='http://www.w3.org/2000/svg' width='{width}' height='{height}'>"
        "<rect width='100%' height='100%' fill='white'/>"
        f"<polyline fill='none' stroke='#4363d8' stroke-width='1.5' points='{pts}'/>"
        f"<text x='40' y='20' font-size='12'>log10 cond2, ascending ({n} cases)</text>"
        + "".join(bands)
        + "</svg>"
    )
    Path(path).write_text(svg)


def cmd_condstudy(study: StudyConfig, outdir, svg: bool = False) -> List[StudyRow]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = run_condstudy(study)
    write_study_csv(rows, outdir / "study.csv", outdir / "timings.csv")
    if svg:
        write_study_svg(rows, outdir / "study.svg")
    return rows


def cmd_rtcompare(shape: str, k: int, outdir) -> dict:
    """Compare the reduced IIb element against the classical RT element on
    the matching reference shape (trace counts, scaling, vanishing)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if shape not in ("triangle", "quad"):
        raise ValueError("rtcompare shapes: triangle, quad")
    catalog_key = "fig151" if shape == "triangle" else "fig152"
    polygon = resolve_shape(catalog_key)
    spec = HdivSpaceKind(SpaceTag.REDUCED_LAGRANGE_BC, k)
    basis = canonical_basis(polygon, spec)
    cfg = ElementConfig("IIb", spec)
    T = assemble_transfer(dof_set(polygon, cfg), basis)
    tuned = tune_basis(T, basis)

    rt = rt_basis(shape, k, "local")
    rt_T_dofs = rt_dofs(shape, k)
    rt_T = assemble_transfer(rt_T_dofs, rt.functions)
    rt_tuned = tune_basis(rt_T, rt.functions)

    report: dict = {
        "shape": shape,
        "k": k,
        "reduced": {
            "per_edge_functions": spec.k + 1,
            "cond2": T.cond2,
            "duality_residual": tuned.duality_residual(),
        },
        "rt": {
            "per_edge_functions": k + 1,
            "cond2": rt_T.cond2,
            "duality_residual": rt_tuned.duality_residual(),
        },
    }
    # scaling of the midpoint trace for the lowest order
    if k == 0:
        mid_scaled = []
        n_edge = polygon.n_edges
        for j in range(n_edge):
            fn = tuned.functions[j]
            e = polygon.edges[j]
            mid_scaled.append(float(fn.normal_trace_on(e, np.array([e.length / 2.0]))[0]))
        report["reduced"]["midpoint_traces"] = mid_scaled
    # internal functions have vanishing traces on both sides
    internal_max = 0.0
    for fn, origin in zip(tuned.functions, tuned.origins):
        if origin.group != "internal":
            continue
        for e in polygon.edges:
            s = np.linspace(0.0, e.length, 20)
            internal_max = max(internal_max, float(np.max(np.abs(fn.normal_trace_on(e, s)))))
    report["reduced"]["internal_trace_max"] = internal_max
    (Path(outdir) / "rtcompare.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return report


def _add_common(sp):
    sp.add_argument("--shape", required=True, help="catalog key (e.g. fig165) or JSON shape file")
    sp.add_argument("--k", type=int, default=0)
    sp.add_argument("--space", default="classical", choices=sorted(_SPACE_TAGS))
    sp.add_argument("--bproj", type=int, default=3, help="boundary projector code 1-7")
    sp.add_argument("--iproj", type=int, default=3, help="inner projector code 1-7")
    sp.add_argument("--bcons", type=int, default=1, help="boundary constructor code 1-3")
    sp.add_argument("--icons", type=int, default=2, help="inner constructor code 1-5")
    sp.add_argument("--h", type=float, default=None, help="target mesh size")
    sp.add_argument("--out", default="out", help="output directory")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="polydiv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="run the shape admissibility rules")
    sp.add_argument("--shape", required=True)
    sp.add_argument("--config", default=None, choices=CONFIG_NAMES)
    sp.add_argument("--v", type=float, nargs=2, default=(1.0, 1.0))

    sp = sub.add_parser("basis", help="build and export a canonical basis")
    _add_common(sp)

    sp = sub.add_parser("element", help="assemble one element end to end")
    _add_common(sp)
    sp.add_argument("--config", required=True, choices=CONFIG_NAMES)
    sp.add_argument("--v", type=float, nargs=2, default=(1.0, 1.0))

    sp = sub.add_parser("condstudy", help="conditioning sweep over a parameter grid")
    sp.add_argument("--config-file", default=None, help="JSON file mirroring StudyConfig")
    sp.add_argument("--shapes", nargs="*", default=["fig165"])
    sp.add_argument("--orders", type=int, nargs="*", default=[1])
    sp.add_argument("--configs", nargs="*", default=["Ib"])
    sp.add_argument("--space", default="classical", choices=sorted(_SPACE_TAGS))
    sp.add_argument("--bproj", type=int, nargs="*", default=[1, 2, 3, 4, 5, 6, 7])
    sp.add_argument("--iproj", type=int, nargs="*", default=[1, 2, 3, 4, 5, 6, 7])
    sp.add_argument("--bcons", type=int, nargs="*", default=[1])
    sp.add_argument("--icons", type=int, nargs="*", default=[2])
    sp.add_argument("--h-divisor", type=int, default=64)
    sp.add_argument("--svg", action="store_true")
    sp.add_argument("--out", default="out")

    sp = sub.add_parser("rtcompare", help="compare reduced IIb with classical RT")
    sp.add_argument("--shape", required=True, choices=["triangle", "quad"])
    sp.add_argument("--k", type=int, default=0)
    sp.add_argument("--out", default="out")

    args = parser.parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args.shape, args.config, tuple(args.v))
    if args.command == "basis":
        cmd_basis(args.shape, args.space, args.k, args.out, args.bcons, args.icons, args.h)
        return 0
    if args.command == "element":
        summary = cmd_element(
            args.shape,
            args.space,
            args.config,
            args.k,
            args.out,
            args.bproj,
            args.iproj,
            args.bcons,
            args.icons,
            args.h,
            tuple(args.v),
        )
        print(json.dumps(summary, indent=2, sort_keys=True))
        return 0
    if args.command == "condstudy":
        if args.config_file:
            study = StudyConfig.from_json(args.config_file)
        else:
            study = StudyConfig(
                shapes=args.shapes,
                orders=args.orders,
                configs=args.configs,
                space=args.space,
                bproj=args.bproj,
                iproj=args.iproj,
                bcons=args.bcons,
                icons=args.icons,
                h_divisor=args.h_divisor,
            )
        rows = cmd_condstudy(study, args.out, svg=args.svg)
        print(f"{len(rows)} rows -> {Path(args.out) / 'study.csv'}")
        return 0
    if args.command == "rtcompare":
        report = cmd_rtcompare(args.shape, args.k, args.out)
        print(json.dumps(report, indent=2, sort_keys=True))
        return 0
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
