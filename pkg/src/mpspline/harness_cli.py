"""Configuration-driven experiment runner and the ``mps`` command line.

Five experiments are available (``[experiment] kind``):

``interpolation``
    Local splines under each plan mode against the equivalent global spline.
``advection``
    Backward semi-Lagrangian rotation on the patch layout, with global twin
    runs and field snapshots.
``stability``
    Spectral radius scan of the C0-coupled and C1-coupled periodic operators.
``coefficients``
    Decay of the interface coupling coefficients on uniform grids.
``convergence``
    Interpolation errors over a ladder of grid refinements.

Every run writes CSV files (one header line, numbers as ``%.16e``), a
``config.cfg`` echo of the effective configuration and ``report.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .config import ExperimentConfig, PatchSpec, merge, parse_text, preset_names, preset_text
from .errors import ConfigError, LayoutError, NumericalError, OutOfDomainError
from .interface_calculus import coefficient_table
from .linalg import SingularSystemError
from .mappings import Mapping
from .multipatch_core import (
    Conformity,
    Direction,
    LocalSplineBuilder,
    MultipatchDomain,
    PatchGrid,
    equivalent_global_spline,
    locate_logical,
)
from .semi_lagrangian import AdvectionField, BslConfig, BslSolver, rotated_exact, two_bump_initial
from .stability_analysis import max_radius, scan_c0, scan_c1

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
MERGE_TOL = 1e-12
SATURATION_RATIO = 0.5
# radii within this of 1 count as 1 (eigenvalue roundoff)
RADIUS_ROUNDOFF = 1e-12


@dataclass
class RunReport:
    """Metrics, timings and the effective configuration of one run."""

    experiment: str
    name: str
    metrics: Dict[str, object] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    config_echo: str = ""
    files: List[str] = field(default_factory=list)
    tables: Dict[str, List[dict]] = field(default_factory=dict)

    def check_finite(self):
        for k, v in self.metrics.items():
            if isinstance(v, float) and not math.isfinite(v):
                raise NumericalError(f"metric {k} is not finite ({v})")

    def to_json(self) -> str:
        body = {
            "experiment": self.experiment,
            "name": self.name,
            "metrics": self.metrics,
            "timings": self.timings,
            "files": self.files,
            "config": self.config_echo,
        }
        return json.dumps(body, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.16e" % float(v)
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_matrix(path: Path, a: np.ndarray) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"theta_{j}" for j in range(a.shape[1])])
        for row in a:
            w.writerow([_fmt(float(v)) for v in row])
    return path


def make_mapping(cfg: ExperimentConfig) -> Mapping:
    m = cfg.mapping
    if m.kind == "czarny":
        return Mapping.czarny(m.epsilon, m.elongation)
    return Mapping.circular() if m.kind == "circular" else Mapping.identity()


def make_domain(cfg: ExperimentConfig, patches: Sequence[PatchSpec] = None, refine: float = 1.0) -> MultipatchDomain:
    specs = cfg.patches if patches is None else patches
    grids = [PatchGrid(p.name, *p.points(refine)) for p in specs]
    return MultipatchDomain.from_patches(grids, bc_r=cfg.bc_r, bc_theta=cfg.bc_theta)


def _merged(arrays):
    a = np.sort(np.concatenate(arrays))
    keep = [a[0]]
    for v in a[1:]:
        if v - keep[-1] > MERGE_TOL * max(1.0, abs(v)):
            keep.append(v)
    return np.array(keep)


def global_twin(cfg: ExperimentConfig, domain: MultipatchDomain) -> MultipatchDomain:
    """Single-patch domain on the merged break points of a conforming layout."""
    br = _merged([p.breaks_r.points for p in domain.patches])
    bt = _merged([p.breaks_theta.points for p in domain.patches])
    return MultipatchDomain.from_patches([PatchGrid("global", br, bt)], bc_r=cfg.bc_r, bc_theta=cfg.bc_theta)


def analytic_field(mapping: Mapping):
    """``cos(2 pi x) sin(2 pi y)`` on the physical image, with its logical gradient."""

    def f(r, th):
        x, y = mapping.forward(r, th)
        return np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y)

    def grad(r, th):
        x, y = mapping.forward(r, th)
        fx = -2 * np.pi * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
        fy = 2 * np.pi * np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y)
        j = mapping.jacobian(r, th)
        return fx * j[..., 0, 0] + fy * j[..., 1, 0], fx * j[..., 0, 1] + fy * j[..., 1, 1]

    return f, grad


def union_values(domain, f):
    V = np.full((domain.n_r, domain.n_t), np.nan)
    ir, it, r, th = domain.node_coords()
    V[ir, it] = f(r, th)
    return V


def eval_local(domain, splines, r, th, dr=0, dth=0):
    pid, rr, tt = locate_logical(domain, r, th)
    out = np.empty(rr.shape)
    for k, spl in enumerate(splines):
        m = pid == k
        if np.any(m):
            out[m] = spl(rr[m], tt[m], dr, dth)
    return out


def dense_grid(domain, n_r, n_t):
    r = np.linspace(*domain.r_range, n_r)
    t0, t1 = domain.theta_range
    th = np.linspace(t0, t1, n_t, endpoint=not domain.union[1].periodic)
    R, T = np.meshgrid(r, th, indexing="ij")
    return R.ravel(), T.ravel()


def interface_nodes(domain):
    """Union indices of the interface nodes, per split direction."""
    ur, ut = domain.union
    out = {Direction.R: [], Direction.THETA: []}
    for itf in domain.interfaces:
        ax, other = (ur, ut) if itf.direction is Direction.R else (ut, ur)
        i = int(ax.index(itf.position)[0])
        lo, hi = itf.span
        c = other.coords
        if other.periodic and hi <= lo:
            sel = np.flatnonzero((c >= lo - other.tol) | (c <= hi + other.tol))
        else:
            sel = np.flatnonzero((c >= lo - other.tol) & (c <= hi + other.tol))
        for j in sel:
            out[itf.direction].append((i, j) if itf.direction is Direction.R else (j, i))
    return {d: (np.array([p[0] for p in v], int), np.array([p[1] for p in v], int)) for d, v in out.items()}


def derivative_errors(domain, DR, DT, ref_r, ref_t):
    """Max difference of reconstructed interface derivatives against references.

    ``ref_r(r, theta)`` and ``ref_t`` give the reference first derivatives.
    Nodes where a derivative was not reconstructed are skipped.
    """
    nodes = interface_nodes(domain)
    err = 0.0
    cr, ct = domain.union[0].coords, domain.union[1].coords
    for d, arr, ref in ((Direction.R, DR, ref_r), (Direction.THETA, DT, ref_t)):
        ir, it = nodes[d]
        if ir.size == 0:
            continue
        val = arr[ir, it]
        ok = np.isfinite(val)
        if np.any(ok):
            err = max(err, float(np.max(np.abs(val[ok] - ref(cr[ir[ok]], ct[it[ok]])))))
    return err


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def run_interpolation_test(cfg: ExperimentConfig, out: Optional[Path] = None) -> RunReport:
    """Local splines per plan mode against the equivalent global spline."""
    rep = RunReport("interpolation", cfg.name, config_echo=cfg.echo())
    t0 = time.perf_counter()
    mapping = make_mapping(cfg)
    dom = make_domain(cfg)
    if dom.conformity is not Conformity.CONFORMING:
        raise ConfigError("the interpolation test needs a conforming layout")
    f, _ = analytic_field(mapping)
    V = union_values(dom, f)
    g = equivalent_global_spline(dom, V)
    r, th = dense_grid(dom, *cfg.eval_grid)
    gv = g(r, th)
    rows = []
    for mode in cfg.modes:
        tm = time.perf_counter()
        builder = LocalSplineBuilder(dom, mode, cfg.cross)
        DR, DT, DRT = builder.plan.execute(V)
        splines = builder.build_from(V, DR, DT, DRT)
        ef = float(np.max(np.abs(eval_local(dom, splines, r, th) - gv)))
        ed = derivative_errors(dom, DR, DT, lambda a, b: g(a, b, 1, 0), lambda a, b: g(a, b, 0, 1))
        rows.append({"mode": str(mode), "err_funct": ef, "err_deriv": ed})
        rep.metrics[f"err_funct[{mode}]"] = ef
        rep.metrics[f"err_deriv[{mode}]"] = ed
        rep.timings[str(mode)] = time.perf_counter() - tm
    rep.tables["interpolation"] = rows
    rep.timings["total"] = time.perf_counter() - t0
    if out is not None:
        rep.files.append(str(write_csv(out / "interpolation.csv", ["mode", "err_funct", "err_deriv"],
                                       [(x["mode"], x["err_funct"], x["err_deriv"]) for x in rows])))
    return rep


def _advection_setup(cfg):
    a = cfg.advection
    mapping = make_mapping(cfg)
    adv = AdvectionField.mesh_rotation(a.omega)
    x0, y0 = mapping.forward(a.center_r, a.center_theta)
    rho0 = two_bump_initial(float(x0), float(y0), a.radius)
    return mapping, adv, rho0


def run_advection_test(cfg: ExperimentConfig, out: Optional[Path] = None, callback=None) -> RunReport:
    """BSL rotation of two crossed bumps on the patch layout and its twins.

    Per step the nodewise error of every run against the exact rotated
    solution is recorded.  Twins come from ``[twin.NAME]`` sections; a
    conforming layout without twins gets the equivalent global grid as twin
    ``global``.  For twins on the same union grid as the layout, the
    nodewise difference to the layout run is recorded as well.
    """
    rep = RunReport("advection", cfg.name, config_echo=cfg.echo())
    t0 = time.perf_counter()
    a = cfg.advection
    mapping, adv, rho0 = _advection_setup(cfg)
    bcfg = BslConfig(a.dt, a.t_final, a.tracer, cfg.modes[0], False, a.boundary_tol)
    dom = make_domain(cfg)
    runs = [("local", dom)]
    for tw in cfg.twins:
        runs.append((tw.name, make_domain(cfg, [tw])))
    if not cfg.twins and dom.conformity is Conformity.CONFORMING:
        runs.append(("global", global_twin(cfg, dom)))
    names = [n for n, _ in runs]
    if len(set(names)) != len(names):
        raise ConfigError("twin names must differ from each other and from 'local'")

    n_steps = bcfg.n_steps
    errs = {n: np.zeros(n_steps + 1) for n in names}
    finals = {}
    solvers = {}
    snaps = a.snapshot_every
    for name, d in runs:
        tr = time.perf_counter()
        s = BslSolver(d, mapping, adv, bcfg)
        solvers[name] = s
        V = s.initial(rho0)
        errs[name][0] = s.error_vs(V, rotated_exact(mapping, rho0, adv, 0.0))
        history = {}

        def cb(step, t, V, s=s, name=name, history=history):
            errs[name][step] = s.error_vs(V, rotated_exact(mapping, rho0, adv, t))
            if name == "local" and out is not None and snaps and step % snaps == 0:
                history[step] = V.copy()
            if callback is not None:
                callback(name, step, t, V)

        if name == "local" and out is not None:
            history[0] = V.copy()
        V = s.run(V, n_steps, cb)
        finals[name] = V
        if name == "local" and out is not None:
            history[n_steps] = V
            rep.files.extend(_write_snapshots(out / "snapshots", d, history))
        rep.timings[name] = time.perf_counter() - tr

    header = ["step", "time"] + [f"err_{n}" for n in names]
    cols = [errs[n] for n in names]
    diffs = {}
    ul = dom.union
    for name, d in runs[1:]:
        if d.n_r == dom.n_r and d.n_t == dom.n_t and np.allclose(d.union[0].coords, ul[0].coords) \
                and np.allclose(d.union[1].coords, ul[1].coords):
            diffs[name] = float(np.nanmax(np.abs(finals["local"] - finals[name])))
    times = np.arange(n_steps + 1) * a.dt
    rep.metrics["n_steps"] = n_steps
    for n in names:
        rep.metrics[f"final_err[{n}]"] = float(errs[n][-1])
    for n, v in diffs.items():
        rep.metrics[f"final_diff[{n}]"] = v
    if len(names) >= 3:
        tw = np.array([errs[n][1:] for n in names[1:]])
        lo, hi = tw.min(axis=0), tw.max(axis=0)
        loc = errs["local"][1:]
        rep.metrics["band_violations"] = int(np.count_nonzero((loc < 0.9 * lo) | (loc > 1.1 * hi)))
        rep.metrics["band_violations_strict"] = int(np.count_nonzero((loc < lo) | (loc > hi)))
    rep.tables["errors"] = [dict(zip(header, row)) for row in zip(range(n_steps + 1), times, *cols)]
    rep.timings["total"] = time.perf_counter() - t0
    if out is not None:
        rep.files.append(str(write_csv(out / "errors.csv", header, zip(range(n_steps + 1), times, *cols))))
    return rep


def _write_snapshots(folder: Path, domain, history) -> List[str]:
    files = []
    for pi in domain.info:
        pid = str(pi.grid.id)
        rr, tt = domain.patch_points(pi.k)
        rows = [("r", i, v) for i, v in enumerate(rr)] + [("theta", j, v) for j, v in enumerate(tt)]
        files.append(str(write_csv(folder / f"grid_{pid}.csv", ["axis", "index", "coordinate"], rows)))
        for step in sorted(history):
            V = history[step]
            files.append(str(write_matrix(folder / f"step_{step:06d}_{pid}.csv", V[np.ix_(pi.idx[0], pi.idx[1])])))
    return files


def run_coefficient_table(cfg_or_ns=None, out: Optional[Path] = None, dx: float = 1.0) -> RunReport:
    """Coupling coefficient decay per N; CSV at full precision, stdout at 3 figures."""
    if isinstance(cfg_or_ns, ExperimentConfig):
        ns, dx, echo, name = cfg_or_ns.coefficient_ns, cfg_or_ns.coefficient_dx, cfg_or_ns.echo(), cfg_or_ns.name
    else:
        ns = tuple(cfg_or_ns) if cfg_or_ns is not None else (5, 10, 15, 20, 25, 30)
        echo, name = "", "coefficients"
    rep = RunReport("coefficients", name, config_echo=echo)
    t0 = time.perf_counter()
    rows = coefficient_table(ns, dx)
    keys = ["N", "pow", "a_ratio", "b_ratio", "omega_ratio"]
    rep.tables["coefficients"] = rows
    for row in rows:
        for k in keys[1:]:
            rep.metrics[f"{k}[{row['N']}]"] = row[k]
    rep.timings["total"] = time.perf_counter() - t0
    if out is not None:
        rep.files.append(str(write_csv(out / "coefficients.csv", keys, ([row[k] for k in keys] for row in rows))))
    return rep


def three_figures(v: float) -> str:
    return f"{v:.2e}"


def run_convergence_study(cfg: ExperimentConfig, out: Optional[Path] = None, refinements=None) -> RunReport:
    """Interpolation errors over refinement levels.

    Each level multiplies the cell count of every patch in both directions.
    Errors per mode and level:

    ``err_total``
        local splines against the analytic function at random points,
    ``err_local``
        local splines against the equivalent global spline there,
    ``err_deriv``
        reconstructed interface derivatives against the global spline.

    The global spline's own errors (``err_global``, ``err_deriv_global``,
    against the analytic function and its derivatives) are reported per
    level.  Since ``err_total <= err_global + err_local`` and the truncation
    part stops decreasing at order 4, the saturation level of a mode is the
    first level where ``err_local`` reaches ``SATURATION_RATIO`` times
    ``err_global``.  ``saturation_deriv`` is the first level where the
    interface derivative error exceeds that of the global spline.
    """
    refinements = tuple(cfg.refinements if refinements is None else refinements)
    rep = RunReport("convergence", cfg.name, config_echo=cfg.echo())
    t0 = time.perf_counter()
    for f in refinements:
        cells = sum((p.r[2] * f) * (p.theta[2] * f) for p in cfg.patches)
        if cells > cfg.max_cells:
            raise ConfigError(
                f"refinement {f} needs {int(cells)} cells, above the memory guard of {cfg.max_cells}"
            )
    mapping = make_mapping(cfg)
    fun, grad = analytic_field(mapping)
    rng = np.random.default_rng(cfg.seed)
    rows, glob_rows = [], []
    for f in refinements:
        tl = time.perf_counter()
        dom = make_domain(cfg, refine=f)
        if dom.conformity is not Conformity.CONFORMING:
            raise ConfigError("the convergence study needs a conforming layout")
        (r0, r1), (t0_, t1_) = dom.r_range, dom.theta_range
        r = rng.uniform(r0, r1, cfg.eval_points)
        th = rng.uniform(t0_, t1_, cfg.eval_points)
        exact = fun(r, th)
        V = union_values(dom, fun)
        g = equivalent_global_spline(dom, V)
        gv = g(r, th)
        err_global = float(np.max(np.abs(gv - exact)))
        gr = lambda a, b: g(a, b, 1, 0)
        gt = lambda a, b: g(a, b, 0, 1)
        nodes = interface_nodes(dom)
        edg = 0.0
        cr, ct = dom.union[0].coords, dom.union[1].coords
        for d, k in ((Direction.R, 0), (Direction.THETA, 1)):
            ir, it = nodes[d]
            if ir.size:
                a, b = cr[ir], ct[it]
                ref = grad(a, b)[k]
                edg = max(edg, float(np.max(np.abs((gr if k == 0 else gt)(a, b) - ref))))
        glob_rows.append({"refinement": f, "err_global": err_global, "err_deriv_global": edg})
        for mode in cfg.modes:
            builder = LocalSplineBuilder(dom, mode, cfg.cross)
            DR, DT, DRT = builder.plan.execute(V)
            spl = builder.build_from(V, DR, DT, DRT)
            lv = eval_local(dom, spl, r, th)
            rows.append(
                {
                    "mode": str(mode),
                    "refinement": f,
                    "n_r": dom.n_r,
                    "n_theta": dom.n_t,
                    "err_total": float(np.max(np.abs(lv - exact))),
                    "err_local": float(np.max(np.abs(lv - gv))),
                    "err_deriv": derivative_errors(dom, DR, DT, gr, gt),
                }
            )
        rep.timings[f"refinement {f}"] = time.perf_counter() - tl

    # orders and saturation
    for mode in cfg.modes:
        mrows = [x for x in rows if x["mode"] == str(mode)]
        prev = None
        for x in mrows:
            x["order"] = float("nan") if prev is None else math.log(prev["err_total"] / x["err_total"]) / math.log(
                x["refinement"] / prev["refinement"]
            )
            prev = x
        lg = np.log([x["err_total"] for x in mrows])
        lf = np.log([x["refinement"] for x in mrows])
        fitted = float(-np.polyfit(lf, lg, 1)[0]) if len(mrows) > 1 else float("nan")
        sat = sat_d = None
        for x, gl in zip(mrows, glob_rows):
            if sat is None and x["err_local"] >= SATURATION_RATIO * gl["err_global"]:
                sat = x["refinement"]
            if sat_d is None and x["err_deriv"] > gl["err_deriv_global"]:
                sat_d = x["refinement"]
        rep.metrics[f"fitted_order[{mode}]"] = fitted
        rep.metrics[f"saturation[{mode}]"] = "none" if sat is None else sat
        rep.metrics[f"saturation_deriv[{mode}]"] = "none" if sat_d is None else sat_d
    gl = np.log([x["err_global"] for x in glob_rows])
    lf = np.log([x["refinement"] for x in glob_rows])
    rep.metrics["fitted_order[global]"] = float(-np.polyfit(lf, gl, 1)[0]) if len(glob_rows) > 1 else float("nan")
    rep.tables["convergence"] = rows
    rep.tables["global"] = glob_rows
    rep.timings["total"] = time.perf_counter() - t0
    if out is not None:
        keys = ["mode", "refinement", "n_r", "n_theta", "err_total", "err_local", "err_deriv", "order"]
        rep.files.append(str(write_csv(out / "convergence.csv", keys, ([x[k] for k in keys] for x in rows))))
        keys = ["refinement", "err_global", "err_deriv_global"]
        rep.files.append(str(write_csv(out / "global.csv", keys, ([x[k] for k in keys] for x in glob_rows))))
        keys = ["saturation", "saturation_deriv", "fitted_order"]
        rep.files.append(str(write_csv(out / "saturation.csv", ["mode"] + keys,
                                       ([str(m)] + [rep.metrics[f"{k}[{m}]"] for k in keys] for m in cfg.modes))))
    return rep


def run_stability_scan(cfg: ExperimentConfig, out: Optional[Path] = None) -> RunReport:
    """Spectral radii per shift and Fourier mode; C0 operator and optional C1 contrast.

    A radius counts as exceeding one when it is above ``1 + RADIUS_ROUNDOFF``.
    """
    st = cfg.stability
    rep = RunReport("stability", cfg.name, config_echo=cfg.echo())
    t0 = time.perf_counter()
    shifts = np.linspace(st.shifts[0], st.shifts[1], st.shifts[2])
    rows = []
    probe = scan_c0(st.n_patches, st.n_cells, [st.probe_shift])
    rows += [("c0_probe", x.shift, x.k, x.radius) for x in probe]
    c0 = scan_c0(st.n_patches, st.n_cells, shifts)
    rows += [("c0", x.shift, x.k, x.radius) for x in c0]
    rep.timings["c0"] = time.perf_counter() - t0
    pm, m0 = max_radius(probe), max_radius(c0)
    rep.metrics.update(
        {
            "probe_shift": st.probe_shift,
            "probe_radius": pm.radius,
            "probe_k": pm.k,
            "c0_max_radius": m0.radius,
            "c0_max_shift": m0.shift,
            "c0_max_k": m0.k,
            "c0_exceeds_one": bool(m0.radius > 1.0 + RADIUS_ROUNDOFF),
        }
    )
    if st.c1:
        tc = time.perf_counter()
        c1 = scan_c1(st.n_patches, st.n_cells, shifts)
        rows += [("c1", x.shift, x.k, x.radius) for x in c1]
        m1 = max_radius(c1)
        rep.metrics.update(
            {"c1_max_radius": m1.radius, "c1_max_shift": m1.shift, "c1_max_k": m1.k, "c1_exceeds_one": bool(m1.radius > 1.0 + RADIUS_ROUNDOFF)}
        )
        rep.timings["c1"] = time.perf_counter() - tc
    rep.tables["stability"] = [dict(zip(("operator", "shift", "k", "radius"), r)) for r in rows]
    rep.timings["total"] = time.perf_counter() - t0
    if out is not None:
        rep.files.append(str(write_csv(out / "stability.csv", ["operator", "shift", "k", "radius"], rows)))
    return rep


RUNNERS = {
    "interpolation": run_interpolation_test,
    "advection": run_advection_test,
    "coefficients": run_coefficient_table,
    "convergence": run_convergence_study,
    "stability": run_stability_scan,
}


def run_experiment(cfg: ExperimentConfig, out: Optional[Path] = None) -> RunReport:
    """Run the configured experiment; with ``out`` also write CSVs, echo and report."""
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
    rep = RUNNERS[cfg.experiment](cfg, out)
    rep.check_finite()
    if out is not None:
        (out / "config.cfg").write_text(cfg.echo())
        (out / "report.json").write_text(rep.to_json() + "\n")
    return rep


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def _summary(rep: RunReport) -> List[str]:
    lines = [f"{rep.experiment} '{rep.name}'"]
    if rep.experiment == "coefficients":
        lines.append(f"{'N':>4} {'(2-sqrt3)^N':>12} {'|a_NN|/|a11|':>13} {'|b_NN|/|b11|':>13} {'|w_N|dx/|a11|':>14}")
        for row in rep.tables["coefficients"]:
            lines.append(
                f"{row['N']:>4} {three_figures(row['pow']):>12} {three_figures(row['a_ratio']):>13} "
                f"{three_figures(row['b_ratio']):>13} {three_figures(row['omega_ratio']):>14}"
            )
        return lines
    if rep.experiment == "stability":
        m = rep.metrics
        lines.append(
            f"C0: max radius 1 + {m['c0_max_radius'] - 1.0:.3e} at shift {m['c0_max_shift']:.6g}, k={m['c0_max_k']}"
            f" ({'exceeds' if m['c0_exceeds_one'] else 'does not exceed'} 1)"
        )
        lines.append(f"C0 probe shift {m['probe_shift']:.6g}: radius 1 + {m['probe_radius'] - 1.0:.3e}")
        if "c1_max_radius" in m:
            lines.append(
                f"C1: max radius 1 + {m['c1_max_radius'] - 1.0:.3e}"
                f" ({'exceeds' if m['c1_exceeds_one'] else 'does not exceed'} 1)"
            )
        return lines
    for k, v in rep.metrics.items():
        lines.append(f"  {k} = {v:.3e}" if isinstance(v, float) else f"  {k} = {v}")
    return lines


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mps", description="Multi-patch spline experiments")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a config file or preset")
    r.add_argument("config", nargs="?", help="config file; keys override the preset when both are given")
    r.add_argument("--out", help="output directory (default: [experiment] output)")
    r.add_argument("--preset", help="named preset shipped with the package")
    r.add_argument("--mode", help="plan mode override: exact or truncated:N")
    r.add_argument("--seed", type=int, help="seed override for randomized sampling")
    sub.add_parser("presets", help="list the shipped presets")
    e = sub.add_parser("show", help="print a preset")
    e.add_argument("name")
    return p


def resolve_config(config: Optional[str], preset: Optional[str], mode=None, seed=None) -> ExperimentConfig:
    if config is None and preset is None:
        raise ConfigError("give a config file, --preset NAME, or both")
    raw = {}
    if preset is not None:
        raw = parse_text(preset_text(preset), f"preset:{preset}")
    if config is not None:
        path = Path(config)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        raw = merge(raw, parse_text(text, str(path)))
    override = {}
    if mode is not None:
        override.setdefault("plan", {})["modes"] = mode
    if seed is not None:
        override.setdefault("experiment", {})["seed"] = str(seed)
    return ExperimentConfig.from_raw(merge(raw, override))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            print("\n".join(preset_names()))
            return EXIT_OK
        if args.command == "show":
            print(preset_text(args.name), end="")
            return EXIT_OK
        cfg = resolve_config(args.config, args.preset, args.mode, args.seed)
        out = Path(args.out if args.out else cfg.output)
        rep = run_experiment(cfg, out)
    except (ConfigError, LayoutError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OutOfDomainError, NumericalError, SingularSystemError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for line in _summary(rep):
        print(line)
    print(f"wrote {len(rep.files) + 2} files to {out}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
