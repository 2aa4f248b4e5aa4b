"""Experiment drivers behind the command line."""
from __future__ import annotations

import datetime
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import convergence_rates, cross_section, error_norms, oscillation_metric
from .config import RunConfig
from .decoupled import iterate
from .fem import taylor_hood_spaces
from .io import ResultTable, state_vertex_fields, write_csv, write_vtk
from .mesh import BoundaryScheme, build_unit_square_mesh, tag_boundaries
from .model import barry_mercer_problem, manufactured_problem, zero_problem
from .monolithic import TimeGrid, run
from .operators import Operators

log = logging.getLogger(__name__)

ERROR_COLUMNS = ("eu_H1", "exi_L2", "ephi_H1", "epsi_H1")
RATE_COLUMNS = ("rate_u", "rate_xi", "rate_phi", "rate_psi")
FIELD_ORDER = ("u", "xi", "phi", "psi")


@dataclass
class ExperimentResult:
    tables: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)  # name -> (passed, detail)

    @property
    def passed(self):
        return all(ok for ok, _ in self.checks.values())


def make_problem(cfg: RunConfig, params):
    if cfg.problem == "manufactured":
        return manufactured_problem(params)
    if cfg.problem == "barry_mercer":
        return barry_mercer_problem(params, cfg.variant, omega=cfg.omega)
    return zero_problem(params)


def make_spaces(cfg: RunConfig, n, scheme):
    mesh = tag_boundaries(build_unit_square_mesh(n), BoundaryScheme.named(scheme))
    return taylor_hood_spaces(mesh, cfg.k, cfg.l)


def _scheme(cfg):
    return "barry_mercer" if cfg.problem == "barry_mercer" else "right_neumann"


def _solve(cfg, problem, spaces, grid, ops=None, reference=None):
    """Final trajectory with the configured solver, plus the iteration report if any."""
    if cfg.solver == "monolithic":
        return run(problem, spaces, grid, ops, xi0=cfg.xi0), None
    return iterate(problem, spaces, grid, tol=cfg.tol, max_iter=cfg.max_iter, stopping=cfg.stopping,
                   reference=reference, ops=ops, xi0=cfg.xi0, concurrent=cfg.concurrent,
                   workers=cfg.workers or None)


def _ladder_table(first, key_values, errors):
    table = ResultTable([first] + [c for pair in zip(ERROR_COLUMNS, RATE_COLUMNS) for c in pair])
    cols = {c: [e.as_dict()[c] for e in errors] for c in ERROR_COLUMNS}
    rates = {c: [float("nan")] + (convergence_rates(cols[c]) if len(errors) > 1 else []) for c in ERROR_COLUMNS}
    for i, kv in enumerate(key_values):
        row = [kv]
        for c in ERROR_COLUMNS:
            row += [cols[c][i], rates[c][i]]
        table.append(row)
    return table, rates


def _rate_check(rates, lo, hi=None):
    out = {}
    for c, r in zip(ERROR_COLUMNS, RATE_COLUMNS):
        last = rates[c][-1]
        ok = bool(np.isfinite(last) and last >= lo and (hi is None or last <= hi))
        bound = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
        out[r] = (ok, f"finest-pair rate {last:.3f}, required {bound}")
    return out


def converge_time(cfg: RunConfig) -> ExperimentResult:
    params = cfg.params(h=1.0 / cfg.n)
    problem = make_problem(cfg, params)
    spaces = make_spaces(cfg, cfg.n, _scheme(cfg))
    ops = Operators(spaces)
    errors = []
    for dt in cfg.dt_ladder:
        grid = TimeGrid(cfg.T_f, int(round(cfg.T_f / dt)))
        traj, _ = _solve(cfg, problem, spaces, grid, ops)
        errors.append(error_norms(traj.final, problem.exact, spaces))
        log.info("dt=%g: %s", dt, errors[-1].as_dict())
    table, rates = _ladder_table("dt", list(cfg.dt_ladder), errors)
    res = ExperimentResult({"convergence_time": table})
    if len(errors) > 1:
        res.checks.update(_rate_check(rates, 0.85, 1.05))
    return res


def converge_space(cfg: RunConfig) -> ExperimentResult:
    grid = TimeGrid(cfg.T_f, cfg.N)
    errors = []
    for n in cfg.n_ladder:
        params = cfg.params(h=1.0 / n)
        problem = make_problem(cfg, params)
        spaces = make_spaces(cfg, n, _scheme(cfg))
        traj, _ = _solve(cfg, problem, spaces, grid)
        errors.append(error_norms(traj.final, problem.exact, spaces))
        log.info("n=%d: %s", n, errors[-1].as_dict())
    table, rates = _ladder_table("h", [1.0 / n for n in cfg.n_ladder], errors)
    res = ExperimentResult({"convergence_space": table})
    if len(errors) > 1:
        res.checks.update(_rate_check(rates, 1.90))
    return res


def iterate_experiment(cfg: RunConfig) -> ExperimentResult:
    params = cfg.params(h=1.0 / cfg.n)
    problem = make_problem(cfg, params)
    spaces = make_spaces(cfg, cfg.n, _scheme(cfg))
    ops = Operators(spaces)
    grid = TimeGrid(cfg.T_f, cfg.N)
    mono = run(problem, spaces, grid, ops, xi0=cfg.xi0)
    _, report = iterate(problem, spaces, grid, tol=cfg.tol, max_iter=cfg.max_iter, stopping=cfg.stopping,
                        reference=mono, ops=ops, xi0=cfg.xi0, concurrent=cfg.concurrent,
                        workers=cfg.workers or None)
    table = ResultTable(["iter", "rel_err_u", "rel_err_xi", "rel_err_phi", "rel_err_psi", "contraction_ratio"])
    for i, err in enumerate(report.reference_errors, start=1):
        ratio = report.ratio(i) if i >= 2 else float("nan")
        table.append([i] + [err[f] for f in FIELD_ORDER] + [ratio])
    res = ExperimentResult({"iterations": table})
    if cfg.tol > 0:
        res.checks["converged"] = (report.converged, f"{report.iterations} iterations, tol {cfg.tol:g}")
    ratios = [r for r in report.ratios if np.isfinite(r)]
    if ratios:
        res.checks["contraction"] = (max(ratios) < 1.0, f"largest ratio {max(ratios):.4f}")
    return res


SECTION_FIELDS = ("u1", "u2", "xi", "phi", "psi")


def _section_table(state, spaces, cfg):
    samples = {f: cross_section(state, spaces, f, cfg.line, cfg.n_samples) for f in SECTION_FIELDS}
    table = ResultTable(["s"] + list(SECTION_FIELDS))
    s = samples["phi"].params
    for j in range(len(s)):
        table.append([s[j]] + [samples[f].values[j] for f in SECTION_FIELDS])
    return table, samples


def barry_mercer(cfg: RunConfig) -> ExperimentResult:
    spaces = make_spaces(cfg, cfg.n, "barry_mercer")
    params = cfg.params(h=spaces.h)
    problem = make_problem(cfg, params)
    ops = Operators(spaces)
    grid = TimeGrid(cfg.T_f, cfg.N)
    mono = run(problem, spaces, grid, ops)
    dec, report = iterate(problem, spaces, grid, tol=cfg.tol, max_iter=cfg.max_iter, stopping=cfg.stopping,
                          ops=ops, concurrent=cfg.concurrent, workers=cfg.workers or None)
    res = ExperimentResult()
    sections = {}
    for name, traj in (("monolithic", mono), ("decoupled", dec)):
        res.tables[f"section_{name}"], sections[name] = _section_table(traj.final, spaces, cfg)
        res.files.append(("vtk", f"{name}_final.vtk", spaces.mesh, state_vertex_fields(traj.final, spaces)))
    for name in ("monolithic", "decoupled"):
        for f in ("phi", "psi"):
            under, flips = oscillation_metric(sections[name][f])
            res.checks[f"undershoot_{f}_{name}"] = (under <= 0.02, f"undershoot {under:.4f}, sign flips {flips}")
    for f in ("phi", "psi"):
        a, b = sections["decoupled"][f].values, sections["monolithic"][f].values
        scale = max(float(np.max(np.abs(b))), 1e-300)
        gap = float(np.max(np.abs(a - b))) / scale
        res.checks[f"agreement_{f}"] = (gap <= 0.01, f"max gap {gap:.2e} of max amplitude")
    return res


def single_run(cfg: RunConfig) -> ExperimentResult:
    spaces = make_spaces(cfg, cfg.n, _scheme(cfg))
    params = cfg.params(h=spaces.h)
    problem = make_problem(cfg, params)
    ops = Operators(spaces)
    traj, _ = _solve(cfg, problem, spaces, TimeGrid(cfg.T_f, cfg.N), ops)
    cols = ["t", "norm_u_H1", "norm_xi_L2", "norm_phi_H1", "norm_psi_H1"]
    if problem.exact is not None:
        cols += list(ERROR_COLUMNS)
    summary = ResultTable(cols)
    for st in traj.states:
        row = [st.t, ops.h1_v(st.u), ops.l2_w(st.xi), ops.h1_q(st.phi), ops.h1_q(st.psi)]
        if problem.exact is not None:
            e = error_norms(st, problem.exact, spaces).as_dict()
            row += [e[c] for c in ERROR_COLUMNS]
        summary.append(row)
    vf = state_vertex_fields(traj.final, spaces)
    fields_table = ResultTable(["x", "y", "u1", "u2", "xi", "phi", "psi"])
    for j, (x, y) in enumerate(spaces.mesh.vertices):
        fields_table.append([x, y, vf["u"][j, 0], vf["u"][j, 1], vf["xi"][j], vf["phi"][j], vf["psi"][j]])
    res = ExperimentResult({"summary": summary, "fields": fields_table})
    res.files.append(("vtk", "final.vtk", spaces.mesh, vf))
    return res


DRIVERS = {
    "converge_time": converge_time,
    "converge_space": converge_space,
    "iterate": iterate_experiment,
    "barry_mercer": barry_mercer,
    "single_run": single_run,
}


def run_experiment(cfg: RunConfig, output=None) -> ExperimentResult:
    """Run ``cfg.experiment`` and write its CSV tables, VTK snapshots and metadata."""
    np.random.seed(cfg.seed)
    res = DRIVERS[cfg.experiment](cfg)
    out = Path(cfg.output if output is None else output)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"config_hash": cfg.digest(), "experiment": cfg.experiment, "version": __version__,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")}
    written = []
    for name, table in res.tables.items():
        table.meta.update(meta)
        written.append(write_csv(table, out / f"{name}.csv"))
    for kind, name, mesh, fields in res.files:
        written.append(write_vtk(mesh, fields, out / name))
    (out / "config.ini").write_text(cfg.to_text())
    meta["checks"] = {k: {"passed": ok, "detail": d} for k, (ok, d) in res.checks.items()}
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    res.files = written + [out / "config.ini", out / "meta.json"]
    return res
