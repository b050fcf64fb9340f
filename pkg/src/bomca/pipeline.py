"""End-to-end experiment orchestration: oracle, branch search, reconstruction, reports.

Given a validated configuration this module produces the full set of
deterministic artifacts: the exact grid wavefunction, the quantum
potential diagnostic, the branch inventory, per-branch and superposed
wavefunctions on the reconstruction grid, comparison metrics, and a JSON
report.  Emitted orderings are canonical (branch id, then x_f), so
repeated runs of the same configuration are byte-identical CSV for CSV.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .branches import branch_census, seed_scan
from .config import ExperimentConfig, config_to_dict
from .core import backend_name
from .errors import BomcaError, EmptyRegionError
from .integrator import BatchPropagator
from .reconstruction import best_pair, branch_psi, compare, superpose
from .splitop import (
    gaussian_on_grid,
    nyquist_momentum,
    quantum_potential,
    split_operator_propagate,
    transmission_probability,
)


@dataclass
class ExperimentReport:
    """Everything a run produced, with pointers into the emitted files."""

    branches: list[dict] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    transmission: dict | None = None
    runtime: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    files: dict = field(default_factory=dict)
    backend: str = backend_name
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "branches": self.branches,
            "metrics": self.metrics,
            "diagnostics": self.diagnostics,
            "transmission": self.transmission,
            "runtime": self.runtime,
            "warnings": self.warnings,
            "files": self.files,
            "backend": self.backend,
            "config": self.config,
        }


def _fmt(v) -> str:
    return f"{v:.17g}"


def _write_csv(path: Path, header: list[str], rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def build_propagator(cfg: ExperimentConfig, threads: int = 1) -> BatchPropagator:
    return BatchPropagator(
        cfg.gaussian,
        cfg.potential,
        cfg.truncation,
        cfg.t_f,
        cfg.constants,
        cfg=cfg.integrator,
        clearance=cfg.pole_clearance,
        threads=threads,
    )


def propagate_oracle(cfg: ExperimentConfig):
    """Reference propagation to t_f plus the quantum-potential field."""
    psi0 = gaussian_on_grid(
        cfg.oracle.x_min, cfg.oracle.x_max, cfg.oracle.n_points, cfg.gaussian, cfg.constants
    )
    psi = split_operator_propagate(
        psi0,
        cfg.potential,
        cfg.t_f,
        cfg.oracle.n_steps,
        cfg.constants,
        p_max=nyquist_momentum(cfg.gaussian, cfg.constants),
    )
    return psi0, psi, quantum_potential(psi, cfg.constants)


def reconstruction_grid(cfg: ExperimentConfig, prop: BatchPropagator) -> np.ndarray:
    """The x_f grid, optionally augmented with the packet-center landing point.

    The branch through the packet center is the only one whose real-axis
    crossing is known a priori; sampling exactly there is what lets the
    real-branch label certify against its tolerance.
    """
    base = np.linspace(cfg.xf_grid.lo, cfg.xf_grid.hi, cfg.xf_grid.count)
    if not cfg.xf_grid.include_center_landing:
        return base
    fb = prop.final_states(np.array([complex(cfg.gaussian.x_c)]))
    if not fb.ok[0]:
        return base
    landing = float(fb.x[0].real)
    if not cfg.xf_grid.lo < landing < cfg.xf_grid.hi:
        return base
    return np.sort(np.unique(np.append(base, landing)))


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: str | None = None,
    threads: int = 1,
    verbose: bool = False,
) -> ExperimentReport:
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = ExperimentReport(config=config_to_dict(cfg))
    say = print if verbose else (lambda *a, **k: None)

    t_start = time.monotonic()
    psi0, psi_exact, qfield = propagate_oracle(cfg)
    report.runtime["oracle_s"] = round(time.monotonic() - t_start, 3)
    say(f"oracle: norm drift {abs(psi_exact.norm() - psi0.norm()):.2e}")

    x = psi_exact.x
    _write_csv(
        out / "psi_exact.csv",
        ["x", "re_psi", "im_psi"],
        zip(x, psi_exact.values.real, psi_exact.values.imag),
    )
    _write_csv(
        out / "qpotential.csv",
        ["x", "amplitude", "Q", "valid"],
        zip(qfield.x, qfield.A, qfield.Q, qfield.valid.astype(float)),
    )
    report.files["psi_exact"] = "psi_exact.csv"
    report.files["qpotential"] = "qpotential.csv"
    report.diagnostics["oracle"] = {
        "norm_initial": psi0.norm(),
        "norm_final": psi_exact.norm(),
        "norm_drift": abs(psi_exact.norm() - psi0.norm()),
        "edge_amplitude": psi_exact.edge_amplitude(),
    }

    t_phase = time.monotonic()
    prop = build_propagator(cfg, threads)
    grid = reconstruction_grid(cfg, prop)
    anchors = cfg.anchors
    if anchors is None:
        anchors = [grid[int(f * (grid.size - 1))] for f in (0.25, 0.5, 0.75)]
    branches, labels, scans = branch_census(prop, cfg.region, grid, anchors, cfg.settings)
    report.runtime["branch_search_s"] = round(time.monotonic() - t_phase, 3)
    say(f"census: {len(branches)} branches, labels {labels}")

    rows = []
    for b in branches:
        for sol in b.solutions:
            if sol is not None:
                rows.append(
                    (b.id, sol.x_f, sol.x0.real, sol.x0.imag, sol.S_f.real, sol.S_f.imag, sol.residual)
                )
    _write_csv(
        out / "branches.csv",
        ["branch_id", "x_f", "re_x0", "im_x0", "re_S", "im_S", "residual"],
        rows,
    )
    report.files["branches"] = "branches.csv"

    secondary_order = sorted(
        (b.id for b in branches if labels[b.id] == "secondary"),
        key=lambda i: next(b for b in branches if b.id == i).mean_abs_im_x0(),
    )
    for b in branches:
        cover = b.covered
        inv = {
            "id": b.id,
            "label": labels[b.id],
            "seed": [b.seed.real, b.seed.imag],
            "n_solutions": int(b.mask.sum()),
            "covered": list(cover) if cover else None,
            "complete": bool(b.mask.all()),
            "truncated_left": b.truncated_left,
            "truncated_right": b.truncated_right,
            "min_abs_im_x0": b.min_abs_im_x0(),
            "mean_abs_im_x0": b.mean_abs_im_x0(),
            "max_residual": max((s.residual for s in b.solutions if s is not None), default=None),
            "min_abs_M": min((abs(s.M_f) for s in b.solutions if s is not None), default=None),
            "n_focal": sum(1 for s in b.solutions if s is not None and s.focal),
        }
        report.branches.append(inv)
        if b.truncated_left or b.truncated_right:
            report.warnings.append(
                f"branch {b.id} truncated ({b.truncated_left}, {b.truncated_right})"
            )
    report.diagnostics["census"] = {
        "n_branches": len(branches),
        "n_contributing": sum(1 for b in branches if labels[b.id] in ("real", "secondary")),
        "n_real": sum(1 for b in branches if labels[b.id] == "real"),
        "secondary_by_mean_im": secondary_order,
        "anchors": [float(a) for a in anchors],
        "scans": [
            {
                "n_seeds": s.n_seeds,
                "converged": s.converged,
                "outside_region": s.outside_region,
                "failures": s.failures,
                "newton_iters_max": s.newton_iters_max,
            }
            for s in scans
        ],
    }

    wfs = []
    for b in branches:
        bw = branch_psi(b, cfg.constants, log_amplitude_cap=cfg.settings.divergent_log_amp)
        wfs.append(bw)
        _write_csv(
            out / f"psi_branch_{b.id}.csv",
            ["x_f", "re_psi", "im_psi"],
            zip(bw.xf_grid, bw.psi.real, bw.psi.imag),
        )
        report.files[f"psi_branch_{b.id}"] = f"psi_branch_{b.id}.csv"

    oracle_abs = psi_exact.interpolate_abs(grid)
    contributing = [
        bw for bw in wfs if labels[bw.branch_id] in ("real", "secondary")
    ]
    psi_sum = None
    if cfg.policy.mode in ("single", "pair", "set") or contributing:
        try:
            pool = wfs if cfg.policy.mode in ("single", "pair", "set") else contributing
            psi_sum, valid_sum = superpose(pool, cfg.policy, oracle_abs=oracle_abs)
            tag = cfg.policy.tag()
            _write_csv(
                out / f"psi_sum_{tag}.csv",
                ["x_f", "re_psi", "im_psi"],
                zip(grid, psi_sum.real, psi_sum.imag),
            )
            report.files[f"psi_sum_{tag}"] = f"psi_sum_{tag}.csv"
        except (BomcaError, ValueError) as exc:
            report.warnings.append(f"superposition failed: {exc}")
            psi_sum = None

    t_phase = time.monotonic()
    regions = dict(cfg.report_regions)
    regions.setdefault("full", (float(grid[0]), float(grid[-1])))
    for name, reg in regions.items():
        entry = {"region": list(reg)}
        if psi_sum is not None:
            try:
                m = compare(grid, psi_sum, oracle_abs, reg, valid=valid_sum)
                entry["policy"] = {
                    "tag": cfg.policy.tag(),
                    "l2_rel": m.l2_rel,
                    "linf_rel": m.linf_rel,
                    "nodes_bomca": m.node_positions_a.tolist(),
                    "nodes_ref": m.node_positions_ref.tolist(),
                    "n_points": m.n_points,
                }
            except EmptyRegionError as exc:
                entry["policy"] = {"error": str(exc)}
        if len(contributing) >= 2:
            ids, m = best_pair(contributing, oracle_abs, grid, reg)
            if ids is not None:
                entry["best_pair"] = {
                    "ids": list(ids),
                    "l2_rel": m.l2_rel,
                    "linf_rel": m.linf_rel,
                    "nodes_bomca": m.node_positions_a.tolist(),
                    "nodes_ref": m.node_positions_ref.tolist(),
                }
        report.metrics[name] = entry
    report.runtime["compare_s"] = round(time.monotonic() - t_phase, 3)

    if cfg.transmission is not None:
        entry = {"x_split": cfg.transmission.x_split}
        try:
            entry["oracle_probability"] = transmission_probability(
                psi_exact, cfg.transmission.x_split, cfg.transmission.amp_tol
            )
        except BomcaError as exc:
            entry["error"] = str(exc)
            report.warnings.append(f"transmission: {exc}")
        if psi_sum is not None and "oracle_probability" in entry:
            sel = valid_sum & (grid > cfg.transmission.x_split)
            if np.any(sel):
                p = float(np.trapezoid(np.abs(psi_sum[sel]) ** 2, grid[sel]))
                entry["reconstructed_probability"] = p
                entry["relative_difference"] = abs(p - entry["oracle_probability"]) / entry[
                    "oracle_probability"
                ]
        report.transmission = entry

    report.runtime["total_s"] = round(time.monotonic() - t_start, 3)
    (out / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    report.files["report"] = "report.json"
    return report


def run_oracle(cfg: ExperimentConfig, out_dir: str | None = None, verbose: bool = False) -> dict:
    """Reference propagation only; emits psi_exact.csv and qpotential.csv."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.monotonic()
    psi0, psi, qfield = propagate_oracle(cfg)
    _write_csv(
        out / "psi_exact.csv",
        ["x", "re_psi", "im_psi"],
        zip(psi.x, psi.values.real, psi.values.imag),
    )
    _write_csv(
        out / "qpotential.csv",
        ["x", "amplitude", "Q", "valid"],
        zip(qfield.x, qfield.A, qfield.Q, qfield.valid.astype(float)),
    )
    info = {
        "norm_initial": psi0.norm(),
        "norm_final": psi.norm(),
        "norm_drift": abs(psi.norm() - psi0.norm()),
        "edge_amplitude": psi.edge_amplitude(),
        "max_abs_Q_valid": float(np.abs(qfield.Q[qfield.valid]).max()),
        "runtime_s": round(time.monotonic() - t0, 3),
    }
    (out / "oracle.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    if verbose:
        print(json.dumps(info, indent=2, sort_keys=True))
    return info


def scan_target(cfg: ExperimentConfig, x_f: float, threads: int = 1):
    """Single-target seed scan (CLI helper): returns roots and diagnostics."""
    prop = build_propagator(cfg, threads)
    return seed_scan(prop, cfg.region, x_f, cfg.settings)
