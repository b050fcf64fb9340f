"""Experiment configuration: one JSON file describes one reproducible run.

Every module-level precondition that can be checked without running
anything is checked at load time, and validation errors name the
offending field path.  Parsing then serializing then parsing again gives
an identical configuration (defaults are materialized on the way in).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .branches import BranchSearchSettings, SearchRegion
from .dynamics import MAX_TRUNCATION, GaussianWavepacket, PhysicalConstants
from .errors import ConfigError
from .integrator import IntegratorConfig
from .potentials import potential_from_config
from .reconstruction import SuperpositionPolicy


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    count: int
    include_center_landing: bool = True


@dataclass(frozen=True)
class OracleSpec:
    x_min: float
    x_max: float
    n_points: int
    n_steps: int


@dataclass(frozen=True)
class TransmissionSpec:
    x_split: float
    amp_tol: float = 1e-8


@dataclass
class ExperimentConfig:
    constants: PhysicalConstants
    gaussian: GaussianWavepacket
    potential: object
    truncation: int
    t_f: float
    pole_clearance: float
    xf_grid: GridSpec
    region: SearchRegion
    settings: BranchSearchSettings
    anchors: list[float] | None
    integrator: IntegratorConfig
    oracle: OracleSpec
    policy: SuperpositionPolicy
    report_regions: dict[str, tuple[float, float]] = field(default_factory=dict)
    transmission: TransmissionSpec | None = None
    output_dir: str = "out"


def _get(section, path, key, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    return section[key]


def _number(section, path, key, default=None, required=False):
    v = _get(section, path, key, default, required)
    if v is None:
        return None
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    return float(v)


def _integer(section, path, key, default=None, required=False):
    v = _get(section, path, key, default, required)
    if v is None:
        return None
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
    return v


def _pair(section, path, key, default=None, required=False):
    v = _get(section, path, key, default, required)
    if v is None:
        return None
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"{path}.{key}: expected [lo, hi]")
    return (float(v[0]), float(v[1]))


def parse_config(data: dict) -> ExperimentConfig:
    """Build a validated ExperimentConfig from a plain mapping."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")

    sec = data.get("constants", {})
    try:
        consts = PhysicalConstants(
            m=_number(sec, "constants", "m", required=True),
            hbar=_number(sec, "constants", "hbar", 1.0),
        )
    except ValueError as exc:
        raise ConfigError(f"constants: {exc}") from exc

    sec = data.get("gaussian", {})
    alpha = _get(sec, "gaussian", "alpha", required=True)
    if isinstance(alpha, (list, tuple)) and len(alpha) == 2:
        alpha = complex(float(alpha[0]), float(alpha[1]))
    elif isinstance(alpha, (int, float)) and not isinstance(alpha, bool):
        alpha = complex(alpha)
    else:
        raise ConfigError("gaussian.alpha: expected a number or [re, im]")
    try:
        wavepacket = GaussianWavepacket(
            alpha=alpha,
            x_c=_number(sec, "gaussian", "x_c", required=True),
            p_c=_number(sec, "gaussian", "p_c", required=True),
        )
    except ValueError as exc:
        raise ConfigError(f"gaussian: {exc}") from exc

    potential = potential_from_config(data.get("potential", {}))

    n_trunc = _integer(data, "config", "truncation", required=True)
    if not 1 <= n_trunc <= MAX_TRUNCATION:
        raise ConfigError(
            f"truncation: must be between 1 and {MAX_TRUNCATION} "
            f"(the action equation needs v_x, so N >= 1), got {n_trunc}"
        )
    t_f = _number(data, "config", "t_f", required=True)
    if t_f <= 0:
        raise ConfigError(f"t_f: must be > 0, got {t_f}")
    clearance = _number(data, "config", "pole_clearance", 0.02)
    if clearance <= 0:
        raise ConfigError("pole_clearance: must be > 0")

    sec = data.get("xf_grid", {})
    grid = GridSpec(
        lo=_number(sec, "xf_grid", "lo", required=True),
        hi=_number(sec, "xf_grid", "hi", required=True),
        count=_integer(sec, "xf_grid", "count", required=True),
        include_center_landing=bool(_get(sec, "xf_grid", "include_center_landing", True)),
    )
    if not grid.lo < grid.hi:
        raise ConfigError("xf_grid: require lo < hi")
    if grid.count < 2:
        raise ConfigError("xf_grid.count: must be >= 2")

    sec = data.get("search", {})
    try:
        region = SearchRegion(
            re_range=_pair(sec, "search", "re_range", required=True),
            im_range=_pair(sec, "search", "im_range", required=True),
            n_re=_integer(sec, "search", "n_re", 40),
            n_im=_integer(sec, "search", "n_im", 40),
        )
        settings = BranchSearchSettings(
            newton_tol=_number(sec, "search", "newton_tol", 1e-9),
            max_newton_iters=_integer(sec, "search", "max_newton_iters", 25),
            root_dedup_tol=_number(sec, "search", "root_dedup_tol", 1e-5),
            focal_tol=_number(sec, "search", "focal_tol", 1e-6),
            real_branch_tol=_number(sec, "search", "real_branch_tol", 1e-4),
            continuation_jump_tol=_number(sec, "search", "continuation_jump_tol", 10.0),
            continuation_max_gap=_integer(sec, "search", "continuation_max_gap", 20),
            region_margin=_number(sec, "search", "region_margin", 0.5),
            negligible_log_amp=_number(sec, "search", "negligible_log_amp", -13.8),
            divergent_log_amp=_number(sec, "search", "divergent_log_amp", 30.0),
        )
    except ValueError as exc:
        raise ConfigError(f"search: {exc}") from exc
    anchors = _get(sec, "search", "anchors")
    if anchors is not None:
        if not isinstance(anchors, list) or not anchors:
            raise ConfigError("search.anchors: expected a non-empty list of numbers or null")
        anchors = [float(a) for a in anchors]
        for a in anchors:
            if not grid.lo <= a <= grid.hi:
                raise ConfigError(f"search.anchors: {a} outside xf_grid range")

    sec = data.get("integrator", {})
    try:
        integ = IntegratorConfig(
            rel_tol=_number(sec, "integrator", "rel_tol", 1e-9),
            abs_tol=_number(sec, "integrator", "abs_tol", 1e-11),
            h_init=_number(sec, "integrator", "h_init", 1e-4),
            h_min=_number(sec, "integrator", "h_min", 1e-12),
            h_max=_number(sec, "integrator", "h_max", None),
            max_steps=_integer(sec, "integrator", "max_steps", 10**6),
        )
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from exc

    sec = data.get("oracle", {})
    oracle = OracleSpec(
        x_min=_number(sec, "oracle", "x_min", required=True),
        x_max=_number(sec, "oracle", "x_max", required=True),
        n_points=_integer(sec, "oracle", "n_points", required=True),
        n_steps=_integer(sec, "oracle", "n_steps", required=True),
    )
    if not oracle.x_min < oracle.x_max:
        raise ConfigError("oracle: require x_min < x_max")
    n = oracle.n_points
    if n < 2 or n & (n - 1):
        raise ConfigError(f"oracle.n_points: must be a power of two, got {n}")
    if oracle.n_steps < 1:
        raise ConfigError("oracle.n_steps: must be >= 1")
    # Nyquist precondition is checkable at load time.
    dx = (oracle.x_max - oracle.x_min) / n
    p_max = abs(wavepacket.p_c) + 6.0 * consts.hbar * math.sqrt(abs(wavepacket.alpha))
    if p_max >= consts.hbar * math.pi / dx:
        raise ConfigError(
            f"oracle.n_points: grid resolves |p| < {consts.hbar * math.pi / dx:.3g} "
            f"but the packet needs {p_max:.3g}"
        )

    sec = data.get("superposition", {})
    ids = _get(sec, "superposition", "branch_ids", [])
    if not isinstance(ids, list):
        raise ConfigError("superposition.branch_ids: expected a list")
    cap = _number(sec, "superposition", "amplitude_cap", None)
    try:
        policy = SuperpositionPolicy(
            mode=_get(sec, "superposition", "mode", "all"),
            branch_ids=tuple(int(i) for i in ids),
            amplitude_cap=cap,
        )
    except ValueError as exc:
        raise ConfigError(f"superposition: {exc}") from exc

    regions = {}
    sec = data.get("report_regions", {})
    if not isinstance(sec, dict):
        raise ConfigError("report_regions: expected a mapping of name -> [lo, hi]")
    for name, pairv in sec.items():
        regions[str(name)] = _pair({"r": pairv}, "report_regions", "r", required=True)

    trans = None
    sec = data.get("transmission")
    if sec is not None:
        trans = TransmissionSpec(
            x_split=_number(sec, "transmission", "x_split", required=True),
            amp_tol=_number(sec, "transmission", "amp_tol", 1e-8),
        )

    out = data.get("output_dir", "out")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir: expected a non-empty string")

    return ExperimentConfig(
        constants=consts,
        gaussian=wavepacket,
        potential=potential,
        truncation=n_trunc,
        t_f=t_f,
        pole_clearance=clearance,
        xf_grid=grid,
        region=region,
        settings=settings,
        anchors=anchors,
        integrator=integ,
        oracle=oracle,
        policy=policy,
        report_regions=regions,
        transmission=trans,
        output_dir=out,
    )


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(data)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain mapping with all defaults materialized; json round-trips."""
    alpha = complex(cfg.gaussian.alpha)
    return {
        "constants": {"m": cfg.constants.m, "hbar": cfg.constants.hbar},
        "gaussian": {
            "alpha": alpha.real if alpha.imag == 0 else [alpha.real, alpha.imag],
            "x_c": cfg.gaussian.x_c,
            "p_c": cfg.gaussian.p_c,
        },
        "potential": cfg.potential.to_config(),
        "truncation": cfg.truncation,
        "t_f": cfg.t_f,
        "pole_clearance": cfg.pole_clearance,
        "xf_grid": asdict(cfg.xf_grid),
        "search": {
            "re_range": list(cfg.region.re_range),
            "im_range": list(cfg.region.im_range),
            "n_re": cfg.region.n_re,
            "n_im": cfg.region.n_im,
            "anchors": cfg.anchors,
            "newton_tol": cfg.settings.newton_tol,
            "max_newton_iters": cfg.settings.max_newton_iters,
            "root_dedup_tol": cfg.settings.root_dedup_tol,
            "focal_tol": cfg.settings.focal_tol,
            "real_branch_tol": cfg.settings.real_branch_tol,
            "continuation_jump_tol": cfg.settings.continuation_jump_tol,
            "continuation_max_gap": cfg.settings.continuation_max_gap,
            "region_margin": cfg.settings.region_margin,
            "negligible_log_amp": cfg.settings.negligible_log_amp,
            "divergent_log_amp": cfg.settings.divergent_log_amp,
        },
        "integrator": {
            "rel_tol": cfg.integrator.rel_tol,
            "abs_tol": cfg.integrator.abs_tol,
            "h_init": cfg.integrator.h_init,
            "h_min": cfg.integrator.h_min,
            "h_max": cfg.integrator.h_max,
            "max_steps": cfg.integrator.max_steps,
        },
        "oracle": asdict(cfg.oracle),
        "superposition": {
            "mode": cfg.policy.mode,
            "branch_ids": list(cfg.policy.branch_ids),
            "amplitude_cap": cfg.policy.amplitude_cap,
        },
        "report_regions": {k: list(v) for k, v in cfg.report_regions.items()},
        "transmission": asdict(cfg.transmission) if cfg.transmission else None,
        "output_dir": cfg.output_dir,
    }


def serialize_config(cfg: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"
