"""Per-branch wavefunctions on the real axis and their superpositions.

Each branch contributes psi_j(x_f) = exp(i S_j(x_f) / hbar) where S_j is
the action carried by the branch's trajectory landing at x_f.  Nodes and
ripples of the true wavefunction emerge from sums of branch contributions
with opposing phases; which branches to sum is a user policy, not an
algorithm, so the policy object supports single branches, pairs,
arbitrary sets, and an oracle-assisted best-pair diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .branches import Branch
from .dynamics import PhysicalConstants
from .errors import EmptyRegionError, GridMismatchError

# Contributions with log-amplitude above this are flagged as overflowed
# rather than summed; spurious branches can diverge exponentially.
DEFAULT_LOG_AMPLITUDE_CAP = 30.0


@dataclass
class BranchWavefunction:
    """One branch's wavefunction samples on the reconstruction grid."""

    branch_id: int
    xf_grid: np.ndarray
    psi: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True)
class SuperpositionPolicy:
    """Which branch contributions enter the reconstructed wavefunction.

    mode is one of ``single``, ``pair``, ``all``, ``set``, or
    ``best-pair-per-point``; the last one needs an oracle amplitude and is
    a diagnostic, not a prediction.  ``amplitude_cap`` optionally flags
    points of the summed wavefunction exceeding the cap.
    """

    mode: str = "pair"
    branch_ids: tuple[int, ...] = ()
    amplitude_cap: float | None = None

    _MODES = ("single", "pair", "all", "set", "best-pair-per-point")

    def __post_init__(self):
        if self.mode not in self._MODES:
            raise ValueError(f"mode must be one of {self._MODES}, got {self.mode!r}")
        if self.mode == "single" and len(self.branch_ids) != 1:
            raise ValueError("single mode needs exactly one branch id")
        if self.mode == "pair" and len(self.branch_ids) != 2:
            raise ValueError("pair mode needs exactly two branch ids")
        if self.mode == "set" and len(self.branch_ids) < 1:
            raise ValueError("set mode needs at least one branch id")

    def tag(self) -> str:
        if self.mode in ("single", "pair", "set"):
            return f"{self.mode}_" + "_".join(str(i) for i in self.branch_ids)
        return self.mode.replace("-", "_")


def branch_psi(
    branch: Branch,
    consts: PhysicalConstants,
    log_amplitude_cap: float = DEFAULT_LOG_AMPLITUDE_CAP,
    include_focal: bool = False,
) -> BranchWavefunction:
    """psi_j = exp(i S_j / hbar) on the branch's grid, overflow guarded.

    Grid points without a solution, focal (caustic-flagged) solutions,
    and points whose amplitude exponent exceeds the cap come back invalid
    rather than aborting the reconstruction.
    """
    n = branch.xf_grid.size
    psi = np.full(n, np.nan + 1j * np.nan)
    valid = np.zeros(n, dtype=bool)
    for k, sol in enumerate(branch.solutions):
        if sol is None or (sol.focal and not include_focal):
            continue
        log_amp = -sol.S_f.imag / consts.hbar
        if log_amp > log_amplitude_cap:
            continue
        psi[k] = np.exp(1j * sol.S_f / consts.hbar)
        valid[k] = True
    return BranchWavefunction(branch.id, np.asarray(branch.xf_grid, float), psi, valid)


def superpose(
    branch_wfs: list[BranchWavefunction],
    policy: SuperpositionPolicy,
    oracle_abs: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise complex sum of the selected branch contributions.

    Returns (psi, valid); a point is valid only where every selected
    branch is valid.  For ``best-pair-per-point`` the pair minimizing
    | |psi_i + psi_j| - oracle | is chosen independently at every point.
    """
    if not branch_wfs:
        raise ValueError("need at least one branch wavefunction")
    grid = branch_wfs[0].xf_grid
    for bw in branch_wfs[1:]:
        if bw.xf_grid.shape != grid.shape or not np.array_equal(bw.xf_grid, grid):
            raise GridMismatchError("branch wavefunctions live on different grids")

    by_id = {bw.branch_id: bw for bw in branch_wfs}
    if policy.mode == "best-pair-per-point":
        if oracle_abs is None:
            raise ValueError("best-pair-per-point needs an oracle amplitude")
        psi, valid, _ = best_pair_per_point(branch_wfs, oracle_abs)
    else:
        if policy.mode == "all":
            selected = branch_wfs
        else:
            missing = [i for i in policy.branch_ids if i not in by_id]
            if missing:
                raise ValueError(f"unknown branch ids {missing}")
            selected = [by_id[i] for i in policy.branch_ids]
        psi = np.zeros(grid.size, dtype=np.complex128)
        valid = np.ones(grid.size, dtype=bool)
        for bw in selected:
            psi = psi + np.where(bw.valid, bw.psi, 0.0)
            valid &= bw.valid
    if policy.amplitude_cap is not None:
        valid = valid & (np.abs(np.where(valid, psi, 0.0)) <= policy.amplitude_cap)
    psi = np.where(valid, psi, np.nan + 1j * np.nan)
    return psi, valid


def best_pair_per_point(branch_wfs, oracle_abs):
    """Oracle-assisted diagnostic: locally optimal pair at every grid point."""
    grid = branch_wfs[0].xf_grid
    n = grid.size
    oracle_abs = np.asarray(oracle_abs, dtype=float)
    if oracle_abs.shape != (n,):
        raise GridMismatchError("oracle amplitude grid mismatch")
    best = np.full(n, np.inf)
    psi = np.full(n, np.nan + 1j * np.nan)
    valid = np.zeros(n, dtype=bool)
    pair = np.full((n, 2), -1, dtype=int)
    for a in range(len(branch_wfs)):
        for b in range(a + 1, len(branch_wfs)):
            bwa, bwb = branch_wfs[a], branch_wfs[b]
            ok = bwa.valid & bwb.valid
            s = np.where(ok, bwa.psi + bwb.psi, np.nan)
            mismatch = np.where(ok, np.abs(np.abs(s) - oracle_abs), np.inf)
            better = mismatch < best
            best = np.where(better, mismatch, best)
            psi = np.where(better, s, psi)
            valid |= better
            pair[better] = (bwa.branch_id, bwb.branch_id)
    return psi, valid, pair


@dataclass
class CompareMetrics:
    l2_rel: float
    linf_rel: float
    node_positions_a: np.ndarray
    node_positions_ref: np.ndarray
    n_points: int


def compare(
    xf_grid: np.ndarray,
    psi: np.ndarray,
    psi_ref: np.ndarray,
    region: tuple[float, float],
    valid: np.ndarray | None = None,
) -> CompareMetrics:
    """Amplitude-level comparison of two wavefunctions on a common grid.

    l2_rel is ||a - r||_2 / ||r||_2 over the region, linf_rel the max
    absolute deviation over the max reference amplitude; node positions
    are parabolic-refined local minima of each amplitude.
    """
    xf_grid = np.asarray(xf_grid, dtype=float)
    a = np.abs(np.asarray(psi))
    r = np.abs(np.asarray(psi_ref))
    if a.shape != xf_grid.shape or r.shape != xf_grid.shape:
        raise GridMismatchError("inputs must share the comparison grid")
    lo, hi = region
    mask = (xf_grid >= lo) & (xf_grid <= hi)
    if valid is not None:
        mask &= np.asarray(valid, dtype=bool)
    mask &= np.isfinite(a) & np.isfinite(r)
    if not np.any(mask):
        raise EmptyRegionError(f"no usable points in [{lo}, {hi}]")
    da = a[mask] - r[mask]
    ref_norm = float(np.sqrt(np.sum(r[mask] ** 2)))
    l2 = float(np.sqrt(np.sum(da**2))) / ref_norm if ref_norm > 0 else np.inf
    linf = float(np.max(np.abs(da))) / float(np.max(r[mask])) if np.max(r[mask]) > 0 else np.inf
    nodes_a = find_minima(xf_grid[mask], a[mask])
    nodes_r = find_minima(xf_grid[mask], r[mask])
    return CompareMetrics(l2, linf, nodes_a, nodes_r, int(mask.sum()))


def find_minima(x, f, prominence_frac: float = 0.05) -> np.ndarray:
    """Positions of locally prominent minima, parabolically refined.

    A minimum counts when it is strictly below its neighbors and the
    lower of the enclosing maxima exceeds it by ``prominence_frac`` times
    the range of f; this rejects flat-region jitter while keeping real
    interference dips.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if x.size < 3:
        return np.empty(0)
    span = float(f.max() - f.min())
    if span <= 0:
        return np.empty(0)
    out = []
    for i in range(1, x.size - 1):
        if not (f[i] < f[i - 1] and f[i] <= f[i + 1]):
            continue
        left_peak = f[: i + 1].max()
        right_peak = f[i:].max()
        if min(left_peak, right_peak) - f[i] < prominence_frac * span:
            continue
        denom = f[i - 1] - 2.0 * f[i] + f[i + 1]
        if denom > 0:
            delta = 0.5 * (f[i - 1] - f[i + 1]) / denom
            delta = float(np.clip(delta, -0.5, 0.5))
        else:
            delta = 0.0
        step_left = x[i] - x[i - 1]
        step_right = x[i + 1] - x[i]
        out.append(x[i] + delta * (step_right if delta >= 0 else step_left))
    return np.array(out)


def best_pair(branch_wfs, oracle_abs, xf_grid, region):
    """Oracle-assisted diagnostic: the single pair with smallest L2 error on a region."""
    best_ids, best_metrics = None, None
    for a in range(len(branch_wfs)):
        for b in range(a + 1, len(branch_wfs)):
            bwa, bwb = branch_wfs[a], branch_wfs[b]
            ok = bwa.valid & bwb.valid
            s = np.where(ok, bwa.psi + bwb.psi, np.nan)
            try:
                m = compare(xf_grid, s, oracle_abs, region, valid=ok)
            except EmptyRegionError:
                continue
            if best_metrics is None or m.l2_rel < best_metrics.l2_rel:
                best_ids, best_metrics = (bwa.branch_id, bwb.branch_id), m
    return best_ids, best_metrics
