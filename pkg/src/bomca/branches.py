"""Multi-branch root finding for trajectories landing on real final positions.

For a target real x_f the equation x(t_f; x0) = x_f generally has several
complex solutions x0; each continuous family of solutions over a grid of
targets is a branch, and distinct branches reaching the same x_f are what
carry interference.  Roots are found by Newton iteration in one complex
variable, using the propagated sensitivity M = dx(t_f)/dx0 as the exact
Jacobian, seeded from a rectangular lattice; branches are then traced
along the x_f grid by warm-started continuation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import STATUS_NAMES
from .errors import (
    DegenerateJacobianError,
    LeftRegionError,
    NoConvergenceError,
)
from .integrator import BatchPropagator, raise_for_status

NEWTON_OK = 0
NEWTON_RUNNING = -1
NEWTON_NO_CONVERGENCE = 1
NEWTON_LEFT_REGION = 2
NEWTON_DEGENERATE = 3
NEWTON_TRAJECTORY_FAILED = 4

_NEWTON_REASONS = {
    NEWTON_NO_CONVERGENCE: "no_convergence",
    NEWTON_LEFT_REGION: "left_region",
    NEWTON_DEGENERATE: "degenerate_jacobian",
    NEWTON_TRAJECTORY_FAILED: "trajectory_failed",
}


@dataclass(frozen=True)
class SearchRegion:
    """Rectangle of the complex x0 plane scanned for roots, with seed lattice shape."""

    re_range: tuple[float, float]
    im_range: tuple[float, float]
    n_re: int = 40
    n_im: int = 40

    def __post_init__(self):
        if not self.re_range[0] < self.re_range[1]:
            raise ValueError("re_range must be (lo, hi) with lo < hi")
        if not self.im_range[0] < self.im_range[1]:
            raise ValueError("im_range must be (lo, hi) with lo < hi")
        if self.n_re < 2 or self.n_im < 2:
            raise ValueError("seed lattice must be at least 2 x 2")

    def lattice(self) -> np.ndarray:
        re = np.linspace(self.re_range[0], self.re_range[1], self.n_re)
        im = np.linspace(self.im_range[0], self.im_range[1], self.n_im)
        rr, ii = np.meshgrid(re, im, indexing="ij")
        return (rr + 1j * ii).ravel()

    def contains(self, x, margin: float = 0.0) -> np.ndarray:
        """Pointwise membership, widened by margin times each range extent."""
        x = np.asarray(x, dtype=np.complex128)
        dre = margin * (self.re_range[1] - self.re_range[0])
        dim = margin * (self.im_range[1] - self.im_range[0])
        return (
            (x.real >= self.re_range[0] - dre)
            & (x.real <= self.re_range[1] + dre)
            & (x.imag >= self.im_range[0] - dim)
            & (x.imag <= self.im_range[1] + dim)
        )


@dataclass(frozen=True)
class BranchSearchSettings:
    newton_tol: float = 1e-9
    max_newton_iters: int = 25
    root_dedup_tol: float = 1e-5
    focal_tol: float = 1e-6
    real_branch_tol: float = 1e-4
    continuation_jump_tol: float = 10.0
    continuation_max_gap: int = 20
    region_margin: float = 0.5
    # Branch amplitude classification: max/min of -Im(S)/hbar over the
    # branch against these log-amplitude cutoffs.
    negligible_log_amp: float = -13.8
    divergent_log_amp: float = 30.0

    def __post_init__(self):
        if self.newton_tol <= 0 or self.root_dedup_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be >= 1")
        if self.continuation_max_gap < 0:
            raise ValueError("continuation_max_gap must be >= 0")


@dataclass
class RootSolution:
    """One converged trajectory landing at a real target position."""

    x0: complex
    x_f: float
    S_f: complex
    M_f: complex
    residual: float
    newton_iters: int
    focal: bool = False

    def __post_init__(self):
        if not self.residual >= 0:
            raise ValueError("residual must be a non-negative number")


@dataclass
class Branch:
    """A continuation family of roots over an increasing x_f grid.

    ``solutions[k]`` is the root at ``xf_grid[k]`` or None where the walk
    failed; the truncation reasons record why each direction stopped.
    """

    id: int
    seed: complex
    xf_grid: np.ndarray
    solutions: list[RootSolution | None]
    anchor_index: int = 0
    truncated_left: str | None = None
    truncated_right: str | None = None

    @property
    def mask(self) -> np.ndarray:
        return np.array([s is not None for s in self.solutions])

    @property
    def x0_values(self) -> np.ndarray:
        return np.array(
            [s.x0 if s is not None else np.nan + 1j * np.nan for s in self.solutions]
        )

    @property
    def actions(self) -> np.ndarray:
        return np.array(
            [s.S_f if s is not None else np.nan + 1j * np.nan for s in self.solutions]
        )

    @property
    def covered(self) -> tuple[float, float] | None:
        present = np.flatnonzero(self.mask)
        if present.size == 0:
            return None
        return float(self.xf_grid[present[0]]), float(self.xf_grid[present[-1]])

    def min_abs_im_x0(self) -> float:
        x0 = self.x0_values[self.mask]
        return float(np.abs(x0.imag).min()) if x0.size else np.inf

    def mean_abs_im_x0(self) -> float:
        x0 = self.x0_values[self.mask]
        return float(np.abs(x0.imag).mean()) if x0.size else np.inf


@dataclass
class ScanDiagnostics:
    """Outcome counts for one seed scan."""

    n_seeds: int = 0
    converged: int = 0
    outside_region: int = 0
    failures: dict = field(default_factory=dict)
    newton_iters_max: int = 0


def _newton_batch(prop: BatchPropagator, x0, x_f_target, region, settings):
    """Simultaneous Newton runs from many guesses, one real target per guess.

    ``x_f_target`` may be a scalar or an array matching ``x0``.  Per-guess
    arithmetic is independent of batch composition, so results match
    running each guess alone.  Returns per-seed solved values and a
    Newton status code; failure details land in ``fail_status``.
    """
    x0 = np.array(np.atleast_1d(x0), dtype=np.complex128)
    batch = x0.size
    targets = np.broadcast_to(np.asarray(x_f_target, dtype=np.float64), (batch,)).copy()
    out_x0 = x0.copy()
    out_S = np.zeros(batch, dtype=np.complex128)
    out_M = np.zeros(batch, dtype=np.complex128)
    out_res = np.full(batch, np.inf)
    out_iters = np.zeros(batch, dtype=np.int64)
    code = np.full(batch, NEWTON_RUNNING, dtype=np.int64)
    fail_status = np.zeros(batch, dtype=np.uint8)

    idx = np.arange(batch)
    cur = x0.copy()
    tgt = targets.copy()
    for sweep in range(settings.max_newton_iters):
        if idx.size == 0:
            break
        fb = prop.final_states(cur)
        res = fb.x - tgt
        absres = np.abs(res)

        local = np.full(idx.size, NEWTON_RUNNING, dtype=np.int64)
        traj_failed = ~fb.ok
        local[traj_failed] = NEWTON_TRAJECTORY_FAILED
        converged = (~traj_failed) & (absres < settings.newton_tol)
        local[converged] = NEWTON_OK
        degenerate = (local == NEWTON_RUNNING) & (np.abs(fb.M) < settings.focal_tol)
        local[degenerate] = NEWTON_DEGENERATE

        record = local != NEWTON_RUNNING
        slots = idx[record]
        out_x0[slots] = cur[record]
        out_S[slots] = fb.S[record]
        out_M[slots] = fb.M[record]
        out_res[slots] = absres[record]
        out_iters[slots] = sweep + 1
        code[slots] = local[record]
        fail_status[slots] = fb.status[record]

        running = ~record
        idx = idx[running]
        cur = cur[running] - res[running] / fb.M[running]
        tgt = tgt[running]

        left = ~region.contains(cur, settings.region_margin)
        if np.any(left):
            slots = idx[left]
            out_x0[slots] = cur[left]
            out_iters[slots] = sweep + 1
            code[slots] = NEWTON_LEFT_REGION
            idx = idx[~left]
            cur = cur[~left]
            tgt = tgt[~left]

    if idx.size:
        out_x0[idx] = cur
        out_iters[idx] = settings.max_newton_iters
        code[idx] = NEWTON_NO_CONVERGENCE

    return out_x0, out_S, out_M, out_res, out_iters, code, fail_status


def newton_solve(
    prop: BatchPropagator,
    x0_guess,
    x_f_target: float,
    region: SearchRegion,
    settings: BranchSearchSettings | None = None,
) -> RootSolution:
    """Solve x(t_f; x0) = x_f_target from one guess; raises on failure."""
    settings = settings or BranchSearchSettings()
    x0, S, M, res, iters, code, fail = _newton_batch(
        prop, [x0_guess], x_f_target, region, settings
    )
    c = int(code[0])
    if c == NEWTON_OK:
        return RootSolution(
            x0=complex(x0[0]),
            x_f=float(x_f_target),
            S_f=complex(S[0]),
            M_f=complex(M[0]),
            residual=float(res[0]),
            newton_iters=int(iters[0]),
            focal=bool(abs(M[0]) < settings.focal_tol),
        )
    if c == NEWTON_LEFT_REGION:
        raise LeftRegionError(f"iterate left the search region at {x0[0]}")
    if c == NEWTON_DEGENERATE:
        raise DegenerateJacobianError(f"|M| = {abs(M[0]):.3e} below focal tolerance")
    if c == NEWTON_TRAJECTORY_FAILED:
        raise_for_status(fail[0], x0[0], np.nan, prop.clearance)
    raise NoConvergenceError(
        f"no convergence within {settings.max_newton_iters} iterations "
        f"(last residual {res[0]:.3e})"
    )


def seed_scan(
    prop: BatchPropagator,
    region: SearchRegion,
    x_f_target: float,
    settings: BranchSearchSettings | None = None,
) -> tuple[list[RootSolution], ScanDiagnostics]:
    """Newton from every lattice seed, deduplicated into distinct roots.

    Only roots inside the strict region are kept (the search is
    region-bounded); everything else is tallied in the diagnostics.
    """
    settings = settings or BranchSearchSettings()
    seeds = region.lattice()
    x0, S, M, res, iters, code, fail = _newton_batch(
        prop, seeds, x_f_target, region, settings
    )
    diag = ScanDiagnostics(n_seeds=seeds.size)
    converged = code == NEWTON_OK
    diag.converged = int(converged.sum())
    diag.newton_iters_max = int(iters[converged].max()) if np.any(converged) else 0
    for c, name in _NEWTON_REASONS.items():
        n = int((code == c).sum())
        if n:
            diag.failures[name] = n
    traj_failed = code == NEWTON_TRAJECTORY_FAILED
    if np.any(traj_failed):
        by_status = {}
        for s in fail[traj_failed]:
            key = STATUS_NAMES[int(s)]
            by_status[key] = by_status.get(key, 0) + 1
        diag.failures["trajectory_failed_by_status"] = by_status

    inside = converged & region.contains(x0, margin=0.0)
    diag.outside_region = int((converged & ~inside).sum())

    roots: list[RootSolution] = []
    order = np.lexsort((x0.imag[inside], x0.real[inside]))
    sel = np.flatnonzero(inside)[order]
    for i in sel:
        candidate = complex(x0[i])
        match = None
        for r in roots:
            if abs(r.x0 - candidate) < settings.root_dedup_tol:
                match = r
                break
        if match is not None:
            if res[i] < match.residual:
                match.x0 = candidate
                match.S_f = complex(S[i])
                match.M_f = complex(M[i])
                match.residual = float(res[i])
                match.newton_iters = int(iters[i])
                match.focal = bool(abs(M[i]) < settings.focal_tol)
            continue
        roots.append(
            RootSolution(
                x0=candidate,
                x_f=float(x_f_target),
                S_f=complex(S[i]),
                M_f=complex(M[i]),
                residual=float(res[i]),
                newton_iters=int(iters[i]),
                focal=bool(abs(M[i]) < settings.focal_tol),
            )
        )
    return roots, diag


class _Walker:
    """One continuation front: a branch walked in one grid direction.

    Tolerates up to ``max_gap`` consecutive grid points where Newton
    fails (the loci can dive into the finite-time-blowup set of the
    truncated flow and re-emerge); the predictor always extrapolates from
    the last good solution.  After the first miss the walker probes every
    remaining gap offset in a single batched round and adopts the nearest
    success, which is outcome-identical to stepping through the gap one
    point at a time.
    """

    __slots__ = ("branch", "step", "last_good", "next_try", "probing", "first_reason")

    def __init__(self, branch, step, anchor):
        self.branch = branch
        self.step = step
        self.last_good = anchor
        self.next_try = anchor + step
        self.probing = False
        self.first_reason = None

    def gap_indices(self, n_grid, max_gap):
        """Grid indices of the remaining gap probes, nearest first."""
        out = []
        for off in range(2, max_gap + 2):
            k = self.last_good + self.step * off
            if 0 <= k < n_grid:
                out.append(k)
        return out


def continue_branches(
    prop: BatchPropagator,
    foundings: list[RootSolution],
    xf_grid: np.ndarray,
    region: SearchRegion,
    settings: BranchSearchSettings | None = None,
) -> list[Branch]:
    """Trace each founding root across the x_f grid by warm-started Newton.

    All branches walk the grid in lockstep (left and right of the anchor
    simultaneously) so trajectory propagations batch together.  A walk
    direction ends after ``continuation_max_gap`` consecutive failures
    and records the first failure reason; isolated failures leave gaps.
    """
    settings = settings or BranchSearchSettings()
    xf_grid = np.asarray(xf_grid, dtype=np.float64)
    if xf_grid.ndim != 1 or xf_grid.size < 1:
        raise ValueError("xf_grid must be a non-empty 1-d array")
    if np.any(np.diff(xf_grid) <= 0):
        raise ValueError("xf_grid must be strictly increasing")

    branches = []
    walkers: list[_Walker] = []
    for b, f in enumerate(foundings):
        anchor = int(np.argmin(np.abs(xf_grid - f.x_f)))
        if abs(xf_grid[anchor] - f.x_f) > 1e-12 * max(1.0, abs(f.x_f)):
            raise ValueError("founding root's x_f must be a grid point")
        solutions: list[RootSolution | None] = [None] * xf_grid.size
        solutions[anchor] = f
        br = Branch(
            id=b + 1, seed=f.x0, xf_grid=xf_grid, solutions=solutions, anchor_index=anchor
        )
        branches.append(br)
        walkers.append(_Walker(br, -1, anchor))
        walkers.append(_Walker(br, +1, anchor))

    def finish(w: _Walker):
        reason = w.first_reason or "grid_edge"
        if w.step < 0:
            w.branch.truncated_left = reason
        else:
            w.branch.truncated_right = reason

    def attempt(w: _Walker, k: int, x0, S, M, res, iters):
        """Accept or reject one converged candidate at grid index k."""
        prev = w.branch.solutions[w.last_good]
        dxf = abs(xf_grid[k] - xf_grid[w.last_good])
        expected = dxf * max(1.0 / abs(prev.M_f), 1.0 / max(abs(M), 1e-300))
        if abs(complex(x0) - prev.x0) > settings.continuation_jump_tol * max(
            expected, settings.root_dedup_tol
        ):
            return False
        w.branch.solutions[k] = RootSolution(
            x0=complex(x0),
            x_f=float(xf_grid[k]),
            S_f=complex(S),
            M_f=complex(M),
            residual=float(res),
            newton_iters=int(iters),
            focal=bool(abs(M) < settings.focal_tol),
        )
        return True

    walkers = [w for w in walkers if 0 <= w.next_try < xf_grid.size]
    while walkers:
        guesses = []
        targets = []
        tries = []  # per walker: list of row indices into the batch, nearest first
        for w in walkers:
            prev = w.branch.solutions[w.last_good]
            if w.probing:
                ks = w.gap_indices(xf_grid.size, settings.continuation_max_gap)
            else:
                ks = [w.next_try]
            rows = []
            for k in ks:
                rows.append(len(guesses))
                guesses.append(prev.x0 + (xf_grid[k] - xf_grid[w.last_good]) / prev.M_f)
                targets.append(xf_grid[k])
            tries.append((w, ks, rows))

        x0, S, M, res, iters, code, fail = _newton_batch(
            prop,
            np.array(guesses, dtype=np.complex128),
            np.array(targets),
            region,
            settings,
        )

        survivors: list[_Walker] = []
        for w, ks, rows in tries:
            landed = None
            first_reason = None
            for k, j in zip(ks, rows):
                if code[j] == NEWTON_OK and attempt(w, k, x0[j], S[j], M[j], res[j], iters[j]):
                    landed = k
                    break
                if first_reason is None:
                    first_reason = (
                        "continuity_jump"
                        if code[j] == NEWTON_OK
                        else _NEWTON_REASONS[int(code[j])]
                    )
            if landed is not None:
                w.last_good = landed
                w.next_try = landed + w.step
                w.probing = False
                w.first_reason = None
                if 0 <= w.next_try < xf_grid.size:
                    survivors.append(w)
            elif not w.probing:
                # Single-point miss: probe the rest of the allowed gap at once.
                w.first_reason = first_reason
                w.probing = True
                if w.gap_indices(xf_grid.size, settings.continuation_max_gap):
                    survivors.append(w)
                else:
                    finish(w)
            else:
                finish(w)
        walkers = survivors

    return branches


def merge_duplicate_branches(
    branches: list[Branch], settings: BranchSearchSettings | None = None
) -> list[Branch]:
    """Resolve branches that converged onto the same solutions.

    Continuation fronts from different anchors (or gap hops) can land on
    the same locus.  Wherever two branches hold the same root at the same
    grid point, the lower-id branch keeps it; the other branch is cut
    from the first duplicated point outward and dropped entirely if
    nothing is left.
    """
    settings = settings or BranchSearchSettings()
    for i, keeper in enumerate(branches):
        for loser in branches[i + 1 :]:
            dup = [
                k
                for k in range(len(loser.solutions))
                if keeper.solutions[k] is not None
                and loser.solutions[k] is not None
                and abs(keeper.solutions[k].x0 - loser.solutions[k].x0)
                < settings.root_dedup_tol
            ]
            if not dup:
                continue
            anchor = loser.anchor_index
            right_dups = [k for k in dup if k >= anchor]
            left_dups = [k for k in dup if k < anchor]
            if right_dups:
                cut = min(right_dups)
                for k in range(cut, len(loser.solutions)):
                    loser.solutions[k] = None
                loser.truncated_right = "merged"
            if left_dups:
                cut = max(left_dups)
                for k in range(cut + 1):
                    loser.solutions[k] = None
                loser.truncated_left = "merged"
    return [b for b in branches if b.mask.any()]


def continue_branch(
    prop: BatchPropagator,
    founding: RootSolution,
    xf_grid: np.ndarray,
    region: SearchRegion,
    settings: BranchSearchSettings | None = None,
) -> Branch:
    """Single-branch continuation (see continue_branches)."""
    return continue_branches(prop, [founding], xf_grid, region, settings)[0]


def classify_branches(
    branches: list[Branch],
    settings: BranchSearchSettings | None = None,
    hbar: float = 1.0,
) -> dict[int, str]:
    """Label each branch: real, secondary, negligible, or divergent.

    A branch is real when some solution's starting point lies on the real
    axis within the classification tolerance (the real branch contains
    the trajectory launched from the packet center).  Branches whose
    amplitude exp(-Im S / hbar) never rises above the negligible cutoff,
    or never falls below the divergent cutoff, contribute nothing usable
    to reconstruction and are excluded from the contributing census.
    """
    settings = settings or BranchSearchSettings()
    labels = {}
    for br in branches:
        log_amp = -br.actions.imag[br.mask] / hbar
        if log_amp.size and log_amp.min() > settings.divergent_log_amp:
            labels[br.id] = "divergent"
        elif log_amp.size == 0 or log_amp.max() < settings.negligible_log_amp:
            labels[br.id] = "negligible"
        elif br.min_abs_im_x0() < settings.real_branch_tol:
            labels[br.id] = "real"
        else:
            labels[br.id] = "secondary"
    return labels


def sort_branches(branches: list[Branch]) -> list[Branch]:
    """Canonical branch order: descending imaginary part of the seed, then real part.

    Re-assigns ids 1..n; emitted files and reports follow this order, so
    runs are reproducible regardless of scan scheduling.
    """
    ordered = sorted(branches, key=lambda b: (-b.seed.imag, b.seed.real))
    for i, br in enumerate(ordered):
        br.id = i + 1
    return ordered


def branch_census(
    prop: BatchPropagator,
    region: SearchRegion,
    xf_grid: np.ndarray,
    anchors,
    settings: BranchSearchSettings | None = None,
) -> tuple[list[Branch], dict[int, str], list[ScanDiagnostics]]:
    """Full branch search: scan at each anchor, continue, merge, classify.

    A single anchor cannot see loci that exist only over part of the x_f
    range, so several anchors are scanned (foundings that duplicate an
    already-traced branch are skipped).  Returns canonically ordered
    branches, their labels, and per-anchor scan diagnostics.
    """
    settings = settings or BranchSearchSettings()
    xf_grid = np.asarray(xf_grid, dtype=np.float64)
    anchor_idx = []
    for a in anchors:
        k = int(np.argmin(np.abs(xf_grid - a)))
        if k not in anchor_idx:
            anchor_idx.append(k)

    branches: list[Branch] = []
    scans: list[ScanDiagnostics] = []
    for k in anchor_idx:
        target = float(xf_grid[k])
        roots, diag = seed_scan(prop, region, target, settings)
        scans.append(diag)
        new = []
        for r in roots:
            known = any(
                br.solutions[k] is not None
                and abs(br.solutions[k].x0 - r.x0) < settings.root_dedup_tol
                for br in branches
            )
            if not known:
                new.append(r)
        if new:
            traced = continue_branches(prop, new, xf_grid, region, settings)
            branches = merge_duplicate_branches(branches + traced, settings)

    branches = sort_branches(branches)
    labels = classify_branches(branches, settings, prop.consts.hbar)
    return branches, labels, scans
