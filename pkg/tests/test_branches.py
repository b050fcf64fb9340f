import numpy as np
import pytest

from bomca import FreeParticle, GaussianWavepacket, PhysicalConstants
from bomca.analytic import free_initial_position
from bomca.branches import (
    Branch,
    BranchSearchSettings,
    RootSolution,
    SearchRegion,
    classify_branches,
    continue_branch,
    merge_duplicate_branches,
    newton_solve,
    seed_scan,
    sort_branches,
)
from bomca.errors import DegenerateJacobianError, LeftRegionError, NoConvergenceError
from bomca.integrator import BatchPropagator


@pytest.fixture
def free_setup():
    wp = GaussianWavepacket(alpha=0.5, x_c=-0.5, p_c=1.0)
    consts = PhysicalConstants(m=1.0, hbar=1.0)
    prop = BatchPropagator(wp, FreeParticle(), 1, 1.0, consts)
    region = SearchRegion((-2.2, 0.7), (-1.2, 1.7), 12, 12)
    return wp, consts, prop, region


def test_newton_free_closed_form(free_setup):
    """The free map is linear: one Newton update lands on the exact root."""
    wp, consts, prop, region = free_setup
    settings = BranchSearchSettings()
    root = newton_solve(prop, -0.3 + 0.4j, 0.8, region, settings)
    expected = complex(free_initial_position(0.8, 1.0, wp, consts))
    assert abs(root.x0 - expected) < 1e-9
    assert root.newton_iters <= 3
    assert root.residual < settings.newton_tol


def test_newton_fixed_point(free_setup):
    wp, consts, prop, region = free_setup
    exact = complex(free_initial_position(0.8, 1.0, wp, consts))
    root = newton_solve(prop, exact, 0.8, region, BranchSearchSettings())
    assert root.newton_iters == 1
    assert root.residual < 1e-12


def test_newton_no_convergence(free_setup):
    # one sweep can never confirm a root from a cold start
    wp, consts, prop, region = free_setup
    with pytest.raises(NoConvergenceError):
        newton_solve(prop, -2.0 + 1.5j, 0.8, region, BranchSearchSettings(max_newton_iters=1))


def test_newton_left_region(free_setup):
    wp, consts, prop, _ = free_setup
    far = SearchRegion((-20.0, -19.0), (5.0, 6.0), 4, 4)
    with pytest.raises(LeftRegionError):
        newton_solve(prop, -19.5 + 5.5j, 0.8, far, BranchSearchSettings())


def test_newton_degenerate_guard(free_setup):
    """The focal guard fires whenever |M| falls under the configured tolerance."""
    wp, consts, prop, region = free_setup
    with pytest.raises(DegenerateJacobianError):
        newton_solve(prop, -0.3 + 0.4j, 0.8, region, BranchSearchSettings(focal_tol=10.0))


def test_seed_scan_unique_root(free_setup):
    wp, consts, prop, region = free_setup
    roots, diag = seed_scan(prop, region, 0.8, BranchSearchSettings())
    assert len(roots) == 1
    assert diag.converged == diag.n_seeds
    expected = complex(free_initial_position(0.8, 1.0, wp, consts))
    assert abs(roots[0].x0 - expected) < 1e-9


def test_continuation_free_branch_is_line(free_setup):
    """The free branch locus is an exact straight line in the x0 plane."""
    wp, consts, prop, region = free_setup
    grid = np.linspace(-1.5, 1.5, 61)
    founding = newton_solve(prop, -0.3 + 0.4j, float(grid[30]), region, BranchSearchSettings())
    branch = continue_branch(prop, founding, grid, region, BranchSearchSettings())
    assert branch.mask.all()
    x0 = branch.x0_values
    expected = free_initial_position(grid, 1.0, wp, consts)
    assert np.max(np.abs(x0 - expected)) < 1e-8
    chords = np.diff(x0)
    assert np.max(np.abs(chords - chords[0])) < 1e-7


def test_continuation_single_point_grid(free_setup):
    wp, consts, prop, region = free_setup
    founding = newton_solve(prop, -0.3 + 0.4j, 0.8, region, BranchSearchSettings())
    branch = continue_branch(prop, founding, np.array([0.8]), region, BranchSearchSettings())
    assert branch.mask.tolist() == [True]


def test_continuation_continuity_under_refinement(free_setup):
    """Refining the grid 2x shrinks consecutive x0 steps by about half."""
    wp, consts, prop, region = free_setup
    settings = BranchSearchSettings()
    steps = {}
    for n in (41, 81):
        grid = np.linspace(-1.5, 1.5, n)
        founding = newton_solve(prop, -0.3 + 0.4j, float(grid[n // 2]), region, settings)
        branch = continue_branch(prop, founding, grid, region, settings)
        steps[n] = np.max(np.abs(np.diff(branch.x0_values)))
    assert steps[81] / steps[41] < 0.6


def test_classification_free_secondary(free_setup):
    """Away from the center landing the unique free branch is not real."""
    wp, consts, prop, region = free_setup
    settings = BranchSearchSettings()
    grid = np.linspace(1.2, 1.8, 21)  # excludes the center landing at 0.5
    founding = newton_solve(prop, -0.3 + 0.4j, float(grid[10]), region, settings)
    branch = continue_branch(prop, founding, grid, region, settings)
    labels = classify_branches([branch], settings, consts.hbar)
    assert labels == {branch.id: "secondary"}


def test_classification_empty():
    assert classify_branches([], BranchSearchSettings()) == {}


def test_residual_contract_on_scan(free_setup):
    wp, consts, prop, region = free_setup
    settings = BranchSearchSettings()
    roots, _ = seed_scan(prop, region, 0.3, settings)
    assert all(r.residual < settings.newton_tol for r in roots)


def test_merge_duplicate_branches():
    grid = np.linspace(0.0, 1.0, 5)

    def mk(bid, xs, anchor):
        sols = [
            None if x is None else RootSolution(x0=x, x_f=float(grid[k]), S_f=0j, M_f=1.0 + 0j, residual=0.0, newton_iters=1)
            for k, x in enumerate(xs)
        ]
        return Branch(id=bid, seed=next(x for x in xs if x is not None), xf_grid=grid, solutions=sols, anchor_index=anchor)

    a = mk(1, [0.1 + 0j, 0.2 + 0j, 0.3 + 0j, 0.4 + 0j, 0.5 + 0j], 0)
    b = mk(2, [None, None, 0.3 + 0j, 0.4 + 0j, 0.9 + 0j], 4)  # duplicates a at k=2,3
    merged = merge_duplicate_branches([a, b], BranchSearchSettings())
    assert len(merged) == 2
    keep_b = merged[1]
    assert keep_b.solutions[2] is None and keep_b.solutions[3] is None
    assert keep_b.solutions[4] is not None
    assert keep_b.truncated_left == "merged"


def test_sort_branches_reassigns_ids():
    grid = np.array([0.0])
    sol = RootSolution(x0=0j, x_f=0.0, S_f=0j, M_f=1 + 0j, residual=0.0, newton_iters=1)
    b1 = Branch(id=5, seed=-0.1 - 0.5j, xf_grid=grid, solutions=[sol])
    b2 = Branch(id=9, seed=-0.9 + 0.5j, xf_grid=grid, solutions=[sol])
    out = sort_branches([b1, b2])
    assert [b.seed.imag for b in out] == [0.5, -0.5]
    assert [b.id for b in out] == [1, 2]


def test_region_lattice_and_contains():
    region = SearchRegion((-1.0, 1.0), (-0.5, 0.5), 3, 3)
    lattice = region.lattice()
    assert lattice.size == 9
    assert region.contains(np.array([0.0 + 0.0j]))[0]
    assert not region.contains(np.array([1.6 + 0.0j]))[0]
    assert region.contains(np.array([1.6 + 0.0j]), margin=0.5)[0]


def test_scan_cluster_count_stable_under_density(paper_setup):
    """Doubling the seed lattice leaves the deduplicated root set unchanged."""
    s = paper_setup
    prop = BatchPropagator(
        s["wavepacket"], s["potential"], 1, s["t_f"], s["consts"], clearance=s["clearance"]
    )
    settings = BranchSearchSettings()
    counts = {}
    for n in (12, 24):
        region = SearchRegion((-1.2, -0.2), (-0.3, 0.3), n, n)
        roots, _ = seed_scan(prop, region, -0.5, settings)
        counts[n] = sorted((round(r.x0.real, 4), round(r.x0.imag, 4)) for r in roots)
    assert len(counts[12]) == len(counts[24])
    assert np.allclose(np.array(counts[12]), np.array(counts[24]), atol=1e-3)
