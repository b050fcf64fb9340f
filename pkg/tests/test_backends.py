import math

import numpy as np
import pytest

from bomca import EckartBarrier, FreeParticle, GaussianWavepacket, HarmonicWell, PhysicalConstants
from bomca.core import available_backends, get_backend
from bomca.dynamics import hierarchy_rhs, initial_state
from bomca.integrator import ACTION_IM_LIMIT, BatchPropagator, error_weights, pack_state

BACKENDS = available_backends()

POTENTIALS = [FreeParticle(), HarmonicWell(k=30.0), EckartBarrier(D=40.0, beta=4.32)]


@pytest.fixture
def packet():
    return GaussianWavepacket(alpha=30 * math.pi, x_c=-0.7, p_c=math.sqrt(300.0))


@pytest.fixture
def consts():
    return PhysicalConstants(m=30.0, hbar=1.0)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("potential", POTENTIALS, ids=lambda p: p.kind)
@pytest.mark.parametrize("n_trunc", [1, 2, 4])
def test_kernel_rhs_matches_reference(backend, potential, n_trunc, packet, consts):
    """Both kernels reproduce the scalar equations of motion exactly."""
    kern = get_backend(backend)
    rng = np.random.default_rng(hash((backend, potential.kind, n_trunc)) % 2**32)
    for _ in range(5):
        x0 = complex(rng.uniform(-1, 1), rng.uniform(-0.25, 0.25))
        st = initial_state(packet, x0, n_trunc, consts)
        st.v[1:] = rng.normal(size=n_trunc) + 1j * rng.normal(size=n_trunc)
        st.M = complex(rng.normal(), rng.normal())
        dx, dv, dS, dM = hierarchy_rhs(st, potential, consts, clearance=1e-12)
        p1, p2 = potential.kernel_params
        dy = kern.rhs_single(pack_state(st), potential.kernel_code, p1, p2, n_trunc, consts.m, consts.hbar)
        ref = np.concatenate([[dx], dv, [dS, dM]])
        assert np.allclose(dy, ref, rtol=1e-13, atol=1e-13)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernel not built")
def test_backends_agree_on_trajectories(packet, consts):
    """Same step sequences and near-identical endpoints across kernels."""
    pot = EckartBarrier(D=40.0, beta=4.32)
    prop = BatchPropagator(packet, pot, 2, 0.995, consts, clearance=0.004)
    x0 = np.array([-0.7 + 0.0j, -0.65 - 0.08j, -0.73 - 0.17j, -0.45 + 0.2j, -0.33 + 0.01j])
    y0 = prop.initial_batch(x0)
    w = error_weights(packet.alpha, 2, consts.hbar)
    args = (0.0, 0.995, pot.kernel_code, 40.0, 4.32, 2, consts.m, consts.hbar,
            1e-9, 1e-11, 1e-4, 1e-12, 0.995 / 100, 10**6, w, 0.004, ACTION_IM_LIMIT)
    results = {b: get_backend(b).propagate_final_batch(y0.copy(), *args) for b in BACKENDS}
    ref = results["python"]
    other = results["native"]
    assert np.array_equal(ref[1], other[1])          # statuses
    assert np.array_equal(ref[2], other[2])          # accepted step counts
    assert np.array_equal(ref[3], other[3])          # rejected step counts
    ok = ref[1] == 0
    scale = np.abs(ref[0][ok]).max()
    assert np.max(np.abs(ref[0][ok] - other[0][ok])) < 1e-9 * scale


@pytest.mark.parametrize("backend", BACKENDS)
def test_kernel_input_validation(backend, packet, consts):
    kern = get_backend(backend)
    w = error_weights(packet.alpha, 1, consts.hbar)
    y0 = np.zeros((2, 5), dtype=np.complex128)
    with pytest.raises(ValueError):
        kern.propagate_final_batch(y0, 0.0, -1.0, 0, 0.0, 0.0, 1, consts.m, consts.hbar,
                                   1e-9, 1e-11, 1e-4, 1e-12, 0.01, 100, w, 0.02, ACTION_IM_LIMIT)
    with pytest.raises(ValueError):
        kern.propagate_final_batch(np.zeros((2, 4), np.complex128), 0.0, 1.0, 0, 0.0, 0.0, 1,
                                   consts.m, consts.hbar, 1e-9, 1e-11, 1e-4, 1e-12, 0.01, 100,
                                   w, 0.02, ACTION_IM_LIMIT)


def test_empty_batch(consts, packet):
    prop = BatchPropagator(packet, FreeParticle(), 1, 1.0, consts)
    fb = prop.final_states(np.empty(0, dtype=np.complex128))
    assert fb.x.size == 0


def test_threaded_batches_deterministic(packet, consts):
    """Thread count must not change any result bit."""
    pot = EckartBarrier(D=40.0, beta=4.32)
    x0 = np.linspace(-1.0, -0.3, 64) + 0.05j
    one = BatchPropagator(packet, pot, 1, 0.995, consts, clearance=0.004, threads=1).final_states(x0)
    four = BatchPropagator(packet, pot, 1, 0.995, consts, clearance=0.004, threads=4).final_states(x0)
    assert np.array_equal(one.y, four.y)
    assert np.array_equal(one.status, four.status)
