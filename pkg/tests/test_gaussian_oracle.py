import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slesim.errors import WidthCollapse
from slesim.gaussian_oracle import (GaussianState, circle_invariant, coherent_weights,
                                    derivatives, integrate, pinney_residual, render, width)
from slesim.lattice import inner_product
from slesim.noise import NoiseSpec, kernel_from_spectrum, sample_stream
from slesim.propagator import SLEStepConfig, evolve
from slesim.spectrum import harmonic_eigenstate_analytic

DT = 0.01


def test_fixed_point():
    d = derivatives(GaussianState(0.5j, 0.0, 0.0), A=0.7, F_t=0.0)
    assert d.alpha == 0 and d.x_cl == 0 and d.p_cl == 0
    assert d.gamma != 0


def test_derivative_examples():
    assert derivatives(GaussianState(1j), 0.0, 0.0).alpha == pytest.approx(1.5)
    d = derivatives(GaussianState(0.5j), 0.0, 1.0)
    assert d.p_cl == 1.0 and d.x_cl == 0.0
    with pytest.raises(WidthCollapse):
        derivatives(GaussianState(-0.1j), 0.0, 0.0)


@given(ar=st.floats(-2, 2), ai=st.floats(0.05, 3), A=st.floats(0, 2))
def test_derivative_matches_complex_form(ar, ai, A):
    a = complex(ar, ai)
    d = derivatives(GaussianState(a), A, 0.0)
    assert d.alpha == pytest.approx(-2 * a * a - A * ar - 0.5, abs=1e-12)
    assert d.gamma.imag == pytest.approx(ar, abs=1e-15)


def test_circle_invariant_conserved():
    # alpha revolves with period pi
    run = integrate(GaussianState(2j), None, math.pi / 314, n_steps=314)
    r = circle_invariant(2 * run.alpha)
    assert np.ptp(r) < 1e-6
    assert abs(run.alpha[-1] - 2j) < 1e-6


def test_spiral_damps_invariant():
    run = integrate(GaussianState(2j), None, DT, n_steps=8000, A=0.25)
    r = circle_invariant(2 * run.alpha)
    assert np.all(np.diff(r) <= 1e-12)
    assert abs(2 * run.alpha[-1] - 1j) < 1e-3


@pytest.mark.parametrize("A", [0.5, 0.1])
def test_asymptotic_width(A):
    run = integrate(GaussianState(1j, 1.0), None, DT, n_steps=int(20 / A / DT), A=A)
    assert abs(run.alpha[-1].imag - 0.5) < 1e-4


def test_damped_oscillator_zero_crossing():
    A = 0.5
    run = integrate(GaussianState(0.5j, 1.0, 0.0), None, DT, n_steps=400, A=A)
    w = math.sqrt(1 - A * A / 4)
    t_exact = (math.pi - math.atan(2 * w / A)) / w
    x = run.x_cl
    k = int(np.flatnonzero(np.diff(np.sign(x)))[0])
    t_zero = run.times[k] - x[k] * DT / (x[k + 1] - x[k])
    assert t_zero == pytest.approx(t_exact, abs=1e-4)


def test_norm_consistency_of_gamma():
    # |psi|^2 integrates to sqrt(pi / (2 Im a)) exp(-2 Im g); that product must stay fixed
    run = integrate(GaussianState(1j, 1.0, 0.3), np.full(500, 0.4), DT, A=0.3)
    g = run.trajectory[:, 5]
    log_norm = -2 * g - 0.5 * np.log(run.trajectory[:, 1])
    assert np.ptp(log_norm) < 1e-8


def test_integrate_input_checks():
    with pytest.raises(ValueError):
        integrate(GaussianState(), None, DT)
    with pytest.raises(ValueError):
        integrate(GaussianState(), np.zeros(3), DT, n_steps=5)


def test_render_ground_state(grid):
    psi = render(GaussianState(0.5j), grid)
    ref = harmonic_eigenstate_analytic(0, grid)
    np.testing.assert_allclose(psi.amps, ref.amps, atol=1e-10)


def test_render_peak_position(grid):
    psi = render(GaussianState(0.5j, 1.0, 0.4), grid)
    assert grid.x[np.argmax(psi.density)] == pytest.approx(1.0)


def test_coherent_weights_examples():
    np.testing.assert_array_equal(coherent_weights(0, 0, 4), [1, 0, 0, 0, 0])
    n = np.arange(8)
    fact = np.array([math.factorial(k) for k in n])
    np.testing.assert_allclose(coherent_weights(math.sqrt(2), 0, 7), math.exp(-1) / fact, rtol=1e-12)
    lam = 0.5 * 2.0**2 + 0.5 * 1.5**2
    n_max = int(lam + 10 * math.sqrt(lam) + 20)
    assert coherent_weights(2.0, 1.5, n_max).sum() > 1 - 1e-10


@pytest.mark.parametrize("x_cl, p_cl", [(1.0, 0.0), (0.5, -1.2)])
def test_coherent_weights_vs_projection(grid, x_cl, p_cl):
    psi = render(GaussianState(0.5j, x_cl, p_cl), grid)
    proj = [abs(inner_product(harmonic_eigenstate_analytic(n, grid), psi)) ** 2 for n in range(10)]
    np.testing.assert_allclose(coherent_weights(x_cl, p_cl, 9), proj, atol=1e-6)


def test_pinney_fixed_point():
    run = integrate(GaussianState(0.5j), None, DT, n_steps=50, A=0.3)
    assert np.max(np.abs(pinney_residual(run))) < 1e-12


@pytest.mark.parametrize("A", [0.0, 0.25])
def test_pinney_residual_second_order(A):
    res = []
    for k in range(3):
        dt = 0.02 / 2**k
        run = integrate(GaussianState(2j), None, dt, n_steps=int(round(3.0 / dt)), A=A)
        res.append(np.max(np.abs(pinney_residual(run))))
    ratios = np.array(res[:-1]) / np.array(res[1:])
    np.testing.assert_allclose(ratios, 4.0, rtol=0.1)


def test_pinney_needs_three_samples():
    with pytest.raises(ValueError):
        pinney_residual(integrate(GaussianState(), None, DT, n_steps=1))


def test_width_definition():
    assert width(0.5j) == pytest.approx(1 / math.sqrt(2))


@pytest.mark.parametrize("A, T", [(0.5, 1.0), (0.1, 0.5)])
def test_pde_matches_oracle_under_noise(grid, A, T):
    spec = NoiseSpec("white", A, T, E0=0.5)
    forces = sample_stream(kernel_from_spectrum(spec, DT), 1000, 2024).forces
    init = GaussianState(1j, 1.0, 0.0)
    run = integrate(init, forces, DT, A=A)
    traj = evolve(render(init, grid), SLEStepConfig(dt=DT, A=A), forces)
    fid = abs(inner_product(render(run.state(1000), grid), traj.final)) ** 2
    assert fid > 0.999


def test_csv_export(tmp_path):
    run = integrate(GaussianState(1j), None, DT, n_steps=3)
    path = tmp_path / "o.csv"
    run.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,re_alpha,im_alpha,x_cl,p_cl" and len(lines) == 5
