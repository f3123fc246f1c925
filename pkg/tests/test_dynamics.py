import math
import warnings

import numpy as np
import pytest

from irrtorus.dynamics import (DEFAULT_CASCADE, SimulationConfig, WindowWarning, activation_time, closure, gauge,
                               integrate_condensed, integrate_full, integrate_resonant, random_initial_data,
                               resolve_t_final, support_confinement_report, taylor_derivatives, term_list,
                               theorem_pipeline, three_step_cascade_demo, validate_cascade)
from irrtorus.lattice import ModeField, TorusSpec, random_field, sobolev_norm
from irrtorus.spectral import DealiasingError

RECT_TRIPLE = [(1, 1), (-1, 1), (0, 0)]


def cfg(spec, M=0, N=1, L=2, **kw):
    kw.setdefault("t_final", 1.0)
    kw.setdefault("n_output", 21)
    return SimulationConfig(spec, N, L, M, **kw)


@pytest.mark.parametrize("M,N,L", [(1, 3, 4), (1, 4, 4), (0, 2, 1)])
def test_config_rejects_bad_boxes(irrational, M, N, L):
    with pytest.raises(ValueError):
        SimulationConfig(irrational, N, L, M)


@pytest.mark.parametrize("field,value", [("epsilon", 0.0), ("s", 1.0), ("t_final", -1.0)])
def test_config_rejects_bad_scalars(irrational, field, value):
    with pytest.raises(ValueError):
        SimulationConfig(irrational, 4, 8, 1, **{field: value})


def test_zero_data_stays_zero(irrational):
    c = cfg(irrational)
    zero = ModeField.zeros(2)
    for traj in (integrate_resonant(c, zero), integrate_condensed(c, zero), integrate_full(c, zero)):
        assert not np.any(traj.values)
    rep = support_confinement_report(integrate_resonant(c, zero), 0, 1)
    assert rep["max_outside"] == 0.0


@pytest.mark.parametrize("k", [(0, 0), (1, -1)])
def test_single_mode_closed_form(irrational, k):
    a = 0.3 - 0.4j
    c = cfg(irrational, M=0 if k == (0, 0) else 1, N=1 if k == (0, 0) else 4, L=2 if k == (0, 0) else 5,
            t_final=3.0, window_constant=10.0)
    u0 = ModeField.from_modes(c.L, {k: a})
    u = integrate_resonant(c, u0)
    exact = a * np.exp(-1j * abs(a) ** 2 * u.times)
    assert np.allclose(u.values[:, c.L.flat_index(k)], exact, atol=1e-9)
    v = integrate_condensed(c, u0)
    assert np.allclose(v.amplitude(k), abs(a), atol=1e-9)


def test_gauge_equivalence(irrational):
    c = cfg(irrational, M=1, N=4, L=5, t_final=20.0, epsilon=0.2)
    worst = 0.0
    for seed in range(10):
        u0 = random_initial_data(c.with_(seed=seed))
        u = integrate_resonant(c, u0)
        v = integrate_condensed(c, u0)
        worst = max(worst, np.abs(gauge(irrational, c.L, v.times, v.values) - u.values).max())
    assert worst < 10 * c.dt_controls


def test_resonant_conservation(irrational):
    c = cfg(irrational, M=1, N=4, L=5, t_final=25.0, epsilon=0.2)
    u = integrate_resonant(c, random_initial_data(c), include_weak=False)
    mass = u.conserved["mass"]
    mom = u.conserved["momentum"]
    assert np.abs(mass - mass[0]).max() / mass[0] < 1e-8
    assert np.abs(mom - mom[0]).max() < 1e-8 * mass[0]


def test_taylor_first_order_single_mode(irrational):
    a = 0.5 + 0.2j
    c = cfg(irrational, M=1, N=4, L=5)
    D = taylor_derivatives(c, ModeField.from_modes(5, {(1, 0): a}), 2)
    assert D[(1, 0), 0] == a
    assert D[(1, 0), 1] == pytest.approx(-1j * abs(a) ** 2 * a, abs=1e-15)
    assert D[(1, 0), 2] == pytest.approx(-abs(a) ** 4 * a, abs=1e-15)


def test_taylor_rational_rectangle_entry(square):
    c = cfg(square, M=1, N=4, L=5)
    D = taylor_derivatives(c, ModeField.from_modes(5, {k: 1.0 for k in RECT_TRIPLE}), 1)
    assert D[(0, 2), 1] == -2j


def test_taylor_exact_zero_outside_support(irrational):
    c = cfg(irrational, M=1, N=4, L=5)
    D = taylor_derivatives(c, random_initial_data(c.with_(epsilon=1.0)), 6)
    outside = np.abs(c.L.coords()).max(axis=1) > 1
    assert np.count_nonzero(D.entries[:, outside]) == 0
    assert np.count_nonzero(D.entries[:, ~outside]) > 0


def test_taylor_cap(irrational):
    with pytest.raises(ValueError):
        taylor_derivatives(cfg(irrational), ModeField.zeros(2), 11)


def test_taylor_consistency_by_halving(irrational):
    c = cfg(irrational, M=1, N=4, L=5, dt_controls=1e-13, n_output=2)
    u0 = random_initial_data(c.with_(epsilon=0.5))
    n_max = 3
    D = taylor_derivatives(c, u0, n_max)
    errs = []
    for t in (0.2, 0.1):
        u = integrate_resonant(c.with_(t_final=t), u0)
        errs.append(np.abs(u.values[-1] - D.taylor(t)).max())
    order = math.log2(errs[0] / errs[1])
    assert order == pytest.approx(n_max + 1, abs=0.5)


def test_taylor_factorial_bound(irrational):
    c = cfg(irrational, M=1, N=4, L=5)
    D = taylor_derivatives(c, random_initial_data(c.with_(epsilon=1.0)), 8)
    k = np.abs(D.entries).max(axis=1)
    roots = [(k[n] / math.factorial(n)) ** (1 / n) for n in range(1, 9)]
    assert max(roots) < 10 * roots[0]


def test_irrational_confinement(irrational):
    c = cfg(irrational, M=1, N=4, L=6, t_final=100.0, epsilon=0.1)
    rep = support_confinement_report(integrate_resonant(c, random_initial_data(c)), 1, 4)
    assert rep["max_outside"] < 1e-9


def test_rational_annulus_slope(square):
    c = cfg(square, M=1, N=4, L=5, t_final=1e-2, n_output=11, dt_controls=1e-12)
    u0 = ModeField.from_modes(5, {k: 1.0 for k in RECT_TRIPLE})
    u = integrate_resonant(c, u0)
    slope = abs(taylor_derivatives(c, u0, 1)[(0, 2), 1])
    amp = u.amplitude((0, 2))[1:]
    assert np.allclose(amp, slope * u.times[1:], rtol=0.1)
    rep = support_confinement_report(u, 1, 4)
    assert rep["annulus"][-1] > 0 and rep["exterior"].max() == 0.0


def test_window_flag(irrational):
    c = cfg(irrational, M=1, N=4, L=5, t_final=None, epsilon=0.05, window_constant=1.0)
    u0 = random_initial_data(c)
    t, bound = resolve_t_final(c, u0)
    assert bound in {"epsilon", "window"}
    assert t == pytest.approx(min(1 / 0.05 ** 2, 1 / sobolev_norm(u0, c.s) ** 2))
    big = c.with_(t_final=10 * t, n_output=3)
    with pytest.warns(WindowWarning):
        u = integrate_resonant(big, u0)
    assert u.window_exceeded


def test_full_system_conservation(irrational):
    c = cfg(irrational, M=1, N=4, L=5, t_final=5.0, epsilon=0.3, split_step=0.01)
    traj = integrate_full(c, random_initial_data(c))
    for key, tol in (("mass", 1e-8), ("hamiltonian", 1e-6)):
        rec = traj.conserved[key]
        assert np.abs(rec - rec[0]).max() / abs(rec[0]) < tol
    assert np.abs(traj.conserved["momentum"] - traj.conserved["momentum"][0]).max() < 1e-10


def test_full_methods_agree(irrational):
    c = cfg(irrational, M=1, N=4, L=5, t_final=2.0, epsilon=0.3, split_step=0.002)
    psi0 = random_initial_data(c)
    a = integrate_full(c, psi0, "split-step")
    b = integrate_full(c, psi0, "lawson")
    assert np.abs(a.values - b.values).max() < 1e-6


def test_full_refuses_aliasing_grid(irrational):
    c = cfg(irrational, M=1, N=4, L=5)
    with pytest.raises(DealiasingError):
        integrate_full(c, ModeField.zeros(5), grid=10)


def test_full_unknown_method(irrational):
    with pytest.raises(ValueError):
        integrate_full(cfg(irrational), ModeField.zeros(2), "euler")


def test_full_truncation_consistency(irrational):
    c = cfg(irrational, M=1, N=4, L=5, t_final=5.0, epsilon=0.02)
    psi0 = random_initial_data(c)
    a = integrate_full(c, psi0, "lawson")
    c2 = c.with_(L=10)
    b = integrate_full(c2, psi0.embed(c2.L), "lawson")
    na = [sobolev_norm(s, c.s) for s in a.states]
    nb = [sobolev_norm(s, c.s) for s in b.states]
    assert np.abs(np.subtract(na, nb)).max() < 1e-6


def test_cascade_instance_is_valid(square):
    assert validate_cascade(DEFAULT_CASCADE, 5, square) == []


def test_cascade_order(square):
    rep = three_step_cascade_demo(5)
    act = rep["activation_times"]
    assert rep["order_ok"]
    assert act["Q2"] < act["Q4"] and act["Q3"] < act["Q4"]


def test_cascade_irrational_silent(irrational):
    rep = three_step_cascade_demo(5, irrational)
    assert all(v is None for v in rep["activation_times"].values())
    assert max(rep["peak_amplitudes"].values()) < 1e-9


def test_cascade_needs_q1(square):
    rep = three_step_cascade_demo(5, square, populate_q1=False)
    assert rep["activation_times"]["Q4"] is None


def test_closure_of_support_is_closed(irrational):
    t = term_list(irrational, 4, 5, 1.0)
    c = cfg(irrational, M=1, N=4, L=5)
    seeds = [c.L.flat_index(k) for k in [(1, 0), (0, 1), (-1, -1)]]
    live = closure(t, seeds, c.L.size)
    assert np.abs(c.L.coords()[live]).max() <= 1


def test_activation_time_interpolates(square):
    c = cfg(square, M=1, N=4, L=5, t_final=1e-2, n_output=11)
    u = integrate_resonant(c, ModeField.from_modes(5, {k: 1.0 for k in RECT_TRIPLE}))
    t = activation_time(u, (0, 2), 1e-3)
    assert t == pytest.approx(1e-3 / 2, rel=0.05)
    assert activation_time(u, (5, 5), 1e-3) is None


@pytest.mark.parametrize("kw,gamma", [({}, 3.0), ({"epsilon": 1.0}, 2.5)])
def test_pipeline_preconditions(irrational, kw, gamma):
    with pytest.raises(ValueError):
        theorem_pipeline(SimulationConfig(irrational, 4, 8, 1, **kw), gamma)


def test_pipeline_rejects_rational(square):
    with pytest.raises(ValueError):
        theorem_pipeline(SimulationConfig(square, 4, 8, 1), 2.5)


def test_pipeline_small_run(irrational):
    c = SimulationConfig(irrational, 4, 5, 1, epsilon=0.05, t_final=20.0, n_output=21)
    out = theorem_pipeline(c, 2.5, n_pullback=5)
    rep = out["report"]
    assert rep["pass"] and rep["margin"] > 1
    assert rep["sup_v_outside"] < 1e-12
    assert rep["duhamel_ratio"] < 1.0
    assert rep["mass_drift"] < 1e-8
