import numpy as np
import pytest
from hypothesis import given, strategies as st

from delay_consensus.errors import DimensionMismatch, StepTooLarge
from delay_consensus.graph import DelayGraph, Edge, laplacian, random_digraph
from delay_consensus.model import AgentSystem, assemble_error_system, build_U_W
from delay_consensus.simulate import (DelayProfile, HistorySpec, constant_profile, make_sinusoidal_profile,
                                      simulate_x, simulate_z, to_error_coordinates)

from conftest import CORRECTED_K, REF_A, REF_B, ref_graph, scalar_toy
from oracles import rk4_ode

ZERO3 = [constant_profile(0.0)] * 3


def test_decoupled_closed_form():
    sys_ = AgentSystem(-np.eye(2), [[1.0], [0.0]], [[0.0, 0.0]])
    x0 = np.array([1.0, -2.0, 0.5, 3.0, -1.0, 0.25])
    tr = simulate_x(sys_, ref_graph(), ZERO3, x0, h=1e-3, T=2.0)
    exact = np.exp(-tr.t)[:, None] * x0
    assert np.max(np.abs(tr.states - exact)) <= 1e-8


def test_zero_delay_matches_plain_ode(ref_fixed, rng):
    sys_, g, _ = ref_fixed
    x0 = rng.normal(size=6)
    tr = simulate_x(sys_, g, ZERO3, x0, h=1e-3, T=3.0)
    M = np.kron(np.eye(3), sys_.A) - np.kron(laplacian(g), sys_.BK)
    ref = rk4_ode(M, x0, 1e-3, 3.0)
    assert np.max(np.abs(tr.states - ref)) <= 1e-10


def test_rk4_order(ref_fixed, rng):
    from scipy.linalg import expm
    sys_, g, _ = ref_fixed
    x0 = rng.normal(size=6)
    M = np.kron(np.eye(3), sys_.A) - np.kron(laplacian(g), sys_.BK)
    exact = expm(M * 2.0) @ x0
    errs = [np.max(np.abs(simulate_x(sys_, g, ZERO3, x0, h=h, T=2.0).states[-1] - exact))
            for h in (0.04, 0.02)]
    ratio = errs[0] / errs[1]
    assert 8 <= ratio <= 32


def test_zero_state_stays_zero(ref_fixed):
    _, _, es = ref_fixed
    pr = [constant_profile(v) for v in (0.05, 0.04, 0.03)]
    tr = simulate_z(es, pr, np.zeros(4), h=1e-3, T=2.0)
    assert not tr.states.any()


def test_scalar_zero_delay_closed_form():
    _, _, es = scalar_toy(bk=0.5, a=-0.3)
    tr = simulate_z(es, [constant_profile(0.0)], [1.5], h=1e-3, T=3.0)
    assert np.max(np.abs(tr.states[:, 0] - 1.5 * np.exp((-0.3 - 0.5) * tr.t))) <= 1e-8


def test_scalar_constant_history_first_interval():
    # on [0, tau] the delayed term is the constant history z0: z' = a z - g z0
    a, g, tau, z0 = -1.0, 2.0, 0.5, 1.0
    _, _, es = scalar_toy(bk=g, a=a)
    tr = simulate_z(es, [constant_profile(tau)], [z0], h=1e-3, T=tau)
    exact = (z0 - g * z0 / a) * np.exp(a * tr.t) + g * z0 / a
    assert np.max(np.abs(tr.states[:, 0] - exact)) <= 1e-10


def _equivalence_dev(sys_, g, rng, profiles, T=10.0):
    es = assemble_error_system(sys_, g)
    x0 = rng.normal(size=g.N * sys_.n)
    tx = simulate_x(sys_, g, profiles, x0, h=1e-3, T=T)
    U, _ = build_U_W(g.N)
    tz = simulate_z(es, profiles, np.kron(U, np.eye(sys_.n)) @ x0, h=1e-3, T=T)
    scale = max(1.0, np.abs(tz.states).max())
    return np.max(np.abs(to_error_coordinates(tx) - tz.states)) / scale


def test_error_coordinates_equivalence(ref_fixed, rng):
    sys_, g, _ = ref_fixed
    pr = [constant_profile(v) for v in rng.uniform(0.02, 0.2, 3)]
    assert _equivalence_dev(sys_, g, rng, pr, T=3.0) <= 1e-6


def test_error_coordinates_equivalence_time_varying(ref_fixed, rng):
    sys_, g, _ = ref_fixed
    pr = [make_sinusoidal_profile(0.1, m, ph) for m, ph in zip((0.7, 0.8, 0.9), (0.0, 1.0, 2.0))]
    assert _equivalence_dev(sys_, g, rng, pr, T=3.0) <= 1e-6


def test_consensus_implies_pairwise_agreement(ref_fixed, rng):
    sys_, g, _ = ref_fixed
    pr = [constant_profile(v) for v in (0.1, 0.05, 0.08)]
    tr = simulate_x(sys_, g, pr, rng.normal(size=6), h=1e-3, T=25.0)
    assert tr.disagreement[-1] < 1e-6
    X = tr.states[-1].reshape(3, 2)
    assert np.max(np.abs(X[:, None, :] - X[None, :, :])) <= 2 * tr.disagreement[-1]


def test_sinusoidal_frequency():
    p = make_sinusoidal_profile(0.29, 0.7)
    assert p.omega == pytest.approx(2 * 0.7 / 0.29)
    assert p.omega == pytest.approx(4.8276, abs=1e-4)


def test_sinusoidal_zero_rate_is_constant():
    p = make_sinusoidal_profile(0.2, 0.0, phase=0.3)
    t = np.linspace(0, 10, 101)
    assert np.allclose(p(t), 0.1 * (1 + np.sin(0.3)))
    assert not np.any(p.rate(t))


@given(st.floats(0.01, 5.0), st.floats(0.0, 0.99), st.floats(-np.pi, np.pi))
def test_sinusoidal_respects_bounds(tau_bar, mu, phase):
    p = make_sinusoidal_profile(tau_bar, mu, phase)
    t = np.linspace(0.0, 100.0, 200001)
    tau = p(t)
    assert tau.max() <= tau_bar + 1e-12 and tau.min() >= -1e-12
    assert np.max(np.abs(np.diff(tau) / np.diff(t))) <= mu + 1e-6


def test_profile_rejects_fast_rate():
    with pytest.raises(ValueError):
        DelayProfile("sinusoidal", tau_bar=1.0, omega=2.0, mu=0.5)
    with pytest.raises(ValueError):
        make_sinusoidal_profile(0.1, 1.0)


def test_step_too_large(ref_fixed):
    sys_, g, _ = ref_fixed
    with pytest.raises(StepTooLarge):
        simulate_x(sys_, g, [constant_profile(0.01)] * 3, np.ones(6), h=5e-3, T=1.0)


def test_zero_delay_edges_bypass_step_check(ref_fixed):
    sys_, g, _ = ref_fixed
    pr = [constant_profile(0.0), constant_profile(0.2), constant_profile(0.0)]
    tr = simulate_x(sys_, g, pr, np.ones(6), h=0.05, T=1.0)
    assert len(tr.t) == 21


def test_dimension_errors(ref_fixed):
    sys_, g, es = ref_fixed
    with pytest.raises(DimensionMismatch):
        simulate_x(sys_, g, ZERO3, np.ones(5), T=0.1)
    with pytest.raises(DimensionMismatch):
        simulate_z(es, ZERO3[:2], np.ones(4), T=0.1)


def test_divergence_truncates():
    _, _, es = scalar_toy(bk=-5.0, a=1.0)  # z' = z + 5 z: explodes
    tr = simulate_z(es, [constant_profile(0.0)], [1.0], h=1e-2, T=100.0)
    assert tr.diverged and tr.t[-1] < 100.0
    assert np.all(np.isfinite(tr.states))


def test_sampled_history():
    # z' = -z(t - 1) with history z(s) = 1 + s: on [0, 1], z' = -s  ->  z = 1 - t^2/2
    _, _, es = scalar_toy(bk=1.0, a=0.0)
    hist = HistorySpec.from_function(lambda s: 1.0 + s, span=1.0, h=1e-3)
    tr = simulate_z(es, [constant_profile(1.0)], [1.0], hist, h=1e-3, T=1.0)
    assert np.max(np.abs(tr.states[:, 0] - (1 - tr.t**2 / 2))) <= 1e-8


def test_csv_header_and_precision(ref_fixed):
    sys_, g, _ = ref_fixed
    tr = simulate_x(sys_, g, ZERO3, np.arange(6.0) / 7, h=0.01, T=0.05)
    text = tr.to_csv()
    lines = text.splitlines()
    assert lines[0] == "t,x_1_1,x_1_2,x_2_1,x_2_2,x_3_1,x_3_2,disagreement"
    assert len(lines) == 7
    assert lines[1].split(",")[2] == f"{1 / 7:.12g}"


def test_csv_is_deterministic(ref_fixed):
    sys_, g, _ = ref_fixed
    pr = [make_sinusoidal_profile(0.1, 0.5)] * 3
    x0 = np.random.default_rng(7).normal(size=6)
    a = simulate_x(sys_, g, pr, x0, h=1e-2, T=1.0).to_csv()
    b = simulate_x(sys_, g, pr, x0, h=1e-2, T=1.0).to_csv()
    assert a == b
