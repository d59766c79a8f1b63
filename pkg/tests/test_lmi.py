import numpy as np
import pytest
from hypothesis import given, strategies as st

from delay_consensus.errors import DimensionMismatch
from delay_consensus.lmi import (VariableLayout, VariableValues, assemble_full_lmi, build_gamma, build_pi,
                                 build_xi, full_lmi, layout_for, schur_reduced)

from conftest import REF_MU, scalar_toy

REF_TAU = (0.29, 0.18, 0.18)


def random_pd_values(rng, layout, lo=0.1):
    def pd():
        G = rng.normal(size=(layout.n, layout.n))
        return G @ G.T + lo * np.eye(layout.n)
    return VariableValues(P=pd(), Q=[pd() for _ in range(layout.r)], R=[pd() for _ in range(layout.r)],
                          S={p: pd() for p in layout.pairs})


def scalar_oracle(a, g, lbar, sigma, p, q, rho, tau, mu):
    """Hand-written 4x4 LMI for n=1, N=2, r=1."""
    Pi = np.array([[2 * a * p + q - rho, rho + sigma * p * g * lbar, 0.0],
                   [rho + sigma * p * g * lbar, -(1 - mu) * q - 2 * rho, rho],
                   [0.0, rho, -rho]])
    xi = np.array([a, sigma * lbar * g, 0.0])
    G = tau ** 2 * rho
    M = np.zeros((4, 4))
    M[:3, :3] = Pi
    M[:3, 3] = M[3, :3] = xi * G
    M[3, 3] = -G
    return M


def test_ref_dimensions(ref):
    _, _, es = ref
    lay = layout_for(es)
    assert lay.size == 30 and lay.block_dim == 32
    assert lay.names == ["P", "Q1", "Q2", "Q3", "R1", "R2", "R3", "S1_2", "S1_3", "S2_3"]
    m = assemble_full_lmi(es, lay, REF_TAU, REF_MU)
    assert m.d == 32 and m.coeffs.shape == (30, 32, 32)
    assert not m.M0.any()
    Pi = build_pi(es, lay, REF_TAU, REF_MU, VariableValues.identity(lay))
    assert Pi.shape == (28, 28)


def test_scalar_dimensions(toy):
    _, _, es = toy
    lay = layout_for(es)
    assert (lay.size, lay.block_dim) == (3, 4)


@given(st.integers(1, 4), st.integers(1, 4))
def test_variable_count_formula(n, r):
    lay = VariableLayout(n=n, r=r, N=3)
    assert lay.size == (1 + 2 * r + r * (r - 1) // 2) * n * (n + 1) // 2
    assert lay.block_dim == (2 * r + 2) * 2 * n


@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_pack_unpack_round_trip(n, r, seed):
    lay = VariableLayout(n=n, r=r)
    v = np.random.default_rng(seed).normal(size=lay.size)
    mats = lay.unpack(v)
    assert all(np.array_equal(m, m.T) for m in mats)
    assert np.array_equal(lay.pack(mats), v)
    assert np.array_equal(VariableValues.from_vector(lay, v).to_vector(lay), v)


def test_trace_vector():
    lay = VariableLayout(n=3, r=1)
    v = np.arange(lay.size, dtype=float)
    assert lay.trace_vector() @ v == pytest.approx(np.trace(lay.unpack(v)[0]))


@pytest.mark.parametrize("p,q,rho,tau,mu", [(1.0, 0.5, 2.0, 0.3, 0.0), (2.0, 1.0, 0.1, 1.5, 0.4),
                                           (0.3, 3.0, 7.0, 0.01, 0.9)])
def test_scalar_matches_hand_oracle(p, q, rho, tau, mu):
    a, g = -1.0, 1.7
    _, _, es = scalar_toy(bk=g, a=a)
    lay = layout_for(es)
    vals = VariableValues(P=np.array([[p]]), Q=[np.array([[q]])], R=[np.array([[rho]])])
    M = assemble_full_lmi(es, lay, [tau], [mu]).at(vals)
    assert np.allclose(M, scalar_oracle(a, g, 1.0, -1, p, q, rho, tau, mu), atol=1e-14)
    xi = build_xi(es)
    assert np.allclose(xi, [[a, -g, 0.0]])


def test_gamma_ref_identity(ref):
    _, _, es = ref
    lay = layout_for(es)
    c = 0.29**2 + 0.18**2 + 0.18**2 + (0.11**2 + 0.11**2 + 0.0)
    G = build_gamma(lay, REF_TAU, VariableValues.identity(lay))
    assert np.allclose(G, c * np.eye(4), atol=1e-15)


def test_gamma_equal_bounds_drop_S(ref, rng):
    _, _, es = ref
    lay = layout_for(es)
    vals = random_pd_values(rng, lay)
    G = build_gamma(lay, [0.2] * 3, vals)
    assert np.allclose(G, np.kron(np.eye(2), 0.04 * sum(vals.R)))


def test_xi_ref_structure(ref):
    _, _, es = ref
    xi = build_xi(es)
    assert xi.shape == (4, 28)
    assert np.array_equal(xi[:, :4], np.kron(np.eye(2), es.A))
    for k in range(3):
        assert np.array_equal(xi[:, (2 * k + 1) * 4:(2 * k + 2) * 4], -np.kron(es.Lbar[k], es.BK))
        assert not xi[:, (2 * k + 2) * 4:(2 * k + 3) * 4].any()


def test_xi_zero_gain():
    _, _, es = scalar_toy(bk=0.0)
    assert np.array_equal(build_xi(es), [[-1.0, 0.0, 0.0]])


def test_pi_block_pattern(ref, rng):
    _, _, es = ref
    lay = layout_for(es)
    v = random_pd_values(rng, lay)
    Pi = build_pi(es, lay, REF_TAU, REF_MU, v)
    I = np.eye(2)
    blk = lambda i, j: Pi[4 * i:4 * i + 4, 4 * j:4 * j + 4]
    assert np.allclose(blk(0, 0), np.kron(I, es.A.T @ v.P + v.P @ es.A + sum(v.Q) - sum(v.R)))
    assert np.allclose(blk(0, 3), np.kron(I, v.R[1]) - np.kron(es.Lbar[1], v.P @ es.BK))
    assert np.allclose(blk(3, 3), np.kron(I, -(1 - 0.8) * v.Q[1] - 2 * v.R[1] - v.S[(1, 2)] - v.S[(2, 3)]))
    assert np.allclose(blk(1, 5), np.kron(I, v.S[(1, 3)]))
    assert np.allclose(blk(5, 6), np.kron(I, v.R[2]))
    assert np.allclose(blk(6, 6), -np.kron(I, v.R[2]))
    assert not blk(0, 2).any() and not blk(2, 4).any()
    assert np.array_equal(Pi, Pi.T)


def test_schur_without_gamma_is_pi(ref, rng):
    _, _, es = ref
    lay = layout_for(es)
    v = random_pd_values(rng, lay)
    v = VariableValues(P=v.P, Q=v.Q, R=[0 * x for x in v.R], S={p: 0 * s for p, s in v.S.items()})
    assert np.allclose(schur_reduced(es, lay, REF_TAU, REF_MU, v), build_pi(es, lay, REF_TAU, REF_MU, v))


def test_scalar_schur_by_hand():
    _, _, es = scalar_toy(bk=1.0)
    lay = layout_for(es)
    p, q, rho, tau, mu = 1.0, 0.4, 0.8, 0.5, 0.1
    vals = VariableValues(P=np.array([[p]]), Q=[np.array([[q]])], R=[np.array([[rho]])])
    xi = np.array([-1.0, -1.0, 0.0])
    expect = scalar_oracle(-1, 1, 1, -1, p, q, rho, tau, mu)[:3, :3] + tau**2 * rho * np.outer(xi, xi)
    assert np.allclose(schur_reduced(es, lay, [tau], [mu], vals), expect)


def test_schur_equivalence_random(ref_fixed, rng):
    _, _, es = ref_fixed
    lay = layout_for(es)
    agree = 0
    for i in range(50):
        v = random_pd_values(rng, lay).scaled(1.0)
        tau = rng.uniform(0.01, 0.4, 3)
        full = np.linalg.eigvalsh(full_lmi(es, lay, tau, REF_MU, v))[-1]
        red = np.linalg.eigvalsh(schur_reduced(es, lay, tau, REF_MU, v))[-1]
        assert (full < 0) == (red < 0)
        agree += 1
    assert agree == 50


@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 10))
def test_affine_symmetric_homogeneous(seed, alpha, beta, c):
    _, _, es = scalar_toy(bk=2.0)
    es_map = assemble_full_lmi(es, layout_for(es), [0.7], [0.3])
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=3), rng.normal(size=3)
    Mu, Mv = es_map(u), es_map(v)
    assert np.allclose(es_map(alpha * u + beta * v), alpha * Mu + beta * Mv + (1 - alpha - beta) * es_map.M0,
                       atol=1e-9)
    assert np.allclose(es_map(c * u), c * Mu, atol=1e-9)
    assert np.abs(Mu - Mu.T).max() <= 1e-10


def test_affine_map_matches_direct_evaluation(ref, rng):
    _, _, es = ref
    lay = layout_for(es)
    m = assemble_full_lmi(es, lay, REF_TAU, REF_MU)
    v = random_pd_values(rng, lay)
    assert np.allclose(m.at(v), full_lmi(es, lay, REF_TAU, REF_MU, v), atol=1e-12)


def test_bound_checks(ref):
    _, _, es = ref
    lay = layout_for(es)
    with pytest.raises(DimensionMismatch):
        assemble_full_lmi(es, lay, [0.1, 0.1], REF_MU)
    with pytest.raises(ValueError):
        assemble_full_lmi(es, lay, REF_TAU, [0.7, 0.8, 1.0])
    with pytest.raises(DimensionMismatch):
        VariableValues(P=np.eye(2), Q=[np.eye(2)], R=[np.eye(2)]).check(lay)
