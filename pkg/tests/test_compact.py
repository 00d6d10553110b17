import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import least_squares

from conftest import bump
from linescatter import ContractViolation, NumericalDegeneracy, PotentialGrid, ScatteringData, TransferMatrix
from linescatter.compact import (W_from_AB, cell_averages, delta_trace, dirichlet_eigenvalues,
                                 fundamental_pair_direct, m_function, m_trace, recover_potential,
                                 reconstruct_W_at_S, relative_l2_error, v_solution, zero_count)
from linescatter.forward import scattering_AB, scattering_data


@st.composite
def det_one(draw):
    a = draw(st.floats(0.4, 2.5) | st.floats(-2.5, -0.4))
    b, c = draw(st.floats(-1.5, 1.5)), draw(st.floats(-1.5, 1.5))
    return TransferMatrix(a, b, c, (1 + b * c) / a)


@st.composite
def cells(draw, n=4):
    return PotentialGrid.cells(draw(st.lists(st.floats(-2, 2), min_size=n, max_size=n)), 1.0)


def composed_W(q, M, lam):
    """``W(S)`` as the product of per-side exact propagators, for an independent check."""
    from linescatter.propagate import transfer_product

    H = np.array([[-1.0, 0.0], [0.0, 1.0]])
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    return transfer_product(q, lam, 0.0, q.S) @ M.array @ transfer_product(q, lam, -q.S, 0.0) @ H


# -- fundamental pair -----------------------------------------------------------------


def test_free_fundamental_pair(q0):
    lam = np.array([0.7, 3.0, 25.0])
    xs = np.array([-1.0, -0.4, 0.5, 1.0])
    p = fundamental_pair_direct(q0, TransferMatrix.identity(), lam, xs)
    k = np.sqrt(lam)[:, None]
    np.testing.assert_allclose(p.w2, np.sin(k * (xs + 1)) / k, atol=1e-12)
    np.testing.assert_allclose(p.w1, -np.cos(k * (xs + 1)), atol=1e-12)
    np.testing.assert_allclose(p.wronskian, -1, atol=1e-12)


def test_free_pair_through_diag_matrix(q0, Mdiag):
    p = fundamental_pair_direct(q0, Mdiag, [1.0], [0.0], side="+")
    assert p.w2[0, 0] == pytest.approx(2 * np.sin(1.0), abs=1e-12)
    assert p.w2p[0, 0] == pytest.approx(0.5 * np.cos(1.0), abs=1e-12)
    assert p.w1[0, 0] == pytest.approx(-2 * np.cos(1.0), abs=1e-12)
    p = fundamental_pair_direct(q0, Mdiag, [1.0], [0.0], side="-")
    assert p.w2[0, 0] == pytest.approx(np.sin(1.0), abs=1e-12)


def test_pair_rejects_points_outside_support(q0):
    with pytest.raises(ContractViolation):
        fundamental_pair_direct(q0, TransferMatrix.identity(), [1.0], [1.5])


# -- W(S) from scattering data -----------------------------------------------------------


def test_W_from_AB_free_example():
    p = W_from_AB(1.0, 0.0, 1.0, [2.0])
    assert p.w2[0] == pytest.approx(np.sin(4) / 2, abs=1e-14)
    assert p.w1[0] == pytest.approx(-np.cos(4), abs=1e-14)


@pytest.mark.parametrize("q, M, tol", [
    (PotentialGrid.zero(1.0), TransferMatrix(2, 0, 0, 0.5), 1e-10),
    (PotentialGrid(1.0, np.array([-0.75, 0.0, 0.75]), np.array([0.0, -2.0, 0.0])), TransferMatrix.identity(), 1e-7),
    (bump(), TransferMatrix(1, 1, 0, 1), 1e-7),
])
def test_W_identity_against_direct(q, M, tol):
    xi = np.linspace(0.3, 30, 50)
    sd = scattering_data(q, M, xi, with_AB=True)
    rec = reconstruct_W_at_S(sd, q.S, xi)
    direct = fundamental_pair_direct(q, M, xi**2, [q.S])
    for name in ("w1", "w1p", "w2", "w2p"):
        assert np.max(np.abs(getattr(rec, name) - getattr(direct, name)[:, 0])) <= tol


def test_W_needs_AB(q0):
    sd = scattering_data(q0, TransferMatrix.identity(), np.linspace(1, 5, 5))
    with pytest.raises(ContractViolation):
        reconstruct_W_at_S(sd, 1.0, [2.0])


def test_W_missing_frequency(q0):
    sd = scattering_data(q0, TransferMatrix.identity(), np.linspace(1, 5, 5), with_AB=True)
    with pytest.raises(ContractViolation):
        reconstruct_W_at_S(sd, 1.0, [2.5])
    with pytest.warns(RuntimeWarning):
        p = reconstruct_W_at_S(sd, 1.0, [2.5], on_missing="interpolate")
    assert p.w2[0] == pytest.approx(np.sin(5) / 2.5, abs=1e-12)


@given(cells(), det_one(), st.floats(0.2, 20))
def test_reconstructed_W_has_determinant_minus_one(q, M, xi):
    A, B = scattering_AB(q, M, np.array([xi]))
    p = W_from_AB(A, B, q.S, [xi])
    det = p.w1 * p.w2p - p.w2 * p.w1p
    scale = max(1.0, abs(A[0]) ** 2)
    assert abs(det[0] + 1) <= 1e-8 * scale


@given(cells(), det_one(), st.floats(0.2, 20))
def test_W_identity_property(q, M, xi):
    A, B = scattering_AB(q, M, np.array([xi]))
    p = W_from_AB(A, B, q.S, [xi])
    W = composed_W(q, M, xi**2)[0]
    got = np.array([[p.w1[0], p.w2[0]], [p.w1p[0], p.w2p[0]]])
    assert np.max(np.abs(got - W)) <= 1e-8 * max(1.0, np.abs(W).max()) * max(1.0, xi)


# -- m-function and Delta ----------------------------------------------------------------


def test_m_free_closed_form_positive(q0):
    lam = np.array([0.3, 2.0, 5.0, 30.0])
    k = np.sqrt(lam)
    m = m_trace(q0, TransferMatrix.identity(), lam).m_values
    np.testing.assert_allclose(m, k * np.cos(2 * k) / np.sin(2 * k), rtol=1e-10)


def test_m_free_closed_form_negative(q0):
    lam = -np.geomspace(0.1, 400, 40)
    t = np.sqrt(-lam)
    m = m_trace(q0, TransferMatrix.identity(), lam).m_values
    np.testing.assert_allclose(m, t / np.tanh(2 * t), rtol=1e-10, atol=1e-10)


def test_m_large_negative_lambda(q0):
    lam = -np.geomspace(1e2, 1e6, 20)
    m = m_trace(q0, TransferMatrix.identity(), lam).m_values
    np.testing.assert_allclose(m.real / np.sqrt(-lam), 1.0, rtol=1e-6)


def test_m_diag_closed_form(q0, Mdiag):
    lam = np.array([-3.0, 0.5, 2.0, 7.0 + 1j])
    W = composed_W(q0, Mdiag, lam)
    m = m_trace(q0, Mdiag, lam).m_values
    np.testing.assert_allclose(m, -W[:, 0, 0] / W[:, 0, 1], rtol=1e-10)


def test_m_pole_raises(q0):
    pair = fundamental_pair_direct(q0, TransferMatrix.identity(), [(np.pi / 2) ** 2], [1.0])
    with pytest.raises(NumericalDegeneracy):
        m_function(pair)


def test_delta_free_and_at_zero(q0):
    lam = np.array([0.0, 1.0, 10.0])
    d = delta_trace(q0, TransferMatrix.identity(), lam).values
    assert d[0] == pytest.approx(2.0, abs=1e-14)
    np.testing.assert_allclose(d[1:], np.sin(2 * np.sqrt(lam[1:])) / np.sqrt(lam[1:]), atol=1e-13)


def test_dirichlet_eigenvalues_free(q0):
    lam_max = (10.5 * np.pi / 2) ** 2
    ev = dirichlet_eigenvalues(q0, TransferMatrix.identity(), 0.1, lam_max)
    np.testing.assert_allclose(ev, (np.arange(1, 11) * np.pi / 2) ** 2, atol=1e-8)


def test_dirichlet_eigenvalues_diag_near_free(q0, Mdiag):
    ev = dirichlet_eigenvalues(q0, Mdiag, -20, (6.5 * np.pi / 2) ** 2)
    free = (np.arange(1, 7) * np.pi / 2) ** 2
    assert ev.size == 6
    assert np.all(np.abs(np.sqrt(ev) - np.sqrt(free)) < 0.5)


@given(cells(), det_one())
def test_delta_zeros_real_and_simple(q, M):
    lo, hi = -40.0, 120.0
    ev = dirichlet_eigenvalues(q, M, lo, hi)
    # shift the window edges off any zero
    d_lo, d_hi = delta_trace(q, M, [lo, hi]).values.real
    if min(abs(d_lo), abs(d_hi)) < 1e-6:
        return
    assert zero_count(q, M, lo, hi, height=3.0) == ev.size
    if ev.size:
        h = 1e-5 * (1 + np.abs(ev))
        slope = (delta_trace(q, M, ev + h).values - delta_trace(q, M, ev - h).values).real / (2 * h)
        assert np.all(np.abs(slope) > 1e-8)


# -- v solution ------------------------------------------------------------------------------


def test_v_free_closed_form(q0):
    xs = np.array([-0.6, 0.2, 0.9])
    lam = 3.7
    v = v_solution(q0, TransferMatrix.identity(), lam, xs).values[:, 0]
    np.testing.assert_allclose(v, -np.sin(np.sqrt(lam) * (1 - xs)) / np.sqrt(lam), atol=1e-12)


@given(st.floats(0.3, 3.0) | st.floats(-3.0, -0.3), st.floats(0.1, 60))
def test_v_identity_free_diag(a, lam):
    q0, M = PotentialGrid.zero(1.0), TransferMatrix(a, 0, 0, 1 / a)
    v = v_solution(q0, M, lam, [-1.0], side="-").values[0, 0]
    w2 = delta_trace(q0, M, [lam]).values[0]
    assert abs(-v - w2) <= 1e-10 * max(1.0, abs(w2))


def test_v_identity_bump_offdiag(Moff):
    q = bump()
    for lam in (0.5, 7.0, 40.0):
        v = v_solution(q, Moff, lam, [-1.0], side="-", method="rk").values[0, 0]
        w2 = delta_trace(q, Moff, [lam]).values[0]
        assert abs(-v - w2) <= 1e-7 * max(1.0, abs(w2))


# -- uniqueness and recovery ----------------------------------------------------------------


def test_m_uniqueness_perturb_and_refit():
    rng = np.random.default_rng(3)
    M = TransferMatrix(2, 0, 0, 0.5)
    q_true = rng.uniform(-2, 2, 4)
    lam = -np.geomspace(1, 400, 40)
    data = m_trace(PotentialGrid.cells(q_true, 1.0), M, lam).m_values.real

    def resid(v):
        return m_trace(PotentialGrid.cells(v, 1.0), M, lam).m_values.real - data

    matched = 0
    for _ in range(3):
        start = q_true + rng.normal(0, 0.5, 4)
        sol = least_squares(resid, start, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if np.max(np.abs(sol.fun)) <= 1e-10:
            matched += 1
            assert np.max(np.abs(sol.x - q_true)) <= 1e-6
    assert matched >= 1


def test_cell_averages_exact():
    q = PotentialGrid.cells([1.0, -1.0, 3.0], 1.5)
    np.testing.assert_allclose(cell_averages(q, 3), [1.0, -1.0, 3.0])
    np.testing.assert_allclose(cell_averages(q, 1), [1.0])
    np.testing.assert_allclose(cell_averages(q, 6), [1, 1, -1, -1, 3, 3])
    assert relative_l2_error(q, q) <= 1e-15


def test_recover_zero_potential():
    q0 = PotentialGrid.zero(1.0)
    sd = scattering_data(q0, TransferMatrix.identity(), np.linspace(0.1, 60, 600), with_AB=True)
    res = recover_potential(sd, TransferMatrix.identity(), 1.0, 8)
    assert np.max(np.abs(res.potential.values)) <= 1e-3
    hist = res.history_array()
    assert hist.shape[1] == 3 and hist[-1, 1] <= hist[0, 1]


def test_recover_is_deterministic():
    q = PotentialGrid.cells([1.0, -0.5, 0.8, 0.3], 1.0)
    M = TransferMatrix(2, 0, 0, 0.5)
    sd = scattering_data(q, M, np.linspace(0.1, 60, 600), with_AB=True)
    a = recover_potential(sd, M, 1.0, 4, n_restarts=1, seed=5)
    b = recover_potential(sd, M, 1.0, 4, n_restarts=1, seed=5)
    np.testing.assert_array_equal(a.potential.values, b.potential.values)
    assert relative_l2_error(a.potential, q) <= 1e-2


def test_recover_rejects_nonpositive_reg(q0):
    sd = scattering_data(q0, TransferMatrix.identity(), np.linspace(0.1, 60, 60), with_AB=True)
    with pytest.raises(ContractViolation):
        recover_potential(sd, TransferMatrix.identity(), 1.0, 4, reg=0.0)
