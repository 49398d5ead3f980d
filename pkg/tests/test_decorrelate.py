import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blocktest.decorrelate import (
    CovarianceModel,
    CovForm,
    assemble_full,
    assemble_separable,
    bandwidth,
    cholesky_factor,
    decorrelate_grid,
    empirical_autocov,
    estimate_autocov_table,
    fit_covariance,
    inverse_sqrt,
    modified_cholesky,
    psd_repair,
    whiten,
)
from blocktest.errors import (
    LagOutOfRange,
    NotSymmetric,
    SingularFactor,
    SizeGuardExceeded,
    UnknownKind,
    ZeroVariance,
)
from blocktest.fieldgen import DependenceSpec, NoiseSpec, gen_dependent
from blocktest.grid import vec
from oracles import autocov_loop, full_cov_loop, modchol_reference, sma1_covariance


@pytest.mark.parametrize("k, b", [(1, 0), (2, 1), (8, 1), (10, 1), (20, 2), (27, 2), (50, 3), (64, 3), (100, 4), (1000, 9)])
def test_bandwidth(k, b):
    assert bandwidth(k) == b


def test_autocov_matches_loop_including_mixed_signs():
    g = np.random.default_rng(0).normal(size=(9, 11))
    for h1, h2 in [(0, 0), (1, 0), (0, 2), (2, 1), (1, -2), (-1, 2), (-2, -1), (3, -4)]:
        assert empirical_autocov(g, h1, h2) == pytest.approx(autocov_loop(g, h1, h2), abs=1e-14)
        assert empirical_autocov(g, h1, h2) == pytest.approx(empirical_autocov(g, -h1, -h2), abs=1e-15)
    with pytest.raises(LagOutOfRange):
        empirical_autocov(g, 9, 0)


def test_table_domain_and_band():
    g = np.random.default_rng(1).normal(size=(20, 27))
    t = estimate_autocov_table(g)
    assert t.bandwidth == (2, 2)
    assert set(t.gamma) == {(h1, h2) for h1 in range(3) for h2 in range(-2, 3) if h1 > 0 or h2 >= 0}
    assert t(3, 0) == 0.0 and t(0, -3) == 0.0
    assert t(-1, 2) == t.gamma[(1, -2)]


def test_full_assembly_matches_loop_and_zeroes_outside_band():
    g = np.random.default_rng(2).normal(size=(6, 8))
    t = estimate_autocov_table(g, band=(2, 1))
    S = assemble_full(t, 6, 8).full
    ref = full_cov_loop(t, 6, 8, 2, 1)
    np.testing.assert_array_equal(S, ref)
    assert np.array_equal(S, S.T)
    idx = np.arange(48)
    i, j = idx % 6, idx // 6
    outside = (np.abs(i[:, None] - i[None, :]) > 2) | (np.abs(j[:, None] - j[None, :]) > 1)
    assert (S[outside] == 0.0).all()


def test_full_assembly_size_guard():
    t = estimate_autocov_table(np.random.default_rng(0).normal(size=(10, 10)))
    with pytest.raises(SizeGuardExceeded):
        assemble_full(t, 101, 100)


def test_separable_scaling():
    g = np.random.default_rng(3).normal(size=(20, 27))
    model = assemble_separable(g)
    g0 = empirical_autocov(g, 0, 0)
    assert model.sigma1.shape == (27, 27) and model.sigma2.shape == (20, 20)
    np.testing.assert_allclose(np.diag(model.sigma2), 1.0)
    np.testing.assert_allclose(np.diag(model.dense()), g0)
    assert model.sigma1[0, 1] == pytest.approx(empirical_autocov(g, 0, 1))
    assert model.sigma2[1, 0] == pytest.approx(empirical_autocov(g, 1, 0) / g0)
    assert model.sigma1[0, 3] == 0.0 and model.sigma2[0, 3] == 0.0
    with pytest.raises(ZeroVariance):
        assemble_separable(np.ones((5, 5)))


def _spd(rng, n):
    A = rng.normal(size=(n, n))
    return A @ A.T + n * np.eye(n)


def test_repair_leaves_factorizable_matrix_untouched():
    M = _spd(np.random.default_rng(0), 12)
    for method in ("modchol", "floor"):
        assert psd_repair(M, method) is not None
        np.testing.assert_array_equal(psd_repair(M, method), M)


symmetric = arrays(np.float64, (8, 8), elements=st.floats(-10, 10)).map(lambda A: (A + A.T) / 2)


@given(symmetric)
@settings(max_examples=80, deadline=None)
def test_modchol_repair_properties(M):
    R = psd_repair(M, "modchol")
    E = R - M
    np.testing.assert_array_equal(E, np.diag(np.diag(E)))
    assert (np.diag(E) >= 0).all()
    # a singular PSD block only gets the tiny taubar * gamma shift, so test definiteness
    # directly rather than through the pipeline's pivot tolerance
    np.linalg.cholesky(R)


@given(symmetric)
@settings(max_examples=80, deadline=None)
def test_floor_repair_bound(M):
    R = psd_repair(M, "floor")
    lam_min = np.linalg.eigvalsh(M)[0]
    floor = 1e-8 * np.max(np.abs(M).sum(axis=1))
    assert np.linalg.norm(R - M, 2) <= abs(min(lam_min, 0.0)) + floor + 1e-9 * (1 + np.abs(M).max())
    assert np.allclose(R, R.T)
    assert np.linalg.eigvalsh(R)[0] >= -1e-9 * (1 + np.abs(M).max())


@given(symmetric)
@settings(max_examples=80, deadline=None)
def test_modified_cholesky_matches_reference(M):
    L, perm, e = modified_cholesky(M)
    np.testing.assert_allclose(e, modchol_reference(M), rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(M[np.ix_(perm, perm)] + np.diag(e[perm]), L @ L.T, atol=1e-8 * (1 + np.abs(M).max()))
    assert np.allclose(L, np.tril(L))


def test_modified_cholesky_on_positive_definite_is_plain_cholesky():
    M = _spd(np.random.default_rng(4), 15)
    L, perm, e = modified_cholesky(M)
    assert not e.any()
    np.testing.assert_allclose(L, sla.cholesky(M[np.ix_(perm, perm)], lower=True), atol=1e-10)


def test_repair_validation():
    with pytest.raises(NotSymmetric):
        psd_repair(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NotSymmetric):
        psd_repair(np.ones((2, 3)))
    with pytest.raises(UnknownKind):
        psd_repair(-np.eye(2), "nearest")


def test_inverse_sqrt_whitens_exactly():
    M = _spd(np.random.default_rng(5), 30)
    W = inverse_sqrt(M)
    np.testing.assert_allclose(W @ M @ W.T, np.eye(30), atol=1e-8)
    assert np.allclose(W, np.tril(W))


def test_singular_factor_detected():
    with pytest.raises(SingularFactor):
        cholesky_factor(np.zeros((3, 3)))
    with pytest.raises(SingularFactor):
        cholesky_factor(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SingularFactor):
        cholesky_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


def _toeplitz_ar(k, phi):
    idx = np.arange(k)
    return phi ** np.abs(idx[:, None] - idx[None, :])


def test_full_and_separable_whitening_agree_on_kronecker_model():
    n = m = 8
    S1 = 2.0 * _toeplitz_ar(m, 0.5)
    S2 = _toeplitz_ar(n, 0.3)
    x = np.random.default_rng(6).normal(size=(n, m))
    full = CovarianceModel(CovForm.FULL, n, m, full=np.kron(S1, S2))
    sep = CovarianceModel(CovForm.SEPARABLE, n, m, sigma1=S1, sigma2=S2)
    a, b = whiten(x, full), whiten(x, sep)
    assert np.max(np.abs(a - b)) < 1e-8
    # explicit 64 x 64 transform as the oracle
    W = np.kron(inverse_sqrt(S1), inverse_sqrt(S2))
    np.testing.assert_allclose(vec(b), W @ vec(x - x.mean()), atol=1e-10)


def test_whitening_with_true_covariance_removes_correlation():
    n = m = 12
    rho = 0.4
    S = sma1_covariance(n, m, rho)
    model = CovarianceModel(CovForm.FULL, n, m, full=S)
    dep = DependenceSpec.sma(1, rho)
    rng = np.random.default_rng(7)
    reps = 300
    acc = {}
    for _ in range(reps):
        y = whiten(gen_dependent(n, m, dep, NoiseSpec("normal"), rng=rng), model)
        for lag in [(1, 0), (0, 1), (1, 1), (1, -1), (2, 0)]:
            acc.setdefault(lag, []).append(empirical_autocov(y, *lag))
    for lag, vals in acc.items():
        assert abs(np.mean(vals)) < 4 / np.sqrt(n * m * reps), lag


def test_decorrelated_sma_field_has_small_lag_correlation():
    dep = DependenceSpec.sma(1, 0.2)
    rng = np.random.default_rng(8)
    r = []
    for _ in range(20):
        x = gen_dependent(30, 30, dep, NoiseSpec("normal"), rng=rng)
        y = decorrelate_grid(x, "full")
        r.append(empirical_autocov(y, 1, 0) / empirical_autocov(y, 0, 0))
    assert abs(np.mean(r)) < 0.05


def test_fit_covariance_caches_factors_and_validates():
    x = np.random.default_rng(9).normal(size=(10, 12))
    model = fit_covariance(x, "full")
    assert set(model.factors) == {"full"}
    np.testing.assert_allclose(model.factors["full"] @ model.factors["full"].T, model.full, atol=1e-10)
    sep = fit_covariance(x, "separable")
    assert set(sep.factors) == {"sigma1", "sigma2"}
    with pytest.raises(UnknownKind):
        fit_covariance(x, "diagonal")
    with pytest.raises(ZeroVariance):
        fit_covariance(np.ones((6, 6)), "full")
    with pytest.raises(SizeGuardExceeded):
        decorrelate_grid(np.random.default_rng(0).normal(size=(20, 20)), "full", max_size=399)
