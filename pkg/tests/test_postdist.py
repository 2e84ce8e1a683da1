import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from conftest import crandn
from scfde.detect import conventional_detect
from scfde.pa import SalehParams, saleh_apply
from scfde.postdist import (
    GPRPostDistorter,
    MMDetector,
    NNPostDistorter,
    VolterraPostDistorter,
    blue_fuse,
    build_regressor,
    fit_segment,
    fit_shared_noise,
    lm_train,
    load_model,
    mm_fit,
    n_features,
    nn_forward,
    regressor_matrix,
    save_model,
    se_kernel,
)
from scfde.postdist.gpr import GprSegmentModel, neg_log_marginal_likelihood
from scfde.postdist.nn import NnModel, activation, cost, init_model, output_jacobian
from scfde.postdist.volterra import volterra_features
from scfde.postdist.regressor import window_from_regressors


# regressor windows

def test_regressor_memory_one():
    z = np.array([1 + 2j, 3 + 4j, 5 + 6j])
    np.testing.assert_array_equal(build_regressor(z, 1, 1), [3, 4])
    assert n_features(1) == 2


def test_regressor_memory_two_order():
    z = np.arange(8) + 10j * np.arange(8)
    np.testing.assert_array_equal(build_regressor(z, 3, 2), [4, 3, 2, 40, 30, 20])
    assert n_features(2) == 6


def test_regressor_wraps_cyclically():
    z = np.arange(8) + 0j
    np.testing.assert_array_equal(build_regressor(z, 0, 2)[:3], [1, 0, 7])


def test_regressor_matrix_rows_and_inverse(rng):
    z = crandn(rng, 16)
    X = regressor_matrix(z, 3)
    for n in (0, 5, 15):
        np.testing.assert_array_equal(X[n], build_regressor(z, n, 3))
    np.testing.assert_array_equal(window_from_regressors(X, 3)[:, 2], z)
    with pytest.raises(ValueError):
        regressor_matrix(z[:4], 3)
    with pytest.raises(ValueError):
        build_regressor(z, 0, 0)


# Gaussian processes

def test_se_kernel_values(rng):
    X = rng.standard_normal((5, 3))
    c = np.array([0.5, 1.0, 2.0])
    K = se_kernel(X, X, 1.5, c)
    ref = np.array([[2.25 * np.exp(-np.sum(((a - b) / c) ** 2)) for b in X] for a in X])
    np.testing.assert_allclose(K, ref, rtol=1e-12)


def test_nlml_gradient_matches_finite_differences(rng):
    X = rng.standard_normal((40, 2))
    y = np.sin(X[:, 0]) + 0.1 * rng.standard_normal(40)
    theta = np.log([0.8, 0.2, 1.1, 0.7])
    _, g = neg_log_marginal_likelihood(theta, X, y)
    h = 1e-6
    fd = np.array([
        (neg_log_marginal_likelihood(theta + h * e, X, y)[0] - neg_log_marginal_likelihood(theta - h * e, X, y)[0])
        / (2 * h) for e in np.eye(4)
    ])
    np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7)


def test_gpr_pure_noise_explains_nothing(rng):
    X = rng.standard_normal((150, 2))
    m = fit_segment(X, rng.standard_normal(150))
    assert m.sigma_f**2 < 0.1 * m.sigma_nu**2


def test_gpr_sine_held_out_error(rng):
    eps = 0.05
    x = rng.uniform(-3, 3, 200)
    m = fit_segment(x[:, None], np.sin(x) + eps * rng.standard_normal(200))
    xt = rng.uniform(-2.8, 2.8, 300)
    mean, _ = m.predict(xt[:, None])
    assert np.sqrt(np.mean((mean - np.sin(xt)) ** 2)) < 2 * eps
    assert m.log_likelihood >= m.init_log_likelihood


def test_gpr_interpolates_training_points(rng):
    X = rng.standard_normal((20, 2))
    y = rng.standard_normal(20)
    m = GprSegmentModel.from_hyperparameters(X, y, 1.0, 1e-8, np.array([0.5, 0.5]))
    mean, _ = m.predict(X[:3])
    np.testing.assert_allclose(mean, y[:3], atol=1e-4)


def test_gpr_far_point_reverts_to_prior(rng):
    X = rng.standard_normal((20, 2))
    m = GprSegmentModel.from_hyperparameters(X, rng.standard_normal(20), 1.3, 0.2, np.array([0.5, 0.5]))
    mean, var = m.predict(np.array([[1e3, 1e3]]))
    assert mean[0] == pytest.approx(0.0, abs=1e-12)
    assert var[0] == pytest.approx(1.3**2 + 0.2**2, rel=1e-12)


def test_gpr_shared_noise_resists_a_noiseless_target(rng):
    # clustered inputs with exactly discrete targets, as for a slicer: on its
    # own the target is best explained by interpolation with no noise, while a
    # noise level shared with a noisy companion target stays at that noise
    levels = np.array([-3, -1, 1, 3]) / np.sqrt(5)
    a = levels[rng.integers(0, 4, (200, 2))]
    X = a + 0.03 * rng.standard_normal((200, 2))
    step, noisy = a[:, 1], a[:, 0] + 0.1 * rng.standard_normal(200)
    alone = fit_segment(X, step)
    m_step, m_noisy = fit_shared_noise(X, (step, noisy))
    assert alone.sigma_nu < 1e-3
    assert m_step.sigma_nu == m_noisy.sigma_nu
    assert 0.05 < m_noisy.sigma_nu < 0.2
    # the joint evidence improves; an individual target's may not
    assert m_step.log_likelihood + m_noisy.log_likelihood >= m_step.init_log_likelihood + m_noisy.init_log_likelihood


def test_blue_fusion_arithmetic():
    mean, var, w = blue_fuse(np.array([[0.0], [4.0]]), np.array([[1.0], [3.0]]))
    assert mean[0] == pytest.approx(1.0)
    assert var[0] == pytest.approx(0.75)
    np.testing.assert_allclose(w[:, 0], [0.75, 0.25])


def _toy_postdist_data(rng, n, alph):
    """Equalized symbols with a mild cubic compression and one-tap nonlinear memory."""
    a = alph.points[rng.integers(0, alph.order, n)]
    z = a * (1 - 0.15 * np.abs(a) ** 2) + 0.05 * np.roll(a, 1) * np.abs(a) ** 2
    return z + 0.003 * crandn(rng, n), a


def test_gpr_estimator(rng, qam16):
    z, a = _toy_postdist_data(rng, 600, qam16)
    gpr = GPRPostDistorter(memory_depth=2, n_segments=2, max_iter=50).fit(regressor_matrix(z, 2), a)
    zt, at = _toy_postdist_data(rng, 400, qam16)
    soft, v_i, v_q = gpr.predict(regressor_matrix(zt, 2), return_var=True)
    assert np.mean(np.abs(soft - at) ** 2) < 0.1 * np.mean(np.abs(zt - at) ** 2)
    comp = gpr.predict_components(regressor_matrix(zt, 2))
    for part in ("I", "Q"):
        sn2 = gpr.segments_[part][0].sigma_nu ** 2
        assert np.all(comp[part][3] >= sn2)
    np.testing.assert_allclose(v_i, comp["I"][1])
    np.testing.assert_allclose(v_q, comp["Q"][1])
    noise = {seg.sigma_nu for part in ("I", "Q") for seg in gpr.segments_[part]}
    assert len(noise) == 1
    with pytest.raises(ValueError):
        GPRPostDistorter(2, n_segments=4).fit(regressor_matrix(z[:100], 2), a[:100])
    with pytest.raises(NotFittedError):
        GPRPostDistorter().predict(regressor_matrix(z, 2))


# neural network

def test_activation_and_bias_only_output():
    assert activation(0.0) == 0.0
    np.testing.assert_allclose(activation(0.7), 2 / (1 + np.exp(-1.4)) - 1, rtol=1e-14)
    m = NnModel(np.zeros((3, 2)), np.zeros(3), np.zeros(3), np.zeros(3), 0.5, -0.5)
    assert nn_forward(m, np.ones((1, 2)))[0] == 0.5 - 0.5j


def test_single_neuron_by_hand():
    m = NnModel(np.array([[0.5, -1.0]]), np.array([0.1]), np.array([2.0]), np.array([-1.0]), 0.3, 0.2)
    x = np.array([0.4, 0.2])
    h = np.tanh(0.5 * 0.4 - 1.0 * 0.2 + 0.1)
    assert nn_forward(m, x)[0] == pytest.approx((2 * h + 0.3) + 1j * (-h + 0.2), abs=1e-15)


def test_nn_jacobian_matches_finite_differences(rng):
    model = init_model(3, 6, rng)
    model.b1 = rng.standard_normal(3) * 0.3
    X = rng.standard_normal((25, 6))
    _, J = output_jacobian(model, X)
    theta = model.pack()
    h = 1e-6
    fd = np.empty_like(J)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = h
        up = nn_forward(NnModel.unpack(theta + e, 3, 6), X)
        dn = nn_forward(NnModel.unpack(theta - e, 3, 6), X)
        d = (up - dn) / (2 * h)
        fd[:, k] = np.concatenate([d.real, d.imag])
    assert np.max(np.abs(J - fd)) / np.max(np.abs(fd)) < 1e-5


def test_pack_unpack_round_trip(rng):
    m = init_model(4, 6, rng)
    m2 = NnModel.unpack(m.pack(), 4, 6)
    np.testing.assert_array_equal(m2.pack(), m.pack())
    assert m.n_params == m.pack().size == 4 * 6 + 3 * 4 + 2


def test_lm_identity_task_and_monotone_cost(rng, qam16):
    z = qam16.points[rng.integers(0, 16, 400)] + 0.05 * crandn(rng, 400)
    X = regressor_matrix(z, 1)
    model, hist = lm_train(init_model(6, 2, rng), X, z, epochs=200)
    assert cost(model, X, z) < 1e-5
    assert np.all(np.diff(hist.costs) < 0)


def test_nn_estimator(rng, qam16):
    z, a = _toy_postdist_data(rng, 2000, qam16)
    nn = NNPostDistorter(memory_depth=2, hidden=8, epochs=60, random_state=3).fit(regressor_matrix(z, 2), a)
    zt, at = _toy_postdist_data(rng, 1000, qam16)
    soft = nn.predict_block(zt)
    assert np.mean(np.abs(soft - at) ** 2) < 0.2 * np.mean(np.abs(zt - at) ** 2)
    again = NNPostDistorter(memory_depth=2, hidden=8, epochs=60, random_state=3).fit(regressor_matrix(z, 2), a)
    np.testing.assert_array_equal(again.predict_block(zt), soft)
    with pytest.raises(ValueError):
        NNPostDistorter(2, hidden=30).fit(regressor_matrix(z[:100], 2), a[:100])


# Volterra

def test_volterra_distortionless_fit(rng, qam16):
    z = qam16.points[rng.integers(0, 16, 500)]
    vs = VolterraPostDistorter(2).fit(regressor_matrix(z, 2), z)
    np.testing.assert_allclose(vs.linear_coef_, [0, 1, 0], atol=1e-10)
    assert np.max(np.abs(vs.cubic_coef_)) < 1e-10


def test_volterra_residual_not_worse_than_linear(rng, qam16):
    z, a = _toy_postdist_data(rng, 800, qam16)
    X = regressor_matrix(z, 2)
    full = VolterraPostDistorter(2, cubic=True).fit(X, a)
    lin = VolterraPostDistorter(2, cubic=False).fit(X, a)
    assert full.residual_ <= lin.residual_
    assert np.allclose(lin.cubic_coef_, 0)


def test_volterra_matches_normal_equations(rng):
    z, a = crandn(rng, 200), crandn(rng, 200)
    X = regressor_matrix(z, 2)
    vs = VolterraPostDistorter(2).fit(X, a)
    Phi = volterra_features(window_from_regressors(X, 2))
    ref = np.linalg.solve(Phi.conj().T @ Phi, Phi.conj().T @ a)
    assert np.max(np.abs(vs.coef_ - ref)) < 1e-8
    np.testing.assert_allclose(vs.predict(X), Phi @ ref, atol=1e-8)


def test_volterra_guards(rng):
    z = crandn(rng, 50)
    with pytest.raises(ValueError):
        VolterraPostDistorter(2).fit(regressor_matrix(z, 2), z)
    with pytest.raises(np.linalg.LinAlgError):
        VolterraPostDistorter(2).fit(regressor_matrix(np.ones(400, dtype=complex), 2), np.ones(400))


# memoryless modified metric

def test_mm_linear_channel(rng, qam16):
    a = qam16.points[rng.integers(0, 16, 8000)]
    z = a + 0.05 * crandn(rng, 8000)
    table, hits = mm_fit(z, a, qam16)
    bound = 2.0 * 0.05 / np.abs(qam16.points) / np.sqrt(hits)
    assert np.all(np.abs(table - 1.0) < np.maximum(bound, 2 / np.sqrt(hits)))
    det = MMDetector(qam16).fit(z, a)
    zt = crandn(rng, 2000)
    agree = np.mean(det.predict(zt) == conventional_detect(zt, qam16))
    assert agree > 0.95


def test_mm_compression_decreases_with_amplitude(rng, qam64):
    a = qam64.points[rng.integers(0, 64, 40000)]
    z = saleh_apply(0.5 * a, SalehParams()) / 1.0
    table, _ = mm_fit(z, a, qam64)
    amp = np.round(np.abs(qam64.points), 9)
    rings = np.unique(amp)
    g = np.array([np.mean(np.abs(table[amp == r])) for r in rings])
    assert np.all(np.diff(g) < 0)


def test_mm_ring_fallback(rng, qam16):
    a = qam16.points[rng.integers(0, 16, 100)]
    a[a == qam16.points[0]] = qam16.points[3]
    table, hits = mm_fit(a * 0.9, a, qam16, min_hits=1)
    assert hits[0] == 0 and table[0] == pytest.approx(0.9)
    with pytest.raises(ValueError):
        mm_fit(a, a, qam16, min_hits=1, ring_fallback=False)
    with pytest.raises(ValueError):
        mm_fit(a, a + 0.1, qam16)
    with pytest.raises(NotFittedError):
        MMDetector(qam16).predict(a)


# persistence

def test_model_io_round_trip(tmp_path, rng, qam16):
    z, a = _toy_postdist_data(rng, 600, qam16)
    X = regressor_matrix(z, 2)
    models = [
        VolterraPostDistorter(2).fit(X, a),
        NNPostDistorter(2, hidden=5, epochs=5).fit(X, a),
        GPRPostDistorter(2, n_segments=2, max_iter=5).fit(X, a),
        MMDetector(qam16).fit(z, a),
    ]
    for i, m in enumerate(models):
        path = save_model(m, tmp_path / f"m{i}.npz", {"note": "x"})
        loaded, meta = load_model(path)
        assert type(loaded) is type(m) and meta["note"] == "x"
        if isinstance(m, MMDetector):
            np.testing.assert_array_equal(loaded.predict(z), m.predict(z))
        else:
            np.testing.assert_allclose(loaded.predict(X), m.predict(X), atol=1e-12)
    with pytest.raises(TypeError):
        save_model(object(), tmp_path / "bad.npz")
