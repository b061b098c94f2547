import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmwce.channel import build_dictionary, channel_freq, channel_taps, sample_paths, virtual_channel
from mmwce.errors import ConfigError, DimensionError, FactorizationError
from mmwce.measurement import (
    TrainingFrames, apply_dictionary, build_measurement, generate_training_frames,
    measurement_matrix, noise_covariance, synthesize_received, whiten, whiten_apply,
)


def frames(seed=0, m=6, n_t=4, n_r=8, l_t=2, l_r=3, n_q=2, k=5):
    return generate_training_frames(np.random.default_rng(seed), m, n_t, n_r, l_t, l_r, n_q, k)


def kron_oracle(fr):
    """Per-frame Kronecker rows built from scalar products."""
    rows = []
    for m in range(fr.m):
        x = fr.F[m] @ fr.q[m]
        wh = fr.W[m].conj().T
        block = np.zeros((fr.l_r, fr.n_t * fr.n_r), complex)
        for l in range(fr.l_r):
            for t in range(fr.n_t):
                for r in range(fr.n_r):
                    block[l, t * fr.n_r + r] = x[t] * wh[l, r]
        rows.append(block)
    return np.vstack(rows)


def vec(H):
    return np.swapaxes(H, -1, -2).reshape(H.shape[0], -1)


class TestFrames:
    def test_table_frames(self):
        fr = generate_training_frames(np.random.default_rng(1), 100, 16, 64, 2, 4, 2, 16)
        assert fr.F.shape == (100, 16, 2) and fr.W.shape == (100, 64, 4)
        for A, n in ((fr.F, 16), (fr.W, 64)):
            np.testing.assert_allclose(np.abs(A) ** 2, 1.0 / n, rtol=1e-12)
            levels = np.round(np.angle(A * np.sqrt(n)) / (np.pi / 2)) % 4
            np.testing.assert_allclose(np.exp(1j * levels * np.pi / 2), A * np.sqrt(n), atol=1e-12)
        assert np.all(fr.pilots == 1)

    def test_one_bit(self):
        fr = frames(n_q=1)
        np.testing.assert_allclose(np.abs((fr.F * 2).imag), 0, atol=1e-12)
        assert set(np.round((fr.F * 2).real).ravel()) <= {-1.0, 1.0}

    def test_deterministic(self):
        a, b = frames(7), frames(7)
        assert np.array_equal(a.F, b.F) and np.array_equal(a.W, b.W) and np.array_equal(a.q, b.q)

    def test_power(self):
        fr = generate_training_frames(np.random.default_rng(2), 4000, 8, 16, 2, 4, 2, 1)
        power = np.mean(np.sum(np.abs(np.einsum("mtl,ml->mt", fr.F, fr.q)) ** 2, axis=1))
        assert power == pytest.approx(1.0, rel=0.05)

    @pytest.mark.parametrize("l_t,l_r", [(4, 2), (2, 8)])
    def test_hybrid_constraint(self, l_t, l_r):
        with pytest.raises(ConfigError):
            frames(l_t=l_t, l_r=l_r)


class TestMeasurementMatrix:
    def test_scalar_case(self):
        fr = frames(m=1, l_t=1, l_r=1)
        f, w, q = fr.F[0][:, 0], fr.W[0][:, 0], fr.q[0][0]
        np.testing.assert_allclose(measurement_matrix(fr)[0], np.kron(q * f, w.conj()), atol=1e-15)

    def test_kronecker_oracle(self):
        fr = frames(m=3, n_t=2, n_r=3, l_t=1, l_r=2)
        np.testing.assert_allclose(measurement_matrix(fr), kron_oracle(fr), atol=1e-15)

    def test_shape(self):
        fr = frames()
        assert measurement_matrix(fr).shape == (6 * 3, 4 * 8)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2 ** 31), a=st.integers(1, 4), b=st.integers(1, 4), c=st.integers(1, 4))
    def test_vec_convention(self, seed, a, b, c):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((2, a)) + 1j * rng.standard_normal((2, a))
        X = rng.standard_normal((a, b)) + 1j * rng.standard_normal((a, b))
        B = rng.standard_normal((b, c)) + 1j * rng.standard_normal((b, c))
        lhs = (A @ X @ B).reshape(-1, order="F")
        rhs = np.kron(B.T, A) @ X.reshape(-1, order="F")
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_apply_dictionary_matches_explicit(self):
        fr = frames()
        d = build_dictionary(4, 8, 6, 10)
        phi = measurement_matrix(fr)
        np.testing.assert_allclose(apply_dictionary(phi, d.A_T, d.A_R), phi @ d.psi(), atol=1e-13)


class TestReceived:
    def setup_method(self):
        self.d = build_dictionary(4, 8, 8, 16)
        self.fr = frames(3, m=10, k=6)

    def test_noiseless_sparse_model(self):
        p = sample_paths(np.random.default_rng(0), 1, 6, on_grid=True, dictionary=self.d)
        H = channel_freq(channel_taps(p, 4, 8), 6)
        y = synthesize_received(H, self.fr, 0.0, None)
        hv = vec(virtual_channel(p, self.d, 6))
        expected = hv @ (measurement_matrix(self.fr) @ self.d.psi()).T
        np.testing.assert_allclose(y, expected, atol=1e-10)

    def test_pure_noise_covariance(self):
        rng = np.random.default_rng(1)
        fr = frames(4, m=2, n_r=6, l_r=2, k=1)
        y = np.concatenate([synthesize_received(np.zeros((1, 6, 4)), fr, 0.5, rng) for _ in range(20000)])
        C, _ = noise_covariance(fr)
        np.testing.assert_allclose(y.T @ y.conj() / len(y), 0.5 * C, atol=0.02)

    def test_linearity(self):
        p = sample_paths(np.random.default_rng(2), 3, 6)
        H = channel_freq(channel_taps(p, 4, 8), 6)
        y1 = synthesize_received(H, self.fr, 0.0, None)
        y2 = synthesize_received(2 * H, self.fr, 0.0, None)
        np.testing.assert_allclose(y2, 2 * y1, atol=1e-12)

    def test_affine_with_fixed_noise(self):
        p = sample_paths(np.random.default_rng(3), 3, 6)
        H = channel_freq(channel_taps(p, 4, 8), 6)
        n0 = synthesize_received(0 * H, self.fr, 1.0, np.random.default_rng(9))
        y = synthesize_received(H, self.fr, 1.0, np.random.default_rng(9))
        np.testing.assert_allclose(y - n0, synthesize_received(H, self.fr, 0.0, None), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            synthesize_received(np.zeros((6, 4, 4)), self.fr, 0.0, None)


class TestCovariance:
    def test_orthonormal_combiners(self):
        W = np.stack([np.eye(4)[:, :2]] * 3).astype(complex)
        fr = TrainingFrames(np.ones((3, 2, 1), complex), W, np.ones((3, 1), complex), np.ones((3, 1)), 2)
        C, D = noise_covariance(fr)
        np.testing.assert_allclose(C, np.eye(6))
        np.testing.assert_allclose(D, np.eye(6))

    def test_factor(self):
        fr = frames(5, m=20)
        C, D = noise_covariance(fr)
        assert np.allclose(np.tril(D, -1), 0)
        assert np.linalg.norm(D.conj().T @ D - C) < 1e-10

    def test_cross_blocks_zero(self):
        fr = frames(6, m=2)
        C, _ = noise_covariance(fr)
        assert not np.any(C[:3, 3:]) and not np.any(C[3:, :3])

    def test_singular_block_names_frame(self):
        fr = frames(7, m=3)
        W = fr.W.copy()
        W[1][:, 1] = W[1][:, 0]
        bad = TrainingFrames(fr.F, W, fr.q, fr.pilots, fr.n_q)
        with pytest.raises(FactorizationError) as info:
            noise_covariance(bad)
        assert info.value.frame == 1
        assert "frame 1" in str(info.value)


class TestWhitening:
    def test_identity_factor(self):
        rng = np.random.default_rng(0)
        phi = rng.standard_normal((5, 4)) + 0j
        psi = np.eye(4)
        y = rng.standard_normal((2, 5)) + 0j
        ups, yw = whiten(phi, psi, np.eye(5), y)
        np.testing.assert_allclose(ups, phi)
        np.testing.assert_allclose(yw, y)

    def test_round_trip(self):
        fr = frames(1, m=12)
        _, D = noise_covariance(fr)
        rng = np.random.default_rng(1)
        y = rng.standard_normal((5, 36)) + 1j * rng.standard_normal((5, 36))
        _, yw = whiten(measurement_matrix(fr), np.eye(32), D, y)
        np.testing.assert_allclose((D.conj().T @ yw.T).T, y, atol=1e-10)

    def test_block_path_matches_dense(self):
        fr = frames(2, m=9)
        _, D = noise_covariance(fr)
        x = np.random.default_rng(2).standard_normal((27, 4)) + 0j
        np.testing.assert_allclose(whiten_apply(D, x, block=3), whiten_apply(D, x), atol=1e-12)

    def test_identity(self):
        fr = frames(3, m=15)
        C, D = noise_covariance(fr)
        Dinv = np.linalg.inv(D)
        assert np.linalg.norm(Dinv.conj().T @ C @ Dinv - np.eye(C.shape[0])) < 1e-10

    def test_whitened_noise_covariance(self):
        fr = frames(4, m=2, n_r=6, l_r=2, k=1)
        d = build_dictionary(4, 6, 8, 12)
        rng = np.random.default_rng(5)
        y = np.concatenate([synthesize_received(np.zeros((1, 6, 4)), fr, 2.0, rng) for _ in range(10000)])
        meas = build_measurement(y, fr, d, 2.0)
        cov = meas.y_w.T @ meas.y_w.conj() / len(y)
        np.testing.assert_allclose(cov, 2.0 * np.eye(4), atol=0.05 * 2.0)

    def test_singular_factor(self):
        with pytest.raises(FactorizationError):
            whiten_apply(np.diag([1.0, 0.0]), np.ones(2))

    def test_operator_identity(self):
        fr = frames(8, m=7)
        d = build_dictionary(4, 8, 8, 16)
        y = np.zeros((5, 21), complex)
        meas = build_measurement(y, fr, d, 1.0)
        _, D = noise_covariance(fr)
        expected = np.linalg.solve(D.conj().T, measurement_matrix(fr) @ d.psi())
        np.testing.assert_allclose(meas.Upsilon_w, expected, atol=1e-10)
