import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmwce.channel import (
    PathSet, build_dictionary, canonical_index, channel_freq, channel_taps, grid_angles, grid_distance, ind2sub,
    raised_cosine, sample_paths, steering_vector, sub2ind, virtual_channel, virtual_label,
)
from mmwce.errors import DimensionError, PreconditionError


def naive_taps(paths, n_t, n_r):
    """Term-by-term evaluation of the geometric tap model with scalar loops."""
    scale = math.sqrt(n_t * n_r / (paths.n_paths * paths.path_loss))
    taps = np.zeros((paths.n_c, n_r, n_t), dtype=complex)
    for d in range(paths.n_c):
        for ell in range(paths.n_paths):
            p = raised_cosine(d * paths.ts - paths.tau[ell], paths.rolloff, paths.ts)
            for r in range(n_r):
                ar = cmath.exp(1j * r * math.pi * math.cos(paths.aoa[ell])) / math.sqrt(n_r)
                for t in range(n_t):
                    at = cmath.exp(1j * t * math.pi * math.cos(paths.aod[ell])) / math.sqrt(n_t)
                    taps[d, r, t] += scale * paths.alpha[ell] * p * ar * at.conjugate()
    return taps


def direct_dft(taps, k):
    out = np.zeros((k,) + taps.shape[1:], dtype=complex)
    for kk in range(k):
        for d in range(taps.shape[0]):
            out[kk] += taps[d] * cmath.exp(-2j * math.pi * kk * d / k)
    return out


class TestSteering:
    def test_broadside(self):
        np.testing.assert_allclose(steering_vector(np.pi / 2, 4), 0.5 * np.ones(4), atol=1e-15)

    def test_endfire(self):
        np.testing.assert_allclose(steering_vector(0.0, 2), np.array([1, -1]) / np.sqrt(2), atol=1e-15)

    def test_matches_elementwise_formula(self):
        v = steering_vector(np.pi / 3, 8)
        oracle = [cmath.exp(1j * n * math.pi * math.cos(math.pi / 3)) / math.sqrt(8) for n in range(8)]
        np.testing.assert_allclose(v, oracle, atol=1e-15)

    def test_zero_antennas(self):
        with pytest.raises(DimensionError):
            steering_vector(0.1, 0)


class TestDictionary:
    def test_table_shapes(self):
        d = build_dictionary(16, 64, 32, 128)
        assert d.A_T.shape == (16, 32)
        assert d.A_R.shape == (64, 128)

    def test_two_point_grid(self):
        d = build_dictionary(2, 2, 2, 2)
        np.testing.assert_allclose(d.grid_aod, [0.0, np.pi])
        np.testing.assert_allclose(d.A_T[:, 0], steering_vector(0.0, 2))
        np.testing.assert_allclose(d.A_T[:, 1], steering_vector(np.pi, 2))

    @pytest.mark.parametrize("dims", [(16, 64, 32, 128), (4, 8, 5, 9), (1, 1, 1, 1)])
    def test_unit_columns(self, dims):
        d = build_dictionary(*dims)
        for A in (d.A_T, d.A_R):
            np.testing.assert_allclose(np.diag(A.conj().T @ A).real, 1.0, atol=1e-12)

    def test_uniform_grid(self):
        np.testing.assert_allclose(grid_angles(8), 2 * np.pi * np.arange(8) / 8)

    def test_zero_grid(self):
        with pytest.raises(DimensionError):
            build_dictionary(4, 4, 0, 8)

    def test_psi_column_order(self):
        # column i_aod * G_r + i_aoa is vec(a_R a_T^H) in column-major order
        d = build_dictionary(3, 4, 5, 6)
        psi = d.psi()
        for j in (0, 7, 29):
            i_aoa, i_aod = ind2sub(6, 5, j)
            outer = np.outer(d.A_R[:, i_aoa], d.A_T[:, i_aod].conj())
            np.testing.assert_allclose(psi[:, j], outer.reshape(-1, order="F"), atol=1e-15)
            np.testing.assert_allclose(d.atoms([j])[:, 0], psi[:, j], atol=1e-15)


class TestIndexing:
    def test_examples(self):
        assert ind2sub(4, 2, 0) == (0, 0)
        assert ind2sub(4, 2, 5) == (1, 1)

    def test_round_trip(self):
        g_r, g_t = 6, 5
        for j in range(g_r * g_t):
            assert sub2ind(g_r, g_t, *ind2sub(g_r, g_t, j)) == j

    def test_out_of_range(self):
        with pytest.raises(DimensionError):
            ind2sub(4, 2, 8)
        with pytest.raises(DimensionError):
            sub2ind(4, 2, 4, 0)


class TestAliases:
    def test_canonical_examples(self):
        assert canonical_index(3, 8) == 3
        assert canonical_index(5, 8) == 3
        assert canonical_index(4, 8) == 0
        assert canonical_index(4, 9) == 4

    @pytest.mark.parametrize("g", [7, 8, 16])
    def test_aliases_share_steering_vector(self, g):
        d = build_dictionary(6, 6, g, g)
        for i in range(g):
            c = canonical_index(i, g)
            np.testing.assert_allclose(d.A_R[:, i], d.A_R[:, c], atol=1e-12)

    def test_distinct_canonical_columns_differ(self):
        d = build_dictionary(6, 6, 16, 16)
        canon = sorted({canonical_index(i, 16) for i in range(16)})
        gram = np.abs(d.A_R[:, canon].conj().T @ d.A_R[:, canon])
        assert np.all(gram[~np.eye(len(canon), dtype=bool)] < 1 - 1e-9)

    def test_distance(self):
        assert grid_distance(1, 7, 8) == 0
        assert grid_distance(3, 4, 8) == 1
        assert grid_distance(3, 0, 8) == 1
        assert grid_distance(0, 7, 8) == 1
        assert grid_distance(2, 6, 8) == 0


class TestRaisedCosine:
    def test_peak(self):
        assert raised_cosine(0.0, 0.8, 1.0) == pytest.approx(1.0)

    @pytest.mark.parametrize("k", [-3, -1, 1, 2, 5])
    def test_nyquist_zeros(self, k):
        assert abs(raised_cosine(k * 2.0, 0.8, 2.0)) < 1e-15

    def test_singularity_limit(self):
        beta, ts = 0.8, 1.0
        t0 = ts / (2 * beta)
        h = 1e-6
        # numeric two-sided limit of the unguarded formula
        def raw(t):
            x = t / ts
            return np.sinc(x) * np.cos(np.pi * beta * x) / (1 - (2 * beta * x) ** 2)
        limit = 0.5 * (raw(t0 - h) + raw(t0 + h))
        assert raised_cosine(t0, beta, ts) == pytest.approx(limit, abs=1e-8)
        assert raised_cosine(-t0, beta, ts) == pytest.approx(limit, abs=1e-8)

    def test_zero_rolloff_is_sinc(self):
        t = np.linspace(-3, 3, 13)
        np.testing.assert_allclose(raised_cosine(t, 0.0, 1.0), np.sinc(t))

    def test_bad_rolloff(self):
        with pytest.raises(ValueError):
            raised_cosine(0.0, 1.5, 1.0)


class TestPaths:
    def test_table_draw(self):
        p = sample_paths(np.random.default_rng(0), 16, 16)
        assert p.n_paths == 16
        assert np.all((p.tau >= 0) & (p.tau <= 15))
        assert np.all((p.aoa >= 0) & (p.aoa <= np.pi))
        assert np.all((p.aod >= 0) & (p.aod <= np.pi))

    def test_single_on_grid_two_point(self):
        d = build_dictionary(2, 2, 2, 2)
        p = sample_paths(np.random.default_rng(3), 1, 1, on_grid=True, dictionary=d)
        assert p.aoa[0] in (0.0, np.pi)
        assert p.aod[0] in (0.0, np.pi)

    def test_deterministic(self):
        a = sample_paths(np.random.default_rng(5), 4, 16)
        b = sample_paths(np.random.default_rng(5), 4, 16)
        for f in ("alpha", "tau", "aoa", "aod"):
            assert np.array_equal(getattr(a, f), getattr(b, f))

    def test_invariants_enforced(self):
        with pytest.raises(PreconditionError):
            PathSet(np.ones(1, complex), np.array([16.0]), np.zeros(1), np.zeros(1))
        with pytest.raises(PreconditionError):
            PathSet(np.ones(1, complex), np.zeros(1), np.array([4.0]), np.zeros(1))
        with pytest.raises(PreconditionError):
            sample_paths(np.random.default_rng(0), 0, 16)


class TestTaps:
    def test_single_path_at_origin(self):
        p = PathSet(np.array([1.0 + 0j]), np.zeros(1), np.array([0.7]), np.array([1.9]), n_c=4)
        taps = channel_taps(p, 4, 8)
        expected = np.sqrt(32) * np.outer(steering_vector(0.7, 8), steering_vector(1.9, 4).conj())
        np.testing.assert_allclose(taps[0], expected, atol=1e-12)
        # other taps hit the Nyquist zeros of the pulse
        assert np.abs(taps[1:]).max() < 1e-12

    def test_matches_naive_sum(self):
        p = sample_paths(np.random.default_rng(11), 16, 16)
        np.testing.assert_allclose(channel_taps(p, 4, 6), naive_taps(p, 4, 6), atol=1e-12)

    def test_zero_gain(self):
        p = sample_paths(np.random.default_rng(1), 3, 8).scaled(0.0)
        assert not np.any(channel_taps(p, 4, 4))

    def test_deterministic_channels(self):
        taps = [channel_taps(sample_paths(np.random.default_rng(9), 5, 16), 8, 8) for _ in range(2)]
        assert np.array_equal(taps[0], taps[1])


class TestFrequency:
    def test_delta_tap(self):
        taps = np.zeros((16, 3, 2), complex)
        taps[0] = np.arange(6).reshape(3, 2)
        H = channel_freq(taps, 16)
        for k in range(16):
            np.testing.assert_allclose(H[k], taps[0])

    def test_direct_sum(self):
        rng = np.random.default_rng(2)
        taps = rng.standard_normal((16, 3, 4)) + 1j * rng.standard_normal((16, 3, 4))
        np.testing.assert_allclose(channel_freq(taps, 16), direct_dft(taps, 16), atol=1e-12)

    def test_parseval(self):
        p = sample_paths(np.random.default_rng(4), 6, 16)
        taps = channel_taps(p, 8, 8)
        H = channel_freq(taps, 16)
        assert np.sum(np.abs(H) ** 2) == pytest.approx(16 * np.sum(np.abs(taps) ** 2), rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2 ** 31), n_t=st.integers(1, 4), n_r=st.integers(1, 4),
           n_paths=st.integers(1, 3))
    def test_brute_force_small(self, seed, n_t, n_r, n_paths):
        p = sample_paths(np.random.default_rng(seed), n_paths, 6)
        H = channel_freq(channel_taps(p, n_t, n_r), 8)
        oracle = direct_dft(naive_taps(p, n_t, n_r), 8)
        scale = max(np.abs(oracle).max(), 1e-30)
        assert np.abs(H - oracle).max() / scale < 1e-12


class TestVirtualLabel:
    def setup_method(self):
        self.d = build_dictionary(8, 16, 16, 32)

    def test_single_path(self):
        p = sample_paths(np.random.default_rng(0), 1, 16, on_grid=True, dictionary=self.d)
        lab = virtual_label(p, self.d, 16)
        assert lab.shape == (16, 32, 16)
        nz = [tuple(np.argwhere(lab[k] > 0)[0]) for k in range(16)]
        assert all(np.count_nonzero(lab[k]) == 1 for k in range(16))
        assert len(set(nz)) == 1

    def test_distinct_cells_count(self):
        p = sample_paths(np.random.default_rng(1), 5, 16, on_grid=True, dictionary=self.d)
        cells = set(zip(*p.cells))
        lab = virtual_label(p, self.d, 16)
        assert np.all(lab >= 0)
        for k in range(16):
            assert np.count_nonzero(lab[k]) == len(cells)

    def test_forward_model(self):
        p = sample_paths(np.random.default_rng(2), 4, 16, on_grid=True, dictionary=self.d)
        delta = virtual_channel(p, self.d, 16)
        H = channel_freq(channel_taps(p, 8, 16), 16)
        recon = np.einsum("rg,kgh,th->krt", self.d.A_R, delta, self.d.A_T.conj())
        np.testing.assert_allclose(recon, H, atol=1e-9)

    def test_off_grid_rejected(self):
        p = sample_paths(np.random.default_rng(3), 2, 16)
        with pytest.raises(PreconditionError):
            virtual_label(p, self.d, 16)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2 ** 31), n_paths=st.integers(1, 8))
    def test_common_support(self, seed, n_paths):
        p = sample_paths(np.random.default_rng(seed), n_paths, 16, on_grid=True, dictionary=self.d)
        lab = virtual_label(p, self.d, 16)
        supports = {tuple(np.flatnonzero(lab[k] > 1e-14)) for k in range(16)}
        assert len(supports) == 1
