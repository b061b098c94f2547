"""Sparse wideband channel estimators: SW-OMP, DL-CS-CE and refined DL-CS-CE.

All estimators share one projection engine (:class:`WLSState`): columns of
the whitened operator are admitted one at a time, the per-subcarrier
least-squares gains are kept through an incrementally grown QR
factorization, and iteration stops once the residual MSE drops to ``eps``.
"""
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .channel import Dictionary, build_dictionary, canonical_index, ind2sub, sub2ind
from .errors import DimensionError, PreconditionError

RANK_TOL = 1e-10


@dataclass
class EstimationResult:
    """Output of one estimator run.

    ``support`` holds linear indices on ``dictionary``'s grid in admission
    order and ``xi`` the matching ``(K, L_hat)`` gains.
    """

    support: np.ndarray
    xi: np.ndarray
    dictionary: Dictionary
    mse_trace: list
    refined: bool = False
    timing: float = 0.0
    warnings: list = field(default_factory=list)
    coarse_support: np.ndarray | None = None
    subcarriers: np.ndarray | None = None

    @property
    def L_hat(self):
        return len(self.support)

    @property
    def k(self):
        return self.xi.shape[0]

    @property
    def h_v(self):
        """Sparse virtual-channel vectors, ``(K, G_t*G_r)``."""
        h = np.zeros((self.k, self.dictionary.size), dtype=complex)
        if self.L_hat:
            h[:, self.support] = self.xi
        return h

    @property
    def H_hat(self):
        """Reconstructed channels ``(K, Nr, Nt)``: ``sum_l xi_l a_R a_T^H``."""
        d = self.dictionary
        if not self.L_hat:
            return np.zeros((self.k, d.n_r, d.n_t), dtype=complex)
        i_aoa, i_aod = ind2sub(d.g_r, d.g_t, np.asarray(self.support))
        return np.einsum("kl,rl,tl->krt", self.xi, d.A_R[:, i_aoa], d.A_T[:, i_aod].conj())

    @property
    def cells(self):
        """``(i_aoa, i_aod)`` subscripts of the support."""
        d = self.dictionary
        return ind2sub(d.g_r, d.g_t, np.asarray(self.support, dtype=int))


class WLSState:
    """Least squares of ``y_w[k]`` on a growing column set, for all ``k`` at once.

    A column whose component orthogonal to the current span is at most
    ``RANK_TOL`` times the largest admitted column norm is rejected, which
    keeps the factorization well conditioned and the residual MSE strictly
    decreasing.
    """

    def __init__(self, y_w):
        y_w = np.asarray(y_w)
        self.k, self.n = y_w.shape
        self.Y = y_w.T.copy()  # (n, K)
        self.Q = np.zeros((self.n, 0), dtype=complex)
        self.R = np.zeros((0, 0), dtype=complex)
        self.Z = np.zeros((0, self.k), dtype=complex)  # Q^H Y
        self.residual = self.Y.copy()
        self.col_max = 0.0

    @property
    def size(self):
        return self.Q.shape[1]

    def mse(self):
        return float(np.sum(np.abs(self.residual) ** 2) / (self.k * self.n))

    def try_add(self, col):
        col = np.asarray(col, dtype=complex)
        norm = float(np.linalg.norm(col))
        col_max = max(self.col_max, norm)
        coef = self.Q.conj().T @ col
        v = col - self.Q @ coef
        if self.size:
            c2 = self.Q.conj().T @ v
            v -= self.Q @ c2
            coef += c2
        nv = float(np.linalg.norm(v))
        if norm == 0.0 or nv <= RANK_TOL * col_max:
            return False
        self.col_max = col_max
        q = v / nv
        L = self.size
        R = np.zeros((L + 1, L + 1), dtype=complex)
        R[:L, :L] = self.R
        R[:L, L] = coef
        R[L, L] = nv
        self.R = R
        self.Q = np.column_stack([self.Q, q])
        z = q.conj() @ self.residual  # equals q^H Y since q is orthogonal to the old span
        self.Z = np.vstack([self.Z, z[None, :]])
        self.residual = self.residual - np.outer(q, z)
        return True

    def gains(self):
        """Least-squares coefficients, ``(K, size)``."""
        if not self.size:
            return np.zeros((self.k, 0), dtype=complex)
        return solve_triangular(self.R, self.Z, lower=False).T

    def projector(self):
        return self.Q @ self.Q.conj().T


def strongest_subcarriers(y, k_p):
    """Indices of the ``k_p`` subcarriers with the largest ``||y[k]||^2`` (ties: lowest index)."""
    y = np.asarray(y)
    k = y.shape[0]
    if not 1 <= k_p <= k:
        raise DimensionError(f"K_p must lie in [1, {k}], got {k_p}")
    energy = np.sum(np.abs(y) ** 2, axis=1)
    order = np.lexsort((np.arange(k), -energy))
    return np.sort(order[:k_p])


def correlate(upsilon_w, r):
    """``Upsilon_w^H r[k]`` for each row of ``r``: ``(K', G_t*G_r)``."""
    return np.asarray(r) @ upsilon_w.conj()


def amplitude_image(c, g_r, g_t):
    """Column-major ``G_r x G_t`` image(s) of ``|c|``."""
    c = np.asarray(c)
    a = np.abs(c).reshape(c.shape[:-1] + (g_t, g_r))
    return np.swapaxes(a, -1, -2)


def vec_image(img):
    """Column-major vectorization of ``(..., G_r, G_t)`` images."""
    img = np.asarray(img)
    return np.swapaxes(img, -1, -2).reshape(img.shape[:-2] + (-1,))


def estimate_amplitudes(denoiser, images):
    """Denoise ``(K_p, G_r, G_t)`` amplitude images and vectorize: ``(K_p, G_r*G_t)``."""
    images = np.asarray(images)
    if images.ndim != 3:
        raise DimensionError(f"expected (K_p, G_r, G_t) images, got {images.shape}")
    out = np.asarray(denoiser(images))
    if out.shape != images.shape:
        raise DimensionError(f"denoiser returned shape {out.shape} for input {images.shape}")
    return vec_image(out)


def support_scores(g_hat):
    """``sum_k |g_hat[k]|`` with a fixed summation order, so the ranking ignores row order."""
    g_hat = np.abs(np.asarray(g_hat))
    if g_hat.ndim == 1:
        return g_hat
    return np.sort(g_hat, axis=0).sum(axis=0)


def _ranking(scores):
    """Indices by descending score, lowest index first among equals."""
    scores = np.asarray(scores)
    return np.lexsort((np.arange(scores.size), -scores))


def _finish(state, support, dictionary, trace, t0, warn, **extra):
    return EstimationResult(np.asarray(support, dtype=int), state.gains(), dictionary,
                            trace, timing=time.perf_counter() - t0, warnings=warn, **extra)


def reconstruct_channel(g_hat, upsilon_w, y_w, eps, dictionary, max_iter=None):
    """Rank-ordered support admission with WLS projection.

    ``g_hat`` is ``(K_p, G)`` (or a precomputed ``(G,)`` score vector).
    Columns are admitted in descending order of ``sum_k |g_hat[k]|`` until the
    residual MSE is at most ``eps``.
    """
    t0 = time.perf_counter()
    if not eps > 0:
        raise PreconditionError("stopping threshold eps must be positive")
    score = support_scores(g_hat)
    if score.size != upsilon_w.shape[1]:
        raise DimensionError("amplitude vector length does not match the dictionary")
    order = _ranking(score)
    state = WLSState(y_w)
    support, trace, warn = [], [], []
    budget = dictionary.size if max_iter is None else min(max_iter, dictionary.size)
    for j in order[:budget]:
        if not state.try_add(upsilon_w[:, j]):
            warn.append(f"skipped column {int(j)}: in span of the current support")
            continue
        support.append(int(j))
        trace.append(state.mse())
        if trace[-1] <= eps:
            break
    return _finish(state, support, dictionary, trace, t0, warn)


def _column_norms(B, A):
    """``||B a||`` for every column ``a`` of ``A``, via the small Gram matrix ``B^H B``."""
    gram = B.conj().T @ B
    sq = np.real(np.einsum("ij,ij->j", A.conj(), gram @ A))
    return np.sqrt(np.maximum(sq, np.finfo(float).tiny))


class RefinementOperator:
    """Fixed-angle slices of ``Phi_w kron(conj(A_T^r), A_R^r)`` and their correlations.

    Correlating ``y`` with the column for steering vectors ``(a_T, a_R)``
    equals ``conj(a_T)^T Z a_R`` with ``Z = y^H Phi_w`` reshaped to
    ``(Nt, Nr)``, so a scan over one refined axis costs a small
    matrix-vector product once ``Z`` is known. With ``normalize`` each
    score is divided by its column norm, i.e. the length of the projection
    of ``y`` onto the column; otherwise raw correlations are returned.
    """

    def __init__(self, phi_w, dictionary, coarse, normalize=True):
        self.dictionary = dictionary
        self.coarse = coarse
        self.normalize = normalize
        n = phi_w.shape[0]
        self.phi3 = phi_w.reshape(n, dictionary.n_t, dictionary.n_r)
        self._norms = {}  # column norms only depend on the fixed angle

    def project(self, y_sel):
        """``Z[k] = y_sel[k]^H Phi_w`` as ``(K', Nt, Nr)``."""
        return np.einsum("km,mtr->ktr", np.asarray(y_sel).conj(), self.phi3)

    def _cached(self, key, compute):
        if key is None:
            return compute()
        if key not in self._norms:
            self._norms[key] = compute()
        return self._norms[key]

    def aoa_scores(self, Z, aod_vec, key=None):
        """``sum_k |y_k^H column|`` for every refined AoA with the AoD fixed.

        ``key`` names the fixed AoD (any hashable) so its column norms are
        computed once.
        """
        A_R = self.dictionary.A_R
        s = np.abs((aod_vec.conj() @ Z) @ A_R).sum(axis=0)
        if self.normalize:
            s = s / self._cached(("aod", key), lambda: _column_norms(
                np.einsum("mtr,t->mr", self.phi3, aod_vec.conj()), A_R))
        return s

    def aod_scores(self, Z, aoa_vec, key=None):
        """``sum_k |y_k^H column|`` for every refined AoD with the AoA fixed."""
        A_Tc = self.dictionary.A_T.conj()
        s = np.abs((Z @ aoa_vec) @ A_Tc).sum(axis=0)
        if self.normalize:
            s = s / self._cached(("aoa", key), lambda: _column_norms(self.phi3 @ aoa_vec, A_Tc))
        return s

    def column(self, i_aoa, i_aod):
        d = self.dictionary
        b = np.einsum("mtr,t->mr", self.phi3, d.A_T[:, i_aod].conj())
        return b @ d.A_R[:, i_aoa]


def refine_support(i_aoa_d, i_aod_d, op, Z, aoa_first=True):
    """Two-step refinement of one coarse detection. Returns ``(j*, i_aoa*, i_aod*)``.

    ``Z`` is :meth:`RefinementOperator.project` of the whitened observations
    on the strongest subcarriers. The first pass fixes the coarse angle of
    one side and scans the refined grid of the other; the second pass
    repeats both scans with refined angles only.
    """
    rd, cd = op.dictionary, op.coarse

    def aoa(vec, key):
        return canonical_index(int(np.argmax(op.aoa_scores(Z, vec, key))), rd.g_r)

    def aod(vec, key):
        return canonical_index(int(np.argmax(op.aod_scores(Z, vec, key))), rd.g_t)

    if aoa_first:
        i_aoa = aoa(cd.A_T[:, i_aod_d], ("coarse", i_aod_d))
        i_aod = aod(rd.A_R[:, i_aoa], i_aoa)
        i_aoa = aoa(rd.A_T[:, i_aod], i_aod)
        i_aod = aod(rd.A_R[:, i_aoa], i_aoa)
    else:
        i_aod = aod(cd.A_R[:, i_aoa_d], ("coarse", i_aoa_d))
        i_aoa = aoa(rd.A_T[:, i_aod], i_aod)
        i_aod = aod(rd.A_R[:, i_aoa], i_aoa)
        i_aoa = aoa(rd.A_T[:, i_aod], i_aod)
    return sub2ind(rd.g_r, rd.g_t, i_aoa, i_aod), i_aoa, i_aod


def reconstruct_refined(g_hat, phi_w, y_w, eps, coarse, refined, subcarriers,
                        aoa_first=None, refine_on="residual", normalize=True, max_iter=None):
    """Algorithm-2 reconstruction: every coarse admission is refined before projection.

    ``refine_on="residual"`` (default) scans with the current residual, so
    each refinement looks for what the admitted support does not yet
    explain; ``"observations"`` scans ``y_w`` itself every time.
    ``normalize`` (default) scores refined columns by projection length;
    without it the raw correlation ``sum_k |column^H y_w[k]|`` is used.
    """
    t0 = time.perf_counter()
    if not eps > 0:
        raise PreconditionError("stopping threshold eps must be positive")
    if refined.g_r < coarse.g_r or refined.g_t < coarse.g_t:
        raise DimensionError("refined grids must be at least as fine as the coarse grids")
    if refine_on not in ("observations", "residual"):
        raise ValueError(f"unknown refine_on {refine_on!r}")
    if aoa_first is None:
        aoa_first = coarse.n_r >= coarse.n_t
    score = support_scores(g_hat)
    order = _ranking(score)
    op = RefinementOperator(phi_w, refined, coarse, normalize)
    state = WLSState(y_w)
    subcarriers = np.asarray(subcarriers)
    support, coarse_used, trace, warn = [], [], [], []
    seen = set()
    budget = coarse.size if max_iter is None else min(max_iter, coarse.size)
    Z = op.project(np.asarray(y_w)[subcarriers])
    for j in order[:budget]:
        i_aoa_d, i_aod_d = ind2sub(coarse.g_r, coarse.g_t, int(j))
        if refine_on == "residual" and state.size:
            Z = op.project(state.residual.T[subcarriers])
        j_star, i_aoa, i_aod = refine_support(i_aoa_d, i_aod_d, op, Z, aoa_first)
        if j_star in seen:
            continue
        seen.add(j_star)
        if not state.try_add(op.column(i_aoa, i_aod)):
            warn.append(f"skipped refined column {j_star}: in span of the current support")
            continue
        support.append(j_star)
        coarse_used.append(int(j))
        trace.append(state.mse())
        if trace[-1] <= eps:
            break
    return _finish(state, support, refined, trace, t0, warn, refined=True,
                   coarse_support=np.asarray(coarse_used, dtype=int), subcarriers=subcarriers)


def sw_omp(y_w, upsilon_w, eps, dictionary, max_iter=None):
    """Simultaneous weighted OMP on the whitened model.

    Each iteration picks ``argmax_p sum_k |[Upsilon_w^H r[k]]_p|`` over all
    subcarriers, then reprojects exactly as :func:`reconstruct_channel`.
    """
    t0 = time.perf_counter()
    if not eps > 0:
        raise PreconditionError("stopping threshold eps must be positive")
    state = WLSState(y_w)
    support, trace, warn = [], [], []
    blocked = np.zeros(upsilon_w.shape[1], dtype=bool)
    budget = dictionary.size if max_iter is None else min(max_iter, dictionary.size)
    while len(support) < budget and not blocked.all():
        score = np.abs(state.residual.T.conj() @ upsilon_w).sum(axis=0)
        score[blocked] = -1.0
        j = int(np.argmax(score))
        blocked[j] = True
        if not state.try_add(upsilon_w[:, j]):
            warn.append(f"skipped column {j}: in span of the current support")
            continue
        support.append(j)
        trace.append(state.mse())
        if trace[-1] <= eps:
            break
    return _finish(state, support, dictionary, trace, t0, warn)


def estimate_noise_variance(y_w, upsilon_w, support):
    """ML noise variance: mean squared residual after projecting onto the support columns."""
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        raise PreconditionError("noise-variance estimate needs a nonempty support")
    y_w = np.asarray(y_w)
    A = upsilon_w[:, support]
    coef, *_ = np.linalg.lstsq(A, y_w.T, rcond=RANK_TOL)
    r = y_w.T - A @ coef
    return float(np.sum(np.abs(r) ** 2) / r.size)


def correlation_images(meas, subcarriers):
    """Amplitude images ``C_alpha[k]`` for the chosen subcarriers: ``(K_p, G_r, G_t)``."""
    d = meas.dictionary
    c = correlate(meas.Upsilon_w, meas.y_w[subcarriers])
    return amplitude_image(c, d.g_r, d.g_t)


def detect_amplitudes(meas, denoiser, k_p):
    """Subcarrier selection, correlation and denoising. Returns ``(subcarriers, g_hat, seconds)``."""
    t0 = time.perf_counter()
    ks = strongest_subcarriers(meas.y, k_p)
    g_hat = estimate_amplitudes(denoiser, correlation_images(meas, ks))
    return ks, g_hat, time.perf_counter() - t0


def dl_cs_ce(meas, denoiser, k_p, eps, detection=None):
    """Algorithm 1 end to end. ``detection`` reuses a :func:`detect_amplitudes` result."""
    ks, g_hat, t_det = detection if detection is not None else detect_amplitudes(meas, denoiser, k_p)
    res = reconstruct_channel(g_hat, meas.Upsilon_w, meas.y_w, eps, meas.dictionary)
    res.timing += t_det
    res.subcarriers = ks
    return res


def refined_dl_cs_ce(meas, denoiser, k_p, eps, refined, detection=None, **kwargs):
    """Algorithm 2 end to end on the ``refined`` dictionary."""
    ks, g_hat, t_det = detection if detection is not None else detect_amplitudes(meas, denoiser, k_p)
    res = reconstruct_refined(g_hat, meas.Phi_w, meas.y_w, eps, meas.dictionary, refined, ks, **kwargs)
    res.timing += t_det
    return res


def refined_dictionary(coarse, g_t_r, g_r_r):
    return build_dictionary(coarse.n_t, coarse.n_r, g_t_r, g_r_r)
