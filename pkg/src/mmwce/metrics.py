"""NMSE, genie-aided WLS floor, support detection and spectral efficiency."""
import numpy as np

from .channel import canonical_index, grid_distance, ind2sub
from .errors import DimensionError, PreconditionError


def nmse(H_hat, H):
    """``sum_k ||H_hat[k] - H[k]||_F^2 / sum_k ||H[k]||_F^2``."""
    H_hat = np.asarray(H_hat)
    H = np.asarray(H)
    if H_hat.shape != H.shape:
        raise DimensionError(f"shape mismatch {H_hat.shape} vs {H.shape}")
    den = float(np.sum(np.abs(H) ** 2))
    if den == 0.0:
        raise PreconditionError("NMSE undefined for an all-zero true channel")
    return float(np.sum(np.abs(H_hat - H) ** 2)) / den


def to_db(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = 10 * np.log10(x)
    return float(out) if out.ndim == 0 else out


def vec_channels(H):
    """Column-major ``vec(H[k])`` for every subcarrier: ``(K, Nr*Nt)``."""
    H = np.asarray(H)
    return np.swapaxes(H, 1, 2).reshape(H.shape[0], -1)


def true_support(paths, dictionary):
    """Distinct linear indices of an on-grid path set on ``dictionary``'s grid."""
    if not paths.on_grid:
        raise PreconditionError("the genie support is only defined for on-grid channels")
    return np.unique(dictionary.nearest(paths.aoa, paths.aod))


def genie_wls(y_w, upsilon_w, support, dictionary):
    """WLS channel estimate with a known support, ``(K, Nr, Nt)``."""
    support = np.asarray(support, dtype=int)
    A = upsilon_w[:, support]
    xi, *_ = np.linalg.lstsq(A, np.asarray(y_w).T, rcond=None)
    i_aoa, i_aod = ind2sub(dictionary.g_r, dictionary.g_t, support)
    return np.einsum("lk,rl,tl->krt", xi, dictionary.A_R[:, i_aoa], dictionary.A_T[:, i_aod].conj())


def genie_ncrlb(paths, H, meas, trials, rng, sigma2=None):
    """Mean NMSE of genie-aided WLS over ``trials`` fresh noise draws.

    Noise is added in the whitened domain, where it is exactly
    ``CN(0, sigma2 I)``.
    """
    support = true_support(paths, meas.dictionary)
    sigma2 = meas.sigma2 if sigma2 is None else sigma2
    y_clean = vec_channels(H) @ meas.Phi_w.T
    A = meas.Upsilon_w[:, support]
    pinv = np.linalg.pinv(A)
    atoms = meas.dictionary.atoms(support)  # (Nt*Nr, L)
    h_true = vec_channels(H)
    den = float(np.sum(np.abs(h_true) ** 2))
    if den == 0.0:
        raise PreconditionError("NMSE undefined for an all-zero true channel")
    total = 0.0
    for _ in range(trials):
        noise = np.sqrt(sigma2 / 2) * (rng.standard_normal(y_clean.shape)
                                       + 1j * rng.standard_normal(y_clean.shape))
        xi = pinv @ (y_clean + noise).T
        total += float(np.sum(np.abs((atoms @ xi).T - h_true) ** 2)) / den
    return total / trials


def support_success(est, true, g_r, g_t, mode="exact"):
    """Whether every true cell was recovered.

    ``exact`` requires each true cell in ``est``; ``neighborhood`` accepts an
    estimated cell within one grid step in both AoA and AoD. Grid indices
    with identical steering vectors (see :func:`canonical_index`) count as
    one cell.
    """
    est = np.asarray(est, dtype=int).reshape(-1)
    true = np.asarray(true, dtype=int).reshape(-1)
    if true.size == 0:
        return True
    if est.size == 0:
        return False
    ea, ed = ind2sub(g_r, g_t, est)
    ta, td = ind2sub(g_r, g_t, true)
    if mode == "exact":
        est_set = set(zip(canonical_index(ea, g_r).tolist(), canonical_index(ed, g_t).tolist()))
        true_cells = zip(canonical_index(ta, g_r).tolist(), canonical_index(td, g_t).tolist())
        return all(cell in est_set for cell in true_cells)
    if mode == "neighborhood":
        da = grid_distance(ta[:, None], ea[None, :], g_r)
        dd = grid_distance(td[:, None], ed[None, :], g_t)
        return bool(np.all(np.any((da <= 1) & (dd <= 1), axis=1)))
    raise ValueError(f"unknown mode {mode!r}")


def spectral_efficiency(H_hat, H, snr, n_s):
    """Average rate with the ``n_s`` dominant singular directions of ``H_hat``.

    ``snr`` is linear. Returns bits/s/Hz averaged over subcarriers.
    """
    H_hat = np.asarray(H_hat)
    H = np.asarray(H)
    if H_hat.shape != H.shape:
        raise DimensionError(f"shape mismatch {H_hat.shape} vs {H.shape}")
    if not 1 <= n_s <= min(H.shape[1:]):
        raise DimensionError(f"N_s must lie in [1, {min(H.shape[1:])}], got {n_s}")
    U, _, Vh = np.linalg.svd(H_hat)
    U = U[:, :, :n_s]
    V = Vh[:, :n_s, :].conj().transpose(0, 2, 1)
    h_eff = U.conj().transpose(0, 2, 1) @ H @ V
    lam = np.linalg.svd(h_eff, compute_uv=False)
    return float(np.mean(np.sum(np.log2(1 + (snr / n_s) * lam ** 2), axis=1)))
