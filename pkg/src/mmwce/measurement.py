"""Hybrid pilot training frames, measurement operators and noise whitening."""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigError, DimensionError, FactorizationError


@dataclass(frozen=True)
class TrainingFrames:
    """Frequency-flat pilot precoders/combiners for ``M`` training frames.

    ``F`` is ``(M, Nt, Lt)``, ``W`` is ``(M, Nr, Lr)``, ``q`` is ``(M, Lt)``
    and ``pilots`` is ``(M, K)``.
    """

    F: np.ndarray
    W: np.ndarray
    q: np.ndarray
    pilots: np.ndarray
    n_q: int

    @property
    def m(self):
        return self.F.shape[0]

    @property
    def n_t(self):
        return self.F.shape[1]

    @property
    def n_r(self):
        return self.W.shape[1]

    @property
    def l_t(self):
        return self.F.shape[2]

    @property
    def l_r(self):
        return self.W.shape[2]

    def subset(self, m):
        """The first ``m`` frames."""
        return TrainingFrames(self.F[:m], self.W[:m], self.q[:m], self.pilots[:m], self.n_q)


def quantized_phases(rng, shape, n_q):
    """Unit-modulus entries with phases drawn uniformly from ``2*pi*i/2**n_q``."""
    levels = 2 ** n_q
    return np.exp(2j * np.pi * rng.integers(0, levels, size=shape) / levels)


def generate_training_frames(rng, m, n_t, n_r, l_t, l_r, n_q, k):
    """Pseudorandom phase-quantized training frames.

    Precoder entries have squared modulus ``1/n_t``, combiner entries
    ``1/n_r``; ``q`` carries quantized phases scaled to ``1/sqrt(l_t)`` so that
    ``E||F q||^2 = 1``. Pilot symbols are 1.
    """
    if not (1 <= l_t < n_t and 1 <= l_r < n_r):
        raise ConfigError(f"hybrid constraint violated: need Lt < Nt and Lr < Nr "
                          f"(got Lt={l_t}, Nt={n_t}, Lr={l_r}, Nr={n_r})")
    if n_q < 1 or m < 1 or k < 1:
        raise ConfigError("N_Q, M and K must all be >= 1")
    F = quantized_phases(rng, (m, n_t, l_t), n_q) / np.sqrt(n_t)
    W = quantized_phases(rng, (m, n_r, l_r), n_q) / np.sqrt(n_r)
    q = quantized_phases(rng, (m, l_t), n_q) / np.sqrt(l_t)
    return TrainingFrames(F, W, q, np.ones((m, k), dtype=complex), n_q)


def measurement_matrix(frames):
    """Stacked ``Phi`` with block ``m`` equal to ``kron((F q)^T, W^H)``."""
    x = np.einsum("mtl,ml->mt", frames.F, frames.q)
    wh = frames.W.conj().transpose(0, 2, 1)
    blocks = x[:, None, :, None] * wh[:, :, None, :]  # (M, Lr, Nt, Nr)
    return blocks.reshape(frames.m * frames.l_r, frames.n_t * frames.n_r)


def synthesize_received(H, frames, sigma2, rng):
    """Pilot observations ``y[k]``, shape ``(K, M*Lr)``.

    Each frame sees ``W^H H[k] F q t[k] + W^H n`` with ``n ~ CN(0, sigma2 I)``;
    the pilot symbol is divided out afterwards.
    """
    H = np.asarray(H)
    if H.ndim != 3 or H.shape[1:] != (frames.n_r, frames.n_t):
        raise DimensionError(f"channel shape {H.shape} does not match frames "
                             f"(Nr={frames.n_r}, Nt={frames.n_t})")
    k = H.shape[0]
    if frames.pilots.shape[1] < k:
        raise DimensionError("fewer pilot symbols than subcarriers")
    x = np.einsum("mtl,ml->mt", frames.F, frames.q)
    t = frames.pilots[:, :k].T  # (K, M)
    rx = np.einsum("krt,mt->kmr", H, x) * t[:, :, None]
    if sigma2 > 0:
        shape = (k, frames.m, frames.n_r)
        rx = rx + np.sqrt(sigma2 / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    y = np.einsum("mrl,kmr->kml", frames.W.conj(), rx) / t[:, :, None]
    return y.reshape(k, frames.m * frames.l_r)


def noise_covariance(frames):
    """Block-diagonal combined-noise covariance ``C_w`` and its upper Cholesky factor.

    Returns ``(C_w, D_w)`` with ``D_w^H D_w = C_w``.
    """
    blocks = np.einsum("mrl,mrj->mlj", frames.W.conj(), frames.W)
    n = frames.m * frames.l_r
    C = np.zeros((n, n), dtype=complex)
    D = np.zeros((n, n), dtype=complex)
    lr = frames.l_r
    for m, blk in enumerate(blocks):
        try:
            low = np.linalg.cholesky(blk)
        except np.linalg.LinAlgError:
            raise FactorizationError(
                f"combiner Gram matrix of frame {m} is not positive definite", frame=m
            ) from None
        s = slice(m * lr, (m + 1) * lr)
        C[s, s] = blk
        D[s, s] = low.conj().T
    return C, D


def whiten_apply(D, x, block=None):
    """``D^{-H} x`` for upper-triangular ``D``.

    With ``block`` set, ``D`` is taken to be block diagonal with square
    blocks of that size, which is much cheaper for long frame stacks.
    """
    if np.any(np.abs(np.diag(D)) == 0):
        raise FactorizationError("whitening factor is singular")
    if block is None:
        return solve_triangular(D, x, trans="C", lower=False)
    n = D.shape[0]
    nb = n // block
    idx = np.arange(nb)[:, None] * block + np.arange(block)
    blocks = D[idx[:, :, None], idx[:, None, :]]  # (nb, b, b)
    x = np.asarray(x)
    xb = x.reshape(nb, block, -1)
    out = np.linalg.solve(blocks.conj().transpose(0, 2, 1), xb)
    return out.reshape(x.shape)


def whiten(Phi, Psi, D, y):
    """Whitened operator ``D^{-H} Phi Psi`` and observations ``D^{-H} y[k]``.

    ``y`` is ``(K, M*Lr)``; the returned ``y_w`` has the same layout.
    """
    Phi_w = whiten_apply(D, Phi)
    y_w = whiten_apply(D, np.asarray(y).T).T
    return Phi_w @ Psi, y_w


def apply_dictionary(Phi_w, A_T, A_R):
    """``Phi_w @ kron(conj(A_T), A_R)`` without forming the Kronecker product."""
    n_meas = Phi_w.shape[0]
    n_t, g_t = A_T.shape
    n_r, g_r = A_R.shape
    phi3 = Phi_w.reshape(n_meas, n_t, n_r)
    t1 = phi3 @ A_R  # (meas, Nt, Gr)
    t2 = np.swapaxes(t1, 1, 2) @ A_T.conj()  # (meas, Gr, Gt)
    return np.swapaxes(t2, 1, 2).reshape(n_meas, g_t * g_r)


@dataclass
class MeasurementSet:
    """Observations and operators for one channel-estimation instance.

    ``y`` and ``y_w`` are ``(K, M*Lr)``; ``Upsilon_w`` is ``(M*Lr, Gt*Gr)``.
    The dictionary ``Psi`` is kept implicit (see :meth:`psi`).
    """

    y: np.ndarray
    Phi: np.ndarray
    C_w: np.ndarray
    D_w: np.ndarray
    Phi_w: np.ndarray
    Upsilon_w: np.ndarray
    y_w: np.ndarray
    sigma2: float
    dictionary: object
    frames: TrainingFrames

    @property
    def k(self):
        return self.y.shape[0]

    @property
    def n_meas(self):
        return self.y.shape[1]

    def psi(self):
        return self.dictionary.psi()

    def upsilon_for(self, dictionary):
        """Whitened operator on another dictionary (e.g. a refinement grid)."""
        return apply_dictionary(self.Phi_w, dictionary.A_T, dictionary.A_R)


def prepare_operators(frames, dictionary):
    """Frame-dependent quantities that can be computed before any pilot arrives.

    Returns ``(Phi, C_w, D_w, Phi_w, Upsilon_w)``.
    """
    Phi = measurement_matrix(frames)
    C, D = noise_covariance(frames)
    Phi_w = whiten_apply(D, Phi, block=frames.l_r)
    return Phi, C, D, Phi_w, apply_dictionary(Phi_w, dictionary.A_T, dictionary.A_R)


def build_measurement(y, frames, dictionary, sigma2, operators=None):
    """Assemble a :class:`MeasurementSet`, reusing precomputed ``operators``."""
    if operators is None:
        operators = prepare_operators(frames, dictionary)
    Phi, C, D, Phi_w, Ups = operators
    y_w = whiten_apply(D, np.asarray(y).T, block=frames.l_r).T
    return MeasurementSet(y, Phi, C, D, Phi_w, Ups, y_w, sigma2, dictionary, frames)
