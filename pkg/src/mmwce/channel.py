"""Frequency-selective geometric mmWave channels and angular dictionaries.

Conventions used throughout the package:

* ULA steering vectors ``a(angle)[n] = exp(1j*n*pi*cos(angle)) / sqrt(N)``.
* Channel arrays are ``(Nc, Nr, Nt)`` for delay taps and ``(K, Nr, Nt)`` for
  subcarriers.
* Vectorization is column-major. A virtual-channel cell ``(i_aoa, i_aod)``
  on a ``Gr x Gt`` grid has linear index ``i_aod * Gr + i_aoa``, which is the
  column order of ``kron(conj(A_T), A_R)``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, PreconditionError


def steering_vector(angle, n):
    """Unit-norm half-wavelength ULA response of ``n`` elements at ``angle``."""
    if n < 1:
        raise DimensionError(f"antenna count must be >= 1, got {n}")
    k = np.arange(n)
    return np.exp(1j * np.pi * k * np.cos(angle)) / np.sqrt(n)


def steering_matrix(angles, n):
    """Stack :func:`steering_vector` columns for every angle in ``angles``."""
    if n < 1:
        raise DimensionError(f"antenna count must be >= 1, got {n}")
    angles = np.asarray(angles, dtype=float).reshape(-1)
    return np.exp(1j * np.pi * np.outer(np.arange(n), np.cos(angles))) / np.sqrt(n)


def grid_angles(g):
    """Uniform angle grid ``{0, 2*pi/g, ..., 2*pi*(g-1)/g}``."""
    if g < 1:
        raise DimensionError(f"grid size must be >= 1, got {g}")
    return 2 * np.pi * np.arange(g) / g


@dataclass(frozen=True)
class Dictionary:
    """Receive/transmit steering dictionaries on uniform angle grids."""

    A_R: np.ndarray
    A_T: np.ndarray
    grid_aoa: np.ndarray
    grid_aod: np.ndarray

    @property
    def n_r(self):
        return self.A_R.shape[0]

    @property
    def n_t(self):
        return self.A_T.shape[0]

    @property
    def g_r(self):
        return self.A_R.shape[1]

    @property
    def g_t(self):
        return self.A_T.shape[1]

    @property
    def size(self):
        return self.g_r * self.g_t

    def psi(self):
        """Explicit ``kron(conj(A_T), A_R)``; only sensible for small grids."""
        return np.kron(self.A_T.conj(), self.A_R)

    def atoms(self, indices):
        """Columns of ``psi()`` for the given linear indices, ``(Nt*Nr, n)``."""
        i_aoa, i_aod = ind2sub(self.g_r, self.g_t, np.asarray(indices))
        aT = self.A_T[:, i_aod].conj()
        aR = self.A_R[:, i_aoa]
        return (aT[:, None, :] * aR[None, :, :]).reshape(self.n_t * self.n_r, -1)

    def nearest(self, aoa, aod):
        """Linear index of the grid cell closest (in angle) to each path."""
        i_aoa = _nearest_index(aoa, self.g_r)
        i_aod = _nearest_index(aod, self.g_t)
        return sub2ind(self.g_r, self.g_t, i_aoa, i_aod)


def build_dictionary(n_t, n_r, g_t, g_r):
    """Steering dictionaries for ``n_t``/``n_r`` antennas on ``g_t``/``g_r`` grids."""
    for name, val in (("n_t", n_t), ("n_r", n_r), ("g_t", g_t), ("g_r", g_r)):
        if val < 1:
            raise DimensionError(f"{name} must be >= 1, got {val}")
    aoa = grid_angles(g_r)
    aod = grid_angles(g_t)
    return Dictionary(steering_matrix(aoa, n_r), steering_matrix(aod, n_t), aoa, aod)


def ind2sub(g_r, g_t, j):
    """Column-major linear index -> ``(i_aoa, i_aod)``."""
    j = np.asarray(j)
    if np.any(j < 0) or np.any(j >= g_r * g_t):
        raise DimensionError("linear index out of range")
    i_aoa, i_aod = j % g_r, j // g_r
    if i_aoa.ndim == 0:
        return int(i_aoa), int(i_aod)
    return i_aoa, i_aod


def sub2ind(g_r, g_t, i_aoa, i_aod):
    """``(i_aoa, i_aod)`` -> column-major linear index ``i_aod * g_r + i_aoa``."""
    i_aoa = np.asarray(i_aoa)
    i_aod = np.asarray(i_aod)
    if np.any((i_aoa < 0) | (i_aoa >= g_r)) or np.any((i_aod < 0) | (i_aod >= g_t)):
        raise DimensionError("grid subscript out of range")
    j = i_aod * g_r + i_aoa
    return int(j) if j.ndim == 0 else j


def canonical_index(i, g):
    """Smallest grid index with the same steering vector as index ``i``.

    Angles ``2*pi*i/g`` and ``2*pi*(g-i)/g`` share a cosine, and angles
    ``0`` and ``pi`` give the same phase progression ``exp(+-j*pi*n)``.
    """
    i = np.asarray(i) % g
    c = np.minimum(i, (g - i) % g)
    if g % 2 == 0:
        c = np.where(c == g // 2, 0, c)
    return int(c) if c.ndim == 0 else c


def grid_distance(a, b, g):
    """Circular index distance between grid cells, minimized over aliases."""
    a = np.asarray(a) % g
    b = np.asarray(b) % g

    def circ(x, y):
        d = np.abs(x - y) % g
        return np.minimum(d, g - d)

    d = np.minimum(circ(a, b), circ(a, (g - b) % g))
    if g % 2 == 0:
        ends = canonical_index(b, g) == 0
        d = np.where(ends, np.minimum(circ(a, 0), circ(a, g // 2)), d)
    return d


def _nearest_index(angle, g):
    idx = np.rint(np.asarray(angle) * g / (2 * np.pi)).astype(int) % g
    return idx


def raised_cosine(t, rolloff, ts):
    """Raised-cosine impulse response sampled at ``t`` (same units as ``ts``).

    The removable singularities at ``t = 0`` and ``|t| = ts / (2 * rolloff)``
    are replaced by their limits.
    """
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError(f"rolloff must lie in [0, 1], got {rolloff}")
    x = np.asarray(t, dtype=float) / ts
    out = np.sinc(x)
    if rolloff > 0:
        denom = 1.0 - (2.0 * rolloff * x) ** 2
        sing = np.abs(denom) < 1e-10
        safe = np.where(sing, 1.0, denom)
        out = np.where(
            sing,
            (np.pi / 4) * np.sinc(1.0 / (2.0 * rolloff)),
            out * np.cos(np.pi * rolloff * x) / safe,
        )
    return out if out.ndim else float(out)


@dataclass
class PathSet:
    """Multipath parameters of one channel realization.

    Angles are in radians on ``[0, pi]``; delays in the same unit as ``ts``.
    When the set was snapped to a dictionary, ``cells`` holds each path's
    ``(i_aoa, i_aod)`` grid subscripts.
    """

    alpha: np.ndarray
    tau: np.ndarray
    aoa: np.ndarray
    aod: np.ndarray
    ts: float = 1.0
    n_c: int = 16
    path_loss: float = 1.0
    rolloff: float = 0.8
    cells: tuple | None = field(default=None)

    def __post_init__(self):
        n = len(self.alpha)
        if n < 1:
            raise PreconditionError("a path set needs at least one path")
        if not (len(self.tau) == len(self.aoa) == len(self.aod) == n):
            raise DimensionError("path parameter arrays differ in length")
        if np.any(self.tau < 0) or np.any(self.tau >= self.n_c * self.ts):
            raise PreconditionError("path delays must lie in [0, Nc*Ts)")
        for name in ("aoa", "aod"):
            a = getattr(self, name)
            if np.any(a < 0) or np.any(a > np.pi):
                raise PreconditionError(f"{name} must lie in [0, pi]")

    @property
    def n_paths(self):
        return len(self.alpha)

    @property
    def on_grid(self):
        return self.cells is not None

    def scaled(self, factor):
        """Copy with every path gain multiplied by ``factor``."""
        return PathSet(self.alpha * factor, self.tau, self.aoa, self.aod, self.ts,
                       self.n_c, self.path_loss, self.rolloff, self.cells)


def sample_paths(rng, n_paths, n_c, ts=1.0, on_grid=False, dictionary=None, rolloff=0.8):
    """Draw a random :class:`PathSet`.

    Gains are CN(0, 1), delays uniform on ``[0, (n_c-1)*ts]`` and angles
    uniform on ``[0, pi]``. With ``on_grid`` the angles are snapped to the
    nearest angle of ``dictionary``'s grids.
    """
    if n_paths < 1:
        raise PreconditionError(f"need at least one path, got {n_paths}")
    alpha = (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) / np.sqrt(2)
    tau = rng.uniform(0.0, (n_c - 1) * ts, n_paths)
    aoa = rng.uniform(0.0, np.pi, n_paths)
    aod = rng.uniform(0.0, np.pi, n_paths)
    cells = None
    if on_grid:
        if dictionary is None:
            raise PreconditionError("on-grid sampling needs a dictionary")
        i_aoa = _nearest_index(aoa, dictionary.g_r)
        i_aod = _nearest_index(aod, dictionary.g_t)
        aoa = dictionary.grid_aoa[i_aoa]
        aod = dictionary.grid_aod[i_aod]
        cells = (i_aoa, i_aod)
    return PathSet(alpha, tau, aoa, aod, ts, n_c, 1.0, rolloff, cells)


def _path_scale(paths, n_t, n_r):
    return np.sqrt(n_t * n_r / (paths.n_paths * paths.path_loss))


def _pulse_taps(paths):
    """``p_rc(d*Ts - tau_l)`` for every tap ``d`` and path ``l``: ``(Nc, L)``."""
    d = np.arange(paths.n_c)[:, None] * paths.ts
    return raised_cosine(d - paths.tau[None, :], paths.rolloff, paths.ts)


def channel_taps(paths, n_t, n_r):
    """Delay-domain channel taps ``H_d``, shape ``(Nc, Nr, Nt)``."""
    a_r = steering_matrix(paths.aoa, n_r)
    a_t = steering_matrix(paths.aod, n_t)
    w = _path_scale(paths, n_t, n_r) * _pulse_taps(paths) * paths.alpha[None, :]
    return np.einsum("dl,rl,tl->drt", w, a_r, a_t.conj())


def dft_matrix(k, n_c):
    """``exp(-2j*pi*k*d/K)`` for ``k < K`` and ``d < Nc``."""
    return np.exp(-2j * np.pi * np.outer(np.arange(k), np.arange(n_c)) / k)


def channel_freq(taps, k):
    """Per-subcarrier channel ``H[k] = sum_d H_d exp(-2j*pi*k*d/K)``, ``(K, Nr, Nt)``."""
    taps = np.asarray(taps)
    return np.tensordot(dft_matrix(k, taps.shape[0]), taps, axes=(1, 0))


def path_frequency_gains(paths, k, n_t, n_r):
    """Complex gain of every path on every subcarrier, ``(K, L)``."""
    resp = dft_matrix(k, paths.n_c) @ _pulse_taps(paths)
    return _path_scale(paths, n_t, n_r) * paths.alpha[None, :] * resp


def virtual_channel(paths, dictionary, k):
    """Sparse virtual channel ``Delta_v[k]`` of an on-grid path set, ``(K, Gr, Gt)``."""
    if not paths.on_grid:
        raise PreconditionError("virtual channel labels need an on-grid path set")
    i_aoa, i_aod = paths.cells
    if (np.any(np.abs(dictionary.grid_aoa[i_aoa] - paths.aoa) > 1e-12)
            or np.any(np.abs(dictionary.grid_aod[i_aod] - paths.aod) > 1e-12)):
        raise PreconditionError("path set was snapped to a different grid")
    gains = path_frequency_gains(paths, k, dictionary.n_t, dictionary.n_r)
    delta = np.zeros((k, dictionary.g_r, dictionary.g_t), dtype=complex)
    for ell in range(paths.n_paths):
        delta[:, i_aoa[ell], i_aod[ell]] += gains[:, ell]
    return delta


def virtual_label(paths, dictionary, k):
    """Amplitude labels ``|Delta_v[k]|``, ``(K, Gr, Gt)``."""
    return np.abs(virtual_channel(paths, dictionary, k))
