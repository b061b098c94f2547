"""Single-trial simulation and denoiser training-set generation."""
import hashlib
from dataclasses import dataclass

import numpy as np

from ..channel import build_dictionary, channel_freq, channel_taps, sample_paths, virtual_label
from ..estimators import correlation_images, strongest_subcarriers
from ..measurement import build_measurement, generate_training_frames, prepare_operators, synthesize_received


def snr_to_sigma2(snr_db):
    """Noise variance for unit transmit power and unit path loss."""
    return float(10.0 ** (-snr_db / 10.0))


def trial_rng(seed, snr_i, m_i, trial):
    return np.random.default_rng([int(seed), int(snr_i), int(m_i), int(trial)])


@dataclass
class Trial:
    paths: object
    H: np.ndarray
    frames: object
    meas: object
    sigma2: float

    def realization_hash(self):
        """Digest of the channel and the noisy observations shared by all estimators."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.H).tobytes())
        h.update(np.ascontiguousarray(self.meas.y).tobytes())
        return h.hexdigest()[:12]


def dictionaries(cfg):
    coarse = build_dictionary(cfg.n_t, cfg.n_r, cfg.g_t, cfg.g_r)
    refined = build_dictionary(cfg.n_t, cfg.n_r, cfg.g_t_r, cfg.g_r_r)
    return coarse, refined


def simulate_trial(cfg, coarse, rng, snr_db, m, on_grid=None, n_paths=None):
    """Channel, frames and noisy observations for one Monte-Carlo trial.

    Draw order from ``rng``: paths, frames, noise.
    """
    on_grid = cfg.on_grid if on_grid is None else on_grid
    paths = sample_paths(rng, n_paths or cfg.n_paths, cfg.n_c, cfg.ts, on_grid=on_grid,
                         dictionary=coarse, rolloff=cfg.rolloff)
    H = channel_freq(channel_taps(paths, cfg.n_t, cfg.n_r), cfg.k)
    frames = generate_training_frames(rng, m, cfg.n_t, cfg.n_r, cfg.l_t, cfg.l_r, cfg.n_q, cfg.k)
    sigma2 = snr_to_sigma2(snr_db)
    y = synthesize_received(H, frames, sigma2, rng)
    meas = build_measurement(y, frames, coarse, sigma2, prepare_operators(frames, coarse))
    return Trial(paths, H, frames, meas, sigma2)


def generate_pairs(cfg, rng, n_channels=None):
    """Denoiser training pairs ``(C_alpha[k], G[k])`` for the strongest subcarriers.

    Each channel is on-grid with a fresh frame set; its SNR and frame count
    are drawn uniformly from the configured grids. Returns float32 arrays of
    shape ``(n_channels * K_p, G_r, G_t)``.
    """
    coarse = build_dictionary(cfg.n_t, cfg.n_r, cfg.g_t, cfg.g_r)
    n_channels = cfg.dataset_channels if n_channels is None else n_channels
    inputs = np.empty((n_channels * cfg.k_p, cfg.g_r, cfg.g_t), np.float32)
    labels = np.empty_like(inputs)
    for c in range(n_channels):
        snr = cfg.snr_db[rng.integers(len(cfg.snr_db))]
        m = cfg.m_list[rng.integers(len(cfg.m_list))]
        trial = simulate_trial(cfg, coarse, rng, snr, m, on_grid=True)
        ks = strongest_subcarriers(trial.meas.y, cfg.k_p)
        s = slice(c * cfg.k_p, (c + 1) * cfg.k_p)
        labels[s] = virtual_label(trial.paths, coarse, cfg.k)[ks]
        inputs[s] = correlation_images(trial.meas, ks)
    return inputs, labels


def generate_dataset(cfg, rng, path, n_channels=None):
    """Write a training-pair file; returns ``(inputs, labels)``."""
    from ..denoiser import save_dataset

    inputs, labels = generate_pairs(cfg, rng, n_channels)
    try:
        save_dataset(path, inputs, labels, cfg.k_p)
    except OSError as exc:
        raise OSError(f"cannot write dataset file {path}: {exc.strerror}") from exc
    return inputs, labels
