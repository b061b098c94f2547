"""Online-stage runtime comparison of the estimators."""
import time

import numpy as np

from ..channel import build_dictionary, channel_freq, channel_taps, sample_paths
from ..denoiser import init_weights
from ..estimators import detect_amplitudes, reconstruct_channel, reconstruct_refined, sw_omp
from ..measurement import apply_dictionary, build_measurement, generate_training_frames, prepare_operators, synthesize_received
from .simulate import snr_to_sigma2

BENCH_COLUMNS = ["estimator", "grid", "median_s", "mean_s", "runs"]


def benchmark_runtimes(cfg, denoiser=None, runs=None, seed=None, progress=None):
    """Median online runtimes at ``cfg.bench_snr_db`` and ``M = cfg.m_list[-1]``.

    Frames and every frame-dependent operator (including the 8N SW-OMP
    dictionary operator) are prepared once, as they would be offline; each
    run draws a fresh channel and noise. Without a denoiser an untrained
    network is used, which costs the same time as a trained one.

    Returns ``(rows, ratio)`` where ``ratio`` is refined-8N over SW-OMP-8N.
    """
    runs = cfg.bench_runs if runs is None else runs
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng([seed, 99])
    m = cfg.m_list[-1]
    coarse = build_dictionary(cfg.n_t, cfg.n_r, cfg.g_t, cfg.g_r)
    fine = build_dictionary(cfg.n_t, cfg.n_r, cfg.g_t_r, cfg.g_r_r)
    if denoiser is None:
        denoiser = init_weights(np.random.default_rng(seed), image_shape=[cfg.g_r, cfg.g_t])
    frames = generate_training_frames(rng, m, cfg.n_t, cfg.n_r, cfg.l_t, cfg.l_r, cfg.n_q, cfg.k)
    ops = prepare_operators(frames, coarse)
    ups_fine = apply_dictionary(ops[3], fine.A_T, fine.A_R)
    sigma2 = snr_to_sigma2(cfg.bench_snr_db)
    eps = cfg.eps_mult * sigma2
    times = {"sw_omp_2N": [], "sw_omp_8N": [], "dl_cs_ce": [], "refined_2N": [], "refined_8N": []}
    for _ in range(runs):
        paths = sample_paths(rng, cfg.n_paths, cfg.n_c, cfg.ts, rolloff=cfg.rolloff)
        H = channel_freq(channel_taps(paths, cfg.n_t, cfg.n_r), cfg.k)
        y = synthesize_received(H, frames, sigma2, rng)
        meas = build_measurement(y, frames, coarse, sigma2, ops)

        t0 = time.perf_counter()
        sw_omp(meas.y_w, meas.Upsilon_w, eps, coarse)
        times["sw_omp_2N"].append(time.perf_counter() - t0)

        t0 = time.perf_counter()
        sw_omp(meas.y_w, ups_fine, eps, fine)
        times["sw_omp_8N"].append(time.perf_counter() - t0)

        ks, g_hat, t_det = detect_amplitudes(meas, denoiser, cfg.k_p)
        t0 = time.perf_counter()
        reconstruct_channel(g_hat, meas.Upsilon_w, meas.y_w, eps, coarse)
        times["dl_cs_ce"].append(t_det + time.perf_counter() - t0)

        t0 = time.perf_counter()
        reconstruct_refined(g_hat, meas.Phi_w, meas.y_w, eps, coarse, coarse, ks,
                            refine_on=cfg.refine_on, normalize=cfg.refine_normalize)
        times["refined_2N"].append(t_det + time.perf_counter() - t0)

        t0 = time.perf_counter()
        reconstruct_refined(g_hat, meas.Phi_w, meas.y_w, eps, coarse, fine, ks,
                            refine_on=cfg.refine_on, normalize=cfg.refine_normalize)
        times["refined_8N"].append(t_det + time.perf_counter() - t0)
        if progress is not None:
            progress(times)
    grids = {"sw_omp_2N": "2N", "sw_omp_8N": "8N", "dl_cs_ce": "2N", "refined_2N": "2N", "refined_8N": "8N"}
    rows = [{"estimator": name, "grid": grids[name], "median_s": float(np.median(t)),
             "mean_s": float(np.mean(t)), "runs": len(t)} for name, t in times.items()]
    ratio = float(np.median(times["refined_8N"]) / np.median(times["sw_omp_8N"]))
    return rows, ratio
