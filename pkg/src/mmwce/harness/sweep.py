"""Monte-Carlo sweeps over SNR and frame count with paired estimator runs."""
import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..denoiser import load_weights
from ..errors import ConfigError
from ..estimators import detect_amplitudes, dl_cs_ce, refined_dl_cs_ce, sw_omp
from ..metrics import genie_wls, nmse, spectral_efficiency, support_success, to_db, true_support
from .config import config_echo
from .simulate import dictionaries, simulate_trial, trial_rng

COLUMNS = ["config_hash", "realization", "estimator", "snr_db", "M", "trial", "nmse_db",
           "ncrlb_db", "support_hit", "L_hat", "se", "se_perfect", "runtime_s"]
TIMING_COLUMNS = ("runtime_s",)


def resolve_denoiser(cfg, denoiser=None):
    """The denoiser to use for DL estimators: explicit object, else the configured weight file."""
    if not cfg.uses_dl() or denoiser is not None:
        return denoiser
    if not cfg.weights:
        raise ConfigError("DL estimators requested but no denoiser weight file configured")
    if not os.path.exists(cfg.weights):
        raise ConfigError(f"denoiser weight file not found: {cfg.weights}")
    return load_weights(cfg.weights)


def success_mode(cfg):
    if cfg.success_mode != "auto":
        return cfg.success_mode
    return "exact" if cfg.on_grid else "neighborhood"


def run_estimators(cfg, trial, coarse, refined, denoiser, estimators=None):
    """Run each configured estimator on one shared realization. Returns ``{name: result}``."""
    meas = trial.meas
    eps = cfg.eps_mult * trial.sigma2
    estimators = cfg.estimators if estimators is None else estimators
    out = {}
    det = None
    if any(e in ("dl_cs_ce", "refined") for e in estimators):
        det = detect_amplitudes(meas, denoiser, cfg.k_p)
    for name in estimators:
        if name == "sw_omp":
            out[name] = sw_omp(meas.y_w, meas.Upsilon_w, eps, coarse)
        elif name == "dl_cs_ce":
            out[name] = dl_cs_ce(meas, denoiser, cfg.k_p, eps, detection=det)
        elif name == "refined":
            out[name] = refined_dl_cs_ce(meas, denoiser, cfg.k_p, eps, refined, detection=det,
                                         refine_on=cfg.refine_on, normalize=cfg.refine_normalize)
    return out


def score_trial(cfg, trial, results, snr_db):
    """One row dict per estimator for a trial (without the identifying columns)."""
    snr_lin = 10.0 ** (snr_db / 10.0)
    H = trial.H
    se_perfect = spectral_efficiency(H, H, snr_lin, cfg.n_s)
    ncrlb = float("nan")
    if cfg.on_grid and cfg.genie:
        support = true_support(trial.paths, trial.meas.dictionary)
        H_genie = genie_wls(trial.meas.y_w, trial.meas.Upsilon_w, support, trial.meas.dictionary)
        ncrlb = to_db(nmse(H_genie, H))
    mode = success_mode(cfg)
    rows = {}
    for name, res in results.items():
        d = res.dictionary
        truth = np.unique(d.nearest(trial.paths.aoa, trial.paths.aod))
        rows[name] = {
            "nmse_db": to_db(nmse(res.H_hat, H)),
            "ncrlb_db": ncrlb,
            "support_hit": int(support_success(res.support, truth, d.g_r, d.g_t, mode)),
            "L_hat": res.L_hat,
            "se": spectral_efficiency(res.H_hat, H, snr_lin, cfg.n_s) if res.L_hat else 0.0,
            "se_perfect": se_perfect,
            "runtime_s": res.timing,
        }
    return rows


_WORKER = {}


def _init_worker(cfg, denoiser):
    _WORKER["cfg"] = cfg
    _WORKER["denoiser"] = denoiser
    _WORKER["dicts"] = dictionaries(cfg)


def _run_point(task):
    cfg, denoiser = _WORKER["cfg"], _WORKER["denoiser"]
    coarse, refined = _WORKER["dicts"]
    snr_i, m_i, t = task
    snr, m = cfg.snr_db[snr_i], cfg.m_list[m_i]
    trial = simulate_trial(cfg, coarse, trial_rng(cfg.seed, snr_i, m_i, t), snr, m)
    results = run_estimators(cfg, trial, coarse, refined, denoiser)
    scored = score_trial(cfg, trial, results, snr)
    realization = trial.realization_hash()
    rows = []
    for name in cfg.estimators:
        row = {"config_hash": cfg.hash(), "realization": realization, "estimator": name,
               "snr_db": snr, "M": m, "trial": t}
        row.update(scored[name])
        rows.append(row)
    return task, rows


def run_sweep(cfg, denoiser=None, progress=None):
    """All (SNR, M, trial) points for every configured estimator, in a fixed order.

    Each point owns an RNG stream keyed by ``(seed, snr index, M index,
    trial)``, so results do not depend on the worker count.
    """
    denoiser = resolve_denoiser(cfg, denoiser)
    tasks = [(si, mi, t) for si in range(len(cfg.snr_db)) for mi in range(len(cfg.m_list))
             for t in range(cfg.trials)]
    done = {}
    if cfg.workers == 1:
        _init_worker(cfg, denoiser)
        for task in tasks:
            done[task] = _run_point(task)[1]
            if progress is not None:
                progress(task)
    else:
        with ProcessPoolExecutor(cfg.workers, initializer=_init_worker,
                                 initargs=(cfg, denoiser)) as pool:
            for task, rows in pool.map(_run_point, tasks, chunksize=4):
                done[task] = rows
                if progress is not None:
                    progress(task)
    return [row for task in tasks for row in done[task]]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows, columns=COLUMNS):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def reproducible_csv(rows):
    """CSV text without the timing columns (the part covered by the reproducibility contract)."""
    return rows_to_csv(rows, [c for c in COLUMNS if c not in TIMING_COLUMNS])


def summarize(rows):
    """Per (estimator, SNR, M): mean/std NMSE (dB of the mean and mean of dB), success rate, etc."""
    groups = {}
    for row in rows:
        groups.setdefault((row["estimator"], row["snr_db"], row["M"]), []).append(row)
    out = []
    for (name, snr, m), grp in groups.items():
        lin = np.array([10 ** (r["nmse_db"] / 10) for r in grp])
        db = np.array([r["nmse_db"] for r in grp])
        ncrlb = np.array([10 ** (r["ncrlb_db"] / 10) for r in grp])
        out.append({
            "estimator": name, "snr_db": snr, "M": m, "trials": len(grp),
            "nmse_db": to_db(lin.mean()),
            "nmse_db_mean": float(db.mean()),
            "nmse_db_std": float(db.std(ddof=1)) if len(grp) > 1 else 0.0,
            "ncrlb_db": to_db(ncrlb.mean()) if np.all(np.isfinite(ncrlb)) else float("nan"),
            "success": float(np.mean([r["support_hit"] for r in grp])),
            "L_hat": float(np.mean([r["L_hat"] for r in grp])),
            "se": float(np.mean([r["se"] for r in grp])),
            "se_perfect": float(np.mean([r["se_perfect"] for r in grp])),
            "runtime_s": float(np.median([r["runtime_s"] for r in grp])),
        })
    return out


SUMMARY_COLUMNS = ["estimator", "snr_db", "M", "trials", "nmse_db", "nmse_db_mean", "nmse_db_std",
                   "ncrlb_db", "success", "L_hat", "se", "se_perfect", "runtime_s"]


def write_outputs(cfg, rows, out_dir):
    """``results.csv``, ``summary.csv`` and ``config.json`` under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for name, text in (("results.csv", rows_to_csv(rows)),
                       ("summary.csv", rows_to_csv(summarize(rows), SUMMARY_COLUMNS)),
                       ("config.json", config_echo(cfg))):
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            fh.write(text)
        paths[name] = path
    return paths


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0
