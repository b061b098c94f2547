import numpy as np
import pytest

from mmwce.channel import build_dictionary, channel_freq, channel_taps, sample_paths
from mmwce.measurement import build_measurement, generate_training_frames, synthesize_received


def make_instance(seed, n_paths=1, sigma2=0.0, m=20, n_t=4, n_r=8, g_t=8, g_r=16, k=4,
                  l_t=2, l_r=2, on_grid=True, dictionary=None, grid_dictionary=None):
    """Small end-to-end instance: ``(paths, H, meas)``.

    ``grid_dictionary`` places on-grid paths on a grid other than the
    measurement dictionary's (e.g. a refinement grid).
    """
    rng = np.random.default_rng(seed)
    d = dictionary or build_dictionary(n_t, n_r, g_t, g_r)
    paths = sample_paths(rng, n_paths, 4, on_grid=on_grid, dictionary=grid_dictionary or d)
    H = channel_freq(channel_taps(paths, d.n_t, d.n_r), k)
    fr = generate_training_frames(rng, m, d.n_t, d.n_r, l_t, l_r, 2, k)
    y = synthesize_received(H, fr, sigma2, rng if sigma2 > 0 else None)
    return paths, H, build_measurement(y, fr, d, sigma2)


@pytest.fixture
def instance():
    return make_instance


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
