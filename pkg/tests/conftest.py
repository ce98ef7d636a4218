import numpy as np
import pytest

from vanet_losim.scenario import DEFAULTS, SimulationState, config_from_mapping


def random_scene(rng, ring_length=2000.0, max_per_lane=60, **overrides):
    """Random non-overlapping two-lane layout plus a matching config."""
    mapping = {"ring_length": ring_length, "n_1": 5, "n_2": 5, "tx_id": 1}
    mapping.update(overrides)
    cfg = config_from_mapping(mapping)
    length = cfg.dims.length
    xs, lanes = [], []
    for lane in (1, 2):
        while True:
            m = int(rng.integers(1, max_per_lane))
            gaps = length + rng.exponential(rng.uniform(2.0, 40.0), m)
            if ring_length - gaps[:-1].sum() >= length:
                break
        start = rng.uniform(0.0, ring_length)
        x = np.mod(np.concatenate([[0.0], np.cumsum(gaps[:-1])]) + start, ring_length)
        xs.append(x)
        lanes.append(np.full(m, lane, dtype=np.int8))
    x = np.concatenate(xs)
    lane = np.concatenate(lanes)
    state = SimulationState(
        lane=lane, x_prev=x.copy(), x_curr=x, last_change=np.full(len(x), -np.inf)
    )
    return state, cfg


@pytest.fixture
def default_cfg():
    return config_from_mapping(dict(DEFAULTS))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, shown after the run even when output is captured
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
