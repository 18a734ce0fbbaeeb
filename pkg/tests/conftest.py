import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from levelscope.lob_data import LobEvent, split_dataset  # noqa: E402
from levelscope.synthgen import SynthConfig, generate  # noqa: E402


def make_event(mid=100.0, day=0, ts=0, spread=0.02, step=0.01, vol=100.0, date=""):
    """A clean ten-level snapshot centred on ``mid``."""
    ask = tuple(mid + spread / 2 + step * k for k in range(10))
    bid = tuple(mid - spread / 2 - step * k for k in range(10))
    return LobEvent(ts, day, ask, (vol,) * 10, bid, (vol,) * 10, date)


def events_from_mids(mids, day=0):
    return [make_event(m, day=day, ts=i) for i, m in enumerate(mids)]


@pytest.fixture(scope="session")
def small_dataset():
    events = generate(SynthConfig(days=4, events_per_day=400, seed=11))
    return split_dataset(events, 3, 1, 0.25, 10, 10, 0.002)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
