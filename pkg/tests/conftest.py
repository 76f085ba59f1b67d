import numpy as np
import pytest

from mfxdma.series import AlignedPair, ReturnSeries

# acceptance checks append (label, passed, detail) here; the terminal
# summary prints one line per criterion
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


def make_pair(xv: np.ndarray, yv: np.ndarray, start: str = "2000-01-01") -> AlignedPair:
    dates = np.datetime64(start, "D") + np.arange(xv.size)
    return AlignedPair(
        x=ReturnSeries(label="x", dates=dates, values=np.asarray(xv, dtype=np.float64)),
        y=ReturnSeries(label="y", dates=dates, values=np.asarray(yv, dtype=np.float64)),
    )


def write_series_csv(path, values, start="2000-01-01", header="date,value"):
    dates = np.datetime64(start, "D") + np.arange(len(values))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for d, v in zip(dates, values):
            fh.write(f"{d},{float(v)!r}\n")
    return path


@pytest.hookimpl(trylast=True)
def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in ACCEPTANCE_LINES:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {label}: {detail}")
