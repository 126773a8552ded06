import datetime
import os

import numpy as np
import pytest

from data_ingest import GroupPartition, ReturnPanel
from simulate import DgpSpec, simulate_var
from var_core import VarModel

# K=3 VAR(1) whose companion matrix has eigenvalues 0.8, 0.5 and 0.3.
A_STABLE_3 = np.array(
    [
        [0.8, 0.0, 0.0],
        [0.2, 0.5, 0.0],
        [0.1, -0.1, 0.3],
    ]
)
SIGMA_3 = np.array(
    [
        [1.0, 0.3, 0.1],
        [0.3, 1.5, 0.2],
        [0.1, 0.2, 0.8],
    ]
)


@pytest.fixture
def write_csv(tmp_path):
    """Writes text to tmp_path/name and returns the path."""

    def _write(name, text):
        path = os.path.join(str(tmp_path), name)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        return path

    return _write


@pytest.fixture
def stable_spec():
    return DgpSpec(A=(A_STABLE_3,), sigma_u=SIGMA_3, n=2000, names=("a", "b", "c"), seed=11)


@pytest.fixture
def stable_model():
    return VarModel.from_coefficients(np.zeros(3), [A_STABLE_3], SIGMA_3, names=("a", "b", "c"))


@pytest.fixture
def white_noise_panel():
    rng = np.random.default_rng(20240501)
    return ReturnPanel.from_array(rng.standard_normal((600, 2)), names=("x", "y"))


@pytest.fixture
def simulated_panel(stable_spec):
    partition = GroupPartition({"a": "crypto", "b": "crypto", "c": "other"})
    panel = simulate_var(stable_spec)
    return ReturnPanel(panel.dates, panel.names, panel.values, partition)


def price_csv_text(values, names, start=datetime.date(2021, 1, 1), skip=()):
    """CSV text of a price path exp(cumsum(r/100)) * 100, one row per day."""
    prices = 100.0 * np.exp(np.cumsum(np.vstack([np.zeros(values.shape[1]), values]) / 100.0, axis=0))
    lines = [",".join(["date", *names])]
    for t, row in enumerate(prices):
        if t in skip:
            continue
        day = start + datetime.timedelta(days=t)
        lines.append(",".join([day.isoformat(), *(repr(float(v)) for v in row)]))
    return "\n".join(lines) + "\n"
