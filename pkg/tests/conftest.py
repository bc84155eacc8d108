from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from fwlse.csvtable import parse_csv
from fwlse.ols import DesignSpec
from fwlse.strata import StratifiedData

settings.register_profile("ci", derandomize=True, deadline=None, max_examples=60)
settings.load_profile("ci")

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def random_spec(rng, n=None, K=None, L=None, n_clusters=None, n_range=(20, 200)):
    """Standard-normal design; ``K``/``L``/``n`` drawn when not given."""
    n = int(rng.integers(n_range[0], n_range[1] + 1)) if n is None else n
    K = int(rng.integers(0, 9)) if K is None else K
    L = int(rng.integers(1, 9)) if L is None else L
    clusters = None
    if n_clusters is not None:
        labels = rng.integers(0, n_clusters, n)
        # pin one random row per label so no cluster is empty
        labels[rng.choice(n, n_clusters, replace=False)] = np.arange(n_clusters)
        clusters = [f"g{v}" for v in labels]
    return DesignSpec(
        y=rng.standard_normal(n),
        x1=rng.standard_normal((n, K)),
        x2=rng.standard_normal((n, L)),
        cluster_ids=clusters,
    )


PROPENSITIES = (Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(3, 4))


def random_stratified(rng, K=None, max_size=50):
    """Strata with e_k drawn from PROPENSITIES and n_k in [4, max_size]."""
    K = int(rng.integers(1, 11)) if K is None else K
    y, z, s = [], [], []
    for k in range(K):
        e = PROPENSITIES[int(rng.integers(len(PROPENSITIES)))]
        sizes = [m for m in range(4, max_size + 1) if m % e.denominator == 0]
        n_k = int(rng.choice(sizes))
        n1 = int(n_k * e)
        zk = rng.permutation([1] * n1 + [0] * (n_k - n1))
        # heterogeneous effect per stratum plus heteroskedastic noise
        yk = rng.normal() + rng.normal(scale=2.0) * zk + rng.standard_normal(n_k) * (1 + zk)
        y.extend(yk)
        z.extend(zk)
        s.extend([f"s{k}"] * n_k)
    order = rng.permutation(len(y))
    return StratifiedData(
        np.array(y)[order], np.array(z)[order], [s[i] for i in order]
    )


def assert_rel_close(actual, desired, rtol):
    """Elementwise relative comparison; the absolute floor only guards entries
    that are exactly zero in ``desired``."""
    desired = np.asarray(desired, dtype=float)
    atol = 1e-15 * float(np.max(np.abs(desired))) if desired.size else 0.0
    np.testing.assert_allclose(actual, desired, rtol=rtol, atol=atol)


@pytest.fixture(scope="session")
def auto_table():
    return parse_csv((DATA / "auto.csv").read_bytes())


@pytest.fixture(scope="session")
def auto_spec(auto_table):
    t = auto_table
    n = t.n
    return DesignSpec(
        y=t.numeric("price"),
        x1=np.column_stack([np.ones(n), t.numeric("displacement")]),
        x2=t.numeric("weight"),
        cluster_ids=t.labels("rep78"),
        names=("_cons", "displacement", "weight"),
    )


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE_LINES = []


class Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.done = False

    def record(self, passed, detail):
        self.done = True
        line = f"criterion {self.number} {'PASS' if passed else 'FAIL'}  {self.title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed


@pytest.fixture
def criterion():
    made = []

    def make(number, title):
        made.append(Criterion(number, title))
        return made[-1]

    yield make
    for c in made:
        if not c.done:
            c.record(False, "raised before completing")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
