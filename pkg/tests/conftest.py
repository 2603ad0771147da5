import time

import pytest

from regdfo import benchmark

NOISE_SEEDS = 10
NOISE_LEVEL = 1e-2


def _timed(spec):
    t0 = time.perf_counter()
    records = benchmark.run_benchmark(spec)
    return records, time.perf_counter() - t0


@pytest.fixture(scope="session")
def noiseless_run():
    """Full noiseless matrix: every problem, both solvers, l1(1), budget 100(n+1)."""
    return _timed(benchmark.RunSpec(noise="none", regularizer="l1:1", budget_mult=100))


@pytest.fixture(scope="session")
def noisy_runs():
    """``{noise spec: (records, seconds)}`` for both noise models, 10 seeds each."""
    out = {}
    for kind in ("mult", "add"):
        spec = benchmark.RunSpec(noise=f"{kind}:{NOISE_LEVEL}", seeds=NOISE_SEEDS)
        out[spec.noise] = _timed(spec)
    return out


@pytest.fixture
def report(capsys):
    """Print one ``ACCEPTANCE`` line per criterion, bypassing output capture."""
    def emit(name, ok, detail=""):
        with capsys.disabled():
            print(f"\nACCEPTANCE [{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return ok
    return emit
