from contextlib import contextmanager

import numpy as np
import pytest

from gitrack import HmmModel, bidiagonal_transition, confusion_matrix
from gitrack.hmm import N_STAGES, default_pi

ACCEPTANCE_KEY = pytest.StashKey[list]()


def random_model(rng, pi=None):
    """A random valid left-to-right model with strictly positive emissions."""
    a = np.zeros((N_STAGES, N_STAGES))
    for i in range(N_STAGES - 1):
        a[i, i] = rng.uniform(0.05, 0.95)
        a[i, i + 1] = 1.0 - a[i, i]
    a[-1, -1] = 1.0
    b = rng.dirichlet(np.ones(N_STAGES), size=N_STAGES)
    if pi is None:
        pi = rng.dirichlet(np.ones(N_STAGES))
    return HmmModel(pi, a, b)


@pytest.fixture
def standard_model():
    return HmmModel(default_pi(), bidiagonal_transition(0.99), confusion_matrix(0.97))


@pytest.fixture
def criterion(request):
    """Context manager recording one acceptance criterion's outcome."""
    log = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    @contextmanager
    def check(number, title):
        notes = {}
        try:
            yield notes
        except BaseException as exc:
            log.append((number, title, False, f"{type(exc).__name__}: {exc}".splitlines()[0]))
            raise
        log.append((number, title, True, ", ".join(f"{k}={v}" for k, v in notes.items())))

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(ACCEPTANCE_KEY, [])
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(log):
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] {number:>2}. {title}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
