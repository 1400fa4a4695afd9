import numpy as np
import pytest

from gitrack import SimConfig, generate_corpus, generate_study
from gitrack.errors import ConfigInvalid
from gitrack.hmm import confusion_matrix
from gitrack.metrics import confusion

SHORT = ((5, 10), (50, 100), (80, 160), (40, 90))


def test_identity_emission_is_noiseless():
    s = generate_study(SimConfig(SHORT, np.eye(4), seed=1, studies=1), 0)
    assert np.array_equal(s.observed, s.truth)


def test_truth_shape():
    config = SimConfig(SHORT, confusion_matrix(0.9), seed=3, studies=20)
    for s in generate_corpus(config):
        assert s.truth[0] == 0 and s.truth[-1] == 3
        assert np.all(np.diff(s.truth) >= 0)
        counts = np.bincount(s.truth, minlength=4)
        for n, (lo, hi) in zip(counts, SHORT):
            assert lo <= n <= hi
        assert len(s.observed) == len(s.truth)


def test_empirical_confusion_matches_emission():
    config = SimConfig(((25000, 25000),) * 4, confusion_matrix(0.97), seed=11, studies=1)
    s = generate_study(config, 0)
    assert len(s) == 100_000
    counts = confusion(s.observed, s.truth)
    empirical = counts / counts.sum(axis=1, keepdims=True)
    np.testing.assert_allclose(empirical, confusion_matrix(0.97), atol=0.005)


def test_deterministic_per_index():
    config = SimConfig(SHORT, confusion_matrix(0.9), seed=5, studies=4)
    assert generate_study(config, 2) == generate_study(config, 2)
    assert generate_corpus(config)[2] == generate_study(config, 2)


def test_corpus_size_and_ids():
    corpus = generate_corpus(SimConfig(SHORT, confusion_matrix(0.97), seed=0, studies=85))
    assert len(corpus) == 85
    assert corpus[0].study_id == "sim-000" and corpus[-1].study_id == "sim-084"
    assert len(generate_corpus(SimConfig(SHORT, seed=0, studies=1))) == 1


def test_seeds_differ():
    a = generate_corpus(SimConfig(SHORT, seed=1, studies=3))
    b = generate_corpus(SimConfig(SHORT, seed=2, studies=3))
    assert any(x != y for x, y in zip(a, b))


def test_burst_mode_raises_error_near_transitions():
    base = SimConfig(((400, 400),) * 4, confusion_matrix(0.97), seed=9, studies=1)
    burst = SimConfig(((400, 400),) * 4, confusion_matrix(0.97), seed=9, studies=1,
                      burst_radius=20, burst_correct=0.5)
    calm, noisy = generate_study(base, 0), generate_study(burst, 0)
    near = np.zeros(1600, dtype=bool)
    for start in (400, 800, 1200):
        near[start - 20:start + 21] = True
    assert np.mean(noisy.observed[near] != noisy.truth[near]) > 0.3
    assert np.array_equal(calm.truth, noisy.truth)


@pytest.mark.parametrize("kwargs", [
    dict(stage_duration_ranges=((10, 5), (1, 2), (1, 2), (1, 2))),
    dict(stage_duration_ranges=((1, 2),) * 3),
    dict(emission=np.full((4, 4), 0.3)),
    dict(studies=0),
    dict(seed=-1),
    dict(burst_radius=5),
])
def test_invalid_config(kwargs):
    with pytest.raises(ConfigInvalid):
        SimConfig(**kwargs)
