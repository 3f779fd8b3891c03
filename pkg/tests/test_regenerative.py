import numpy as np
import pytest

from returnstats.distributions import ClusterSizeDist
from returnstats.regenerative import (RegenSpec, SymbolStream,
                                      _block_lengths, _size_biased_first_block,
                                      generate_stationary, level_measure,
                                      regen_cluster_stats,
                                      regen_counting_distribution)
from returnstats.rngstreams import trial_rng

SEED = 424242
LAM = ClusterSizeDist(np.array([0.5, 0.3, 0.2]))


def test_spec_validation():
    with pytest.raises(ValueError):
        RegenSpec(np.array([0.5, 0.4]), "smith")           # not normalized
    with pytest.raises(ValueError):
        RegenSpec(np.array([1.0]), "bogus")
    with pytest.raises(ValueError):
        RegenSpec(np.array([1.0]), "fixed_lengths")        # needs cluster law


def test_symbol_law_is_inverse_square():
    spec = RegenSpec.smith(k_cap=100)
    k = np.arange(1, 101, dtype=float)
    want = (1 / k**2) / (1 / k**2).sum()
    np.testing.assert_allclose(spec.symbol_probs, want, atol=1e-15)
    assert spec.k_cap == 100


def test_level_measure_is_the_symbol_tail():
    spec = RegenSpec.smith(k_cap=50)
    assert level_measure(spec, 0) == pytest.approx(1.0)
    assert level_measure(spec, 10) == pytest.approx(spec.symbol_probs[10:].sum())
    with pytest.raises(ValueError):
        level_measure(spec, -1)


def test_mean_block_length():
    assert RegenSpec.smith(100).mean_block_length() == 2.0
    assert RegenSpec.fixed_lengths(LAM, 100).mean_block_length() == pytest.approx(1.7)


def test_smith_block_lengths_conditional_law():
    # given symbol k, the block is long (length k+1) with probability 1/k
    spec = RegenSpec.smith(10)
    rng = trial_rng(SEED, 0)
    symbols = np.full(200_000, 2, dtype=np.int64)
    lens = _block_lengths(spec, symbols, rng)
    assert set(np.unique(lens)) == {1, 3}
    frac_long = np.mean(lens == 3)
    assert abs(frac_long - 0.5) < 4 * np.sqrt(0.25 / symbols.size)
    # E[length | k] = 2 for every k
    assert abs(lens.mean() - 2.0) < 0.01


def test_fixed_lengths_block_law():
    spec = RegenSpec.fixed_lengths(LAM, 100)
    rng = trial_rng(SEED, 1)
    lens = _block_lengths(spec, np.ones(100_000, dtype=np.int64), rng)
    freqs = np.bincount(lens, minlength=4)[1:4] / lens.size
    np.testing.assert_allclose(freqs, [0.5, 0.3, 0.2], atol=0.01)


def test_size_biased_first_block_law():
    # the block covering a stationary time is length-biased: ell lambda_ell
    spec = RegenSpec.fixed_lengths(LAM, 100)
    rng = trial_rng(SEED, 2)
    lens = np.array([_size_biased_first_block(spec, rng)[1] for _ in range(20_000)])
    want = np.arange(1, 4) * LAM.lambdas / 1.7
    freqs = np.bincount(lens, minlength=4)[1:4] / lens.size
    for i in range(3):
        se = np.sqrt(want[i] * (1 - want[i]) / lens.size)
        assert abs(freqs[i] - want[i]) < 4 * se


def test_stream_blocks_are_constant_runs():
    spec = RegenSpec.fixed_lengths(LAM, 50)
    s = generate_stationary(spec, 5000, (SEED, 0))
    assert s.symbols.size == 5000
    b = s.block_boundaries
    assert b[0] == 0 and np.all(np.diff(b) >= 1)
    for i in range(min(200, b.size - 1)):
        run = s.symbols[b[i] : b[i + 1]]
        assert np.all(run == run[0])
        if i > 0:  # interior blocks obey the block rule's length support
            assert 1 <= run.size <= 3


def test_stationary_symbol_frequencies():
    # mean block length is symbol-independent in both rules, so the
    # stationary symbol law equals gamma
    spec = RegenSpec.smith(20)
    s = generate_stationary(spec, 400_000, (SEED, 3))
    freq1 = np.mean(s.symbols == 1)
    want = spec.symbol_probs[0]
    assert abs(freq1 - want) < 0.01


def test_streams_are_deterministic_per_trial():
    spec = RegenSpec.smith(100)
    a = generate_stationary(spec, 1000, (SEED, 7))
    b = generate_stationary(spec, 1000, (SEED, 7))
    c = generate_stationary(spec, 1000, (SEED, 8))
    np.testing.assert_array_equal(a.symbols, b.symbols)
    assert not np.array_equal(a.symbols, c.symbols)


def test_symbol_stream_csv_and_validation():
    s = SymbolStream(np.array([2, 2, 5]), np.array([0, 2]))
    lines = s.to_csv().splitlines()
    assert lines[0] == "index,symbol" and lines[1] == "0,2" and lines[3] == "2,5"
    with pytest.raises(ValueError):
        SymbolStream(np.array([1]), np.array([1]))


def test_regen_cluster_stats_extremal_index_identity():
    # extremal index of level sets = 1 / mean cluster size = 1/1.7
    spec = RegenSpec.fixed_lengths(LAM)
    cs = regen_cluster_stats(spec, m=200, K=10, n_streams=8, seed=SEED)
    assert abs(cs.extremal_index - 1 / 1.7) < 0.05
    assert cs.n_entries > 1000


def test_regen_cluster_stats_zero_measure_level():
    spec = RegenSpec.smith(10)
    with pytest.raises(ValueError):
        regen_cluster_stats(spec, m=10, K=5, n_streams=2, seed=SEED)


def test_regen_counting_distribution_mean():
    spec = RegenSpec.fixed_lengths(LAM, 50)
    m = 5
    mu = level_measure(spec, m)
    t, n_trials = 1.0, 3000
    dist = regen_counting_distribution(spec, m, t, n_trials, SEED)
    n_points = int(np.floor(t / mu)) + 1
    k = np.arange(dist.probs.size)
    mean = float(k @ dist.probs)
    second = float((k**2) @ dist.probs)
    se = np.sqrt(max(second - mean**2, 0.0) / n_trials)
    assert abs(mean - n_points * mu) < 4 * se + 1e-9
    assert dist.n_samples == n_trials
