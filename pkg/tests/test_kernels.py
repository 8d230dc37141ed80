"""The numba and numpy selection kernels must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest

from storybeam import kernels


def random_case(rng: np.random.Generator):
    vocab_size = int(rng.integers(4, 10))
    n_unfinished = int(rng.integers(0, 4))
    n_carry = int(rng.integers(0, 3))
    if n_unfinished + n_carry == 0:
        n_unfinished = 1
    base = -rng.random(n_unfinished) * 4
    logprobs = np.log(rng.dirichlet(np.ones(vocab_size - 2), size=n_unfinished))
    full = np.full((n_unfinished, vocab_size), -np.inf)
    full[:, 2:] = logprobs
    # occasional exact zero-probability entries
    if n_unfinished and rng.random() < 0.3:
        full[rng.integers(n_unfinished), rng.integers(2, vocab_size)] = -np.inf
    penalty = np.zeros(vocab_size)
    penalty[4:] = -rng.integers(0, 4, size=max(0, vocab_size - 4)).astype(float)
    strength = float(rng.choice([0.0, 0.5, 2.0]))
    positions = rng.permutation(n_unfinished + n_carry)
    unfinished_idx = np.sort(positions[:n_unfinished]).astype(np.int64)
    carry_idx = np.sort(positions[n_unfinished:]).astype(np.int64)
    carry_scores = -rng.random(n_carry) * 6
    beam_width = int(rng.integers(1, 8))
    return (base, full, penalty, strength, unfinished_idx,
            carry_scores, carry_idx, beam_width)


@pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba unavailable")
def test_numba_matches_numpy_exactly():
    rng = np.random.default_rng(1234)
    for _ in range(400):
        case = random_case(rng)
        got = kernels.select_top_candidates_numba(*case)
        want = kernels.select_top_candidates_numpy(*case)
        for g, w in zip(got, want):
            assert g.tolist() == w.tolist()


def test_numpy_path_orders_by_score_then_token_then_beam():
    base = np.array([0.0])
    logprobs = np.full((1, 6), -np.inf)
    logprobs[0, 2:] = np.log(1 / 4)  # four-way tie
    penalty = np.zeros(6)
    beams, tokens, scores = kernels.select_top_candidates_numpy(
        base, logprobs, penalty, 0.0,
        np.array([0], dtype=np.int64), np.empty(0), np.empty(0, dtype=np.int64), 10)
    assert tokens.tolist() == [2, 3, 4, 5]
    assert np.allclose(scores, np.log(1 / 4))
    assert beams.tolist() == [0, 0, 0, 0]


def test_carryover_wins_score_tie_via_sentinel_token():
    # a finished hypothesis at the same score as an expansion ranks first
    base = np.array([np.log(0.5)])
    logprobs = np.full((1, 5), -np.inf)
    logprobs[0, 4] = 0.0  # candidate lands exactly on log(0.5)
    logprobs[0, 2] = np.log(0.5)
    penalty = np.zeros(5)
    carry = np.array([np.log(0.5)])
    beams, tokens, _ = kernels.select_top_candidates(
        base, logprobs, penalty, 0.0,
        np.array([0], dtype=np.int64), carry, np.array([1], dtype=np.int64), 2)
    assert tokens.tolist() == [-1, 4]
    assert beams.tolist() == [1, 0]


def test_beam_width_larger_than_candidates_returns_everything():
    base = np.array([-1.0])
    logprobs = np.full((1, 5), -np.inf)
    logprobs[0, 2:] = np.log(1 / 3)
    beams, tokens, scores = kernels.select_top_candidates(
        base, logprobs, np.zeros(5), 1.0,
        np.array([0], dtype=np.int64), np.empty(0), np.empty(0, dtype=np.int64), 99)
    assert len(tokens) == 3


def test_set_backend_validates_name():
    with pytest.raises(ValueError, match="unknown backend"):
        kernels.set_backend("cuda")
    previous = kernels.active_backend()
    kernels.set_backend("numpy")
    assert kernels.active_backend() == "numpy"
    kernels.set_backend(previous)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, STORYBEAM_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c",
         "from storybeam import kernels; print(kernels.active_backend())"],
        capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "numpy"
