"""Candidate scoring and top-B selection kernels.

This is the decoder's inner loop: at every step the beam expands into
``unfinished x generable-token`` candidates (plus finished carryovers),
each scored as ``hypothesis score + token log-probability +
strength * penalty``, and the best ``beam_width`` survive under a strict
total order (score descending, then token id ascending, then incoming
beam position ascending; carryovers use token -1).

Two interchangeable implementations exist:

* a numba ``@njit`` kernel doing bounded insertion selection (default
  when numba is importable),
* a pure-numpy path built on ``np.lexsort``.

Set the environment variable ``STORYBEAM_NO_NUMBA=1`` before import to
force the numpy path. Both paths compute scores with identical
floating-point operation order, so their outputs are bit-for-bit equal;
``benchmarks/kernel_bench.py`` compares their speed and re-checks
agreement.
"""

from __future__ import annotations

import os

import numpy as np

from .corpus import FIRST_GENERABLE_ID

ENV_FLAG = "STORYBEAM_NO_NUMBA"

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but stay runnable
    HAVE_NUMBA = False


def _select_numpy(base_aug, logprobs, penalty, strength,
                  unfinished_idx, carry_scores, carry_idx, beam_width):
    n_rows, vocab_size = logprobs.shape
    n_generable = vocab_size - FIRST_GENERABLE_ID
    if n_rows:
        expanded = (base_aug[:, None] + logprobs[:, FIRST_GENERABLE_ID:]) \
            + (strength * penalty[FIRST_GENERABLE_ID:])[None, :]
        exp_scores = expanded.ravel()
        exp_tokens = np.tile(
            np.arange(FIRST_GENERABLE_ID, vocab_size, dtype=np.int64), n_rows)
        exp_beams = np.repeat(unfinished_idx, n_generable)
    else:
        exp_scores = np.empty(0, dtype=np.float64)
        exp_tokens = np.empty(0, dtype=np.int64)
        exp_beams = np.empty(0, dtype=np.int64)
    scores = np.concatenate([exp_scores, carry_scores])
    tokens = np.concatenate(
        [exp_tokens, np.full(carry_scores.shape[0], -1, dtype=np.int64)])
    beams = np.concatenate([exp_beams, carry_idx])
    # lexsort: last key is primary
    order = np.lexsort((beams, tokens, -scores))
    top = order[:min(beam_width, scores.shape[0])]
    return beams[top], tokens[top], scores[top]


def _select_insertion(base_aug, logprobs, penalty, strength,
                      unfinished_idx, carry_scores, carry_idx, beam_width):
    n_rows, vocab_size = logprobs.shape
    n_carry = carry_scores.shape[0]
    total = n_rows * (vocab_size - FIRST_GENERABLE_ID) + n_carry
    k = beam_width if beam_width < total else total
    sel_score = np.empty(k, dtype=np.float64)
    sel_token = np.empty(k, dtype=np.int64)
    sel_beam = np.empty(k, dtype=np.int64)
    size = 0
    for r in range(n_rows):
        beam_pos = unfinished_idx[r]
        base = base_aug[r]
        for v in range(FIRST_GENERABLE_ID, vocab_size):
            score = base + logprobs[r, v] + strength * penalty[v]
            size = _insert_candidate(sel_score, sel_token, sel_beam, size, k,
                                     score, v, beam_pos)
    for c in range(n_carry):
        size = _insert_candidate(sel_score, sel_token, sel_beam, size, k,
                                 carry_scores[c], -1, carry_idx[c])
    return sel_beam[:size], sel_token[:size], sel_score[:size]


def _insert_candidate(scores, tokens, beams, size, k, score, token, beam_pos):
    # ranks before position j iff better under (score desc, token asc, beam asc)
    if size < k:
        j = size
        size += 1
    else:
        if not _ranks_before(score, token, beam_pos,
                             scores[k - 1], tokens[k - 1], beams[k - 1]):
            return size
        j = k - 1
    while j > 0 and _ranks_before(score, token, beam_pos,
                                  scores[j - 1], tokens[j - 1], beams[j - 1]):
        scores[j] = scores[j - 1]
        tokens[j] = tokens[j - 1]
        beams[j] = beams[j - 1]
        j -= 1
    scores[j] = score
    tokens[j] = token
    beams[j] = beam_pos
    return size


def _ranks_before(s1, t1, b1, s2, t2, b2):
    if s1 > s2:
        return True
    if s1 < s2:
        return False
    if t1 != t2:
        return t1 < t2
    return b1 < b2


if HAVE_NUMBA:
    _ranks_before = njit(cache=True)(_ranks_before)
    _insert_candidate = njit(cache=True)(_insert_candidate)
    _select_numba = njit(cache=True)(_select_insertion)
else:  # pragma: no cover
    _select_numba = None


def _initial_backend() -> str:
    flag = os.environ.get(ENV_FLAG, "").strip()
    if flag not in ("", "0") or not HAVE_NUMBA:
        return "numpy"
    return "numba"


_backend = _initial_backend()


def active_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Switch kernel implementation at runtime (mainly for benchmarks/tests)."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise ValueError("numba backend requested but numba is not importable")
    _backend = name


def select_top_candidates(base_aug: np.ndarray, logprobs: np.ndarray,
                          penalty: np.ndarray, strength: float,
                          unfinished_idx: np.ndarray, carry_scores: np.ndarray,
                          carry_idx: np.ndarray, beam_width: int
                          ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (beam positions, token ids, scores) of the kept candidates.

    Token id -1 marks a finished hypothesis carried over unchanged.
    Results are ordered best-first under the strict total order described
    in the module docstring.
    """
    if _backend == "numba":
        return _select_numba(base_aug, logprobs, penalty, strength,
                             unfinished_idx, carry_scores, carry_idx, beam_width)
    return _select_numpy(base_aug, logprobs, penalty, strength,
                         unfinished_idx, carry_scores, carry_idx, beam_width)


def select_top_candidates_numpy(*args) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return _select_numpy(*args)


def select_top_candidates_numba(*args) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if _select_numba is None:
        raise RuntimeError("numba is not available")
    return _select_numba(*args)
