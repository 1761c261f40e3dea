"""Streaming reducers: Welford sample variance and the online logSumExp.

Both states are immutable ``NamedTuple`` values. Every field may be a Python
float or a numpy array; updates act elementwise, which is how the WAIC engine
keeps one reducer per partition element without a Python-level loop.
"""

from typing import NamedTuple, Union

import numpy as np

from .exceptions import DomainError, InsufficientSamplesError, IntegrityError

ArrayLike = Union[float, np.ndarray]


def _out(x):
    x = np.asarray(x, dtype=np.float64)
    return float(x) if x.ndim == 0 else x


class WelfordState(NamedTuple):
    """Running count, mean and sum of squared deviations (``m2``)."""

    count: int
    mean: ArrayLike
    m2: ArrayLike


class LogSumExpState(NamedTuple):
    """Running shifted maximum and the inner sum rescaled to that maximum.

    ``current_sum`` is at least 1 once a value has been seen because the
    running maximum contributes ``exp(0)``.
    """

    count: int
    current_max: ArrayLike
    current_sum: ArrayLike

    @property
    def initialized(self):
        return self.count > 0


def welford_init(shape=()):
    if shape == ():
        return WelfordState(0, 0.0, 0.0)
    return WelfordState(0, np.zeros(shape), np.zeros(shape))


def welford_update(state, x):
    """Fold one value (or one value per element) into ``state``."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        bad = x[~np.isfinite(x)] if x.ndim else x
        raise DomainError(f"Welford update requires finite values, got {np.ravel(bad)[0]!r}")
    count, mean, m2 = welford_step(state.count, state.mean, state.m2, x)
    return WelfordState(count, _out(mean), _out(m2))


def welford_step(count, mean, m2, x):
    """Unchecked two-delta update on raw fields; ``x`` must be finite."""
    count = count + 1
    delta = x - mean
    mean = mean + delta / count
    m2 = m2 + delta * (x - mean)
    return count, mean, m2


def welford_finalize(state):
    """Sample variance ``m2 / (count - 1)``."""
    if state.count < 2:
        raise InsufficientSamplesError(
            f"sample variance needs at least 2 values, got {state.count}"
        )
    return _out(np.asarray(state.m2) / (state.count - 1))


def lse_init(shape=()):
    if shape == ():
        return LogSumExpState(0, -np.inf, 0.0)
    return LogSumExpState(0, np.full(shape, -np.inf), np.zeros(shape))


def _check_lse_input(h):
    h = np.asarray(h, dtype=np.float64)
    bad = np.isnan(h) | (h == np.inf)
    if np.any(bad):
        raise DomainError(f"logSumExp input must be finite or -inf, got {np.ravel(h[bad] if h.ndim else h)[0]!r}")
    return h


def lse_update(state, h):
    """Online logSumExp step for one value per element.

    A value strictly above the running maximum rescales the inner sum by
    ``exp(-(h - max))`` and adds 1; anything else adds ``exp(h - max)``.
    ``-inf`` contributes zero; an element whose every value is ``-inf``
    finalizes to ``-inf``.
    """
    h = _check_lse_input(h)
    if state.count == 0:
        return LogSumExpState(1, _out(h), _out(np.ones_like(h)))
    new_max, new_sum = lse_step(np.asarray(state.current_max, dtype=np.float64),
                                np.asarray(state.current_sum, dtype=np.float64), h)
    return LogSumExpState(state.count + 1, _out(new_max), _out(new_sum))


def lse_step(cur_max, cur_sum, h, finite=False):
    """Unchecked update of ``(max, sum)`` arrays after the first value.

    ``exp(-|d|)`` is ``exp(-d)`` on the rescale branch and ``exp(d)``
    otherwise, so both branches share one exponential and the exponent
    argument is never positive. ``finite=True`` promises that neither
    ``h`` nor ``cur_max`` holds ``-inf`` and skips the fix-up for it.
    """
    if finite:
        d = h - cur_max
        e = np.exp(-np.abs(d))
        return np.maximum(cur_max, h), np.where(d > 0, cur_sum * e + 1.0, cur_sum + e)
    with np.errstate(over="ignore", invalid="ignore"):
        d = h - cur_max
        higher = d > 0
        e = np.exp(-np.abs(d))
    if e.ndim:
        e[np.isnan(e)] = 0.0  # -inf against an all--inf element
    elif e != e:
        e = 0.0
    new_sum = np.where(higher, cur_sum * e + 1.0, cur_sum + e)
    new_max = np.where(higher, h, cur_max)
    return new_max, new_sum


def lse_update_block(state, block, check=True, scratch=None):
    """Fold a block of values (leading axis) into ``state`` at once.

    Equivalent to calling :func:`lse_update` once per row, up to rounding:
    the block is reduced around its own maximum and then merged by
    rescaling whichever side has the smaller maximum. ``check=False`` skips
    input validation for blocks already known to be finite or ``-inf``.
    ``scratch``, if given, is a reusable work array at least as large as
    ``block``; it saves one allocation per call in tight loops.
    """
    block = _check_lse_input(block) if check else np.asarray(block, dtype=np.float64)
    if block.shape[0] == 0:
        return state
    bmax = block.max(axis=0)
    if not (np.isneginf(bmax).any() or (state.count and np.isneginf(state.current_max).any())):
        # no -inf anywhere: every exponent below is <= 0
        if scratch is None or scratch.shape[0] < block.shape[0]:
            scratch = block - bmax
        else:
            scratch = np.subtract(block, bmax, out=scratch[:block.shape[0]])
        np.exp(scratch, out=scratch)
        bsum = scratch.sum(axis=0)
        if state.count == 0:
            return LogSumExpState(block.shape[0], _out(bmax), _out(bsum))
        cur_max = np.asarray(state.current_max, dtype=np.float64)
        new_max = np.maximum(cur_max, bmax)
        new_sum = state.current_sum * np.exp(cur_max - new_max) + bsum * np.exp(bmax - new_max)
        return LogSumExpState(state.count + block.shape[0], _out(new_max), _out(new_sum))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        dead = bmax == -np.inf
        shift = np.where(dead, 0.0, bmax)
        scratch = np.subtract(block, shift)
        np.exp(scratch, out=scratch)
        bsum = scratch.sum(axis=0)
        # all -inf: same flag as the sequential path (max=-inf, sum=1)
        bsum = np.where(dead, 1.0, bsum)
        if state.count == 0:
            new_max, new_sum = bmax, bsum
        else:
            cur_max = np.asarray(state.current_max, dtype=np.float64)
            cur_sum = np.asarray(state.current_sum, dtype=np.float64)
            new_max = np.maximum(cur_max, bmax)
            both_dead = new_max == -np.inf
            ref = np.where(both_dead, 0.0, new_max)
            left = np.where(cur_max == -np.inf, 0.0, cur_sum * np.exp(cur_max - ref))
            right = np.where(dead, 0.0, bsum * np.exp(bmax - ref))
            new_sum = np.where(both_dead, 1.0, left + right)
    return LogSumExpState(state.count + block.shape[0], _out(new_max), _out(new_sum))


def lse_finalize(state, sample_count):
    """``log((1/S) * sum(exp(h_s)))`` from the streamed state."""
    if sample_count < 1:
        raise InsufficientSamplesError("log-mean-exp needs at least one sample")
    if sample_count != state.count:
        raise IntegrityError(
            f"state received {state.count} values but finalize was given S={sample_count}"
        )
    # log(sum) - log(S) first: exactly 0 when every value equals the maximum
    with np.errstate(divide="ignore"):
        return _out(
            np.asarray(state.current_max) + (np.log(state.current_sum) - np.log(sample_count))
        )
