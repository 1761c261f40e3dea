"""Online WAIC accumulation over h-vectors, finalization and checkpoints.

The state holds, per checkpoint fraction and partition element, one online
logSumExp (for lppd) and one Welford reducer (for p_WAIC). Its size depends
on ``M`` and the number of fractions only, never on the number of samples.
"""

import hashlib
import json
import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .accumulators import (
    LogSumExpState,
    WelfordState,
    lse_finalize,
    lse_init,
    lse_step,
    welford_finalize,
    welford_init,
    welford_step,
)
from .exceptions import (
    CorruptCheckpointError,
    InsufficientSamplesError,
    IntegrityError,
    NumericalError,
)
from .predictive import PredictiveConfig


class WaicState(NamedTuple):
    mode: str
    K: int
    fractions: tuple
    partition_digest: str
    count: int
    lppd: LogSumExpState  # fields shaped (F, M)
    pwaic: WelfordState  # fields shaped (F, M)
    neg_inf: np.ndarray  # (F, M) number of -inf h values seen

    @property
    def M(self):
        return self.neg_inf.shape[1]

    @property
    def nbytes(self):
        """Bytes of numeric storage; constant in the number of samples."""
        arrays = (self.lppd.current_max, self.lppd.current_sum, self.pwaic.mean,
                  self.pwaic.m2, self.neg_inf)
        return sum(np.asarray(a).nbytes for a in arrays) + 8


@dataclass(frozen=True, eq=False)
class WaicSummary:
    fraction: float
    waic: float
    lppd: float
    p_waic: float
    lppd_elements: np.ndarray
    p_waic_elements: np.ndarray


@dataclass(frozen=True, eq=False)
class WaicResult:
    """Finalized WAIC, one :class:`WaicSummary` per checkpoint fraction.

    The top-level ``waic``/``lppd``/``p_waic`` read the full-``K`` summary.
    """

    mode: str
    K: int
    M: int
    S: int
    summaries: tuple

    @property
    def final(self):
        return self.summaries[-1]

    @property
    def waic(self):
        return self.final.waic

    @property
    def lppd(self):
        return self.final.lppd

    @property
    def p_waic(self):
        return self.final.p_waic

    def at(self, fraction):
        for summary in self.summaries:
            if summary.fraction == fraction:
                return summary
        raise KeyError(f"no summary for fraction {fraction}")

    def to_dict(self):
        return {
            "mode": self.mode, "K": self.K, "M": self.M, "S": self.S,
            "summaries": [
                {
                    "fraction": s.fraction, "waic": s.waic, "lppd": s.lppd, "p_waic": s.p_waic,
                    "lppd_elements": s.lppd_elements.tolist(),
                    "p_waic_elements": s.p_waic_elements.tolist(),
                }
                for s in self.summaries
            ],
        }


def waic_init(partition, config=None):
    """Fresh state sized for ``partition`` and the fractions of ``config``."""
    config = config or PredictiveConfig()
    M = partition.n_elements if hasattr(partition, "n_elements") else int(partition)
    if M < 1:
        raise IntegrityError("WAIC needs at least one partition element")
    digest = partition.digest() if hasattr(partition, "digest") else ""
    shape = (len(config.fractions), M)
    return WaicState(config.mode, config.K, tuple(config.fractions), digest, 0,
                     lse_init(shape), welford_init(shape), np.zeros(shape, dtype=np.int64))


def _as_h(state, h):
    h = np.asarray(h, dtype=np.float64)
    F, M = state.neg_inf.shape
    if h.ndim == 1 and F == 1:
        h = h[None, :]
    if h.shape != (F, M):
        raise IntegrityError(f"h has shape {h.shape}, state expects {(F, M)}")
    # one pass catches NaN and +inf
    if not (h < np.inf).all():
        f, m = np.argwhere(~(h < np.inf))[0]
        raise NumericalError(f"h value {h[f, m]!r} at element {m} (fraction {state.fractions[f]}) is not usable")
    return h


def waic_update(state, h):
    """Fold one posterior sample's h-vector(s) into the state.

    ``h`` is ``(F, M)``, or ``(M,)`` for a single-fraction state. An element
    whose h is ``-inf`` keeps contributing to lppd; its p_WAIC finalizes to
    ``+inf``.
    """
    h = _as_h(state, h)
    lppd, pwaic = state.lppd, state.pwaic
    dead = h == -np.inf
    any_dead = dead.any()
    if state.count == 0:
        new_max, new_sum = h.copy(), np.ones_like(h)
    else:
        # a -inf running max implies an earlier -inf entry
        finite = not any_dead and not state.neg_inf.any()
        new_max, new_sum = lse_step(lppd.current_max, lppd.current_sum, h, finite)
    if any_dead:
        # leave the Welford reducer unchanged for -inf entries
        h_w = np.where(dead, pwaic.mean, h)
        count, mean, m2 = welford_step(pwaic.count, pwaic.mean, pwaic.m2, h_w)
        mean = np.where(dead, pwaic.mean, mean)
        m2 = np.where(dead, pwaic.m2, m2)
        neg_inf = state.neg_inf + dead
    else:
        count, mean, m2 = welford_step(pwaic.count, pwaic.mean, pwaic.m2, h)
        neg_inf = state.neg_inf
    return WaicState(state.mode, state.K, state.fractions, state.partition_digest, state.count + 1,
                     LogSumExpState(lppd.count + 1, new_max, new_sum), WelfordState(count, mean, m2),
                     neg_inf)


def waic_finalize(state):
    """lppd, p_WAIC and WAIC per fraction."""
    if state.count < 2:
        raise InsufficientSamplesError(f"WAIC needs at least 2 samples, got {state.count}")
    lppd_m = np.atleast_2d(lse_finalize(state.lppd, state.count))
    pwaic_m = np.atleast_2d(welford_finalize(state.pwaic))
    pwaic_m = np.where(state.neg_inf > 0, np.inf, pwaic_m)
    summaries = []
    for f, fraction in enumerate(state.fractions):
        lppd = float(np.sum(lppd_m[f]))
        p_waic = float(np.sum(pwaic_m[f]))
        summaries.append(WaicSummary(fraction, -2.0 * (lppd - p_waic), lppd, p_waic,
                                     lppd_m[f].copy(), pwaic_m[f].copy()))
    return WaicResult(state.mode, state.K, state.M, state.count, tuple(summaries))


_MAGIC = b"SWAICKPT"
_VERSION = 1
_DIGEST_LEN = 32


def checkpoint_save(state):
    """Serialize ``state`` to bytes (versioned, little-endian, SHA-256 trailer)."""
    header = json.dumps({
        "mode": state.mode, "K": state.K, "fractions": list(state.fractions),
        "partition_digest": state.partition_digest, "shape": list(state.neg_inf.shape),
    }, sort_keys=True).encode()
    parts = [
        _MAGIC,
        struct.pack("<II", _VERSION, len(header)),
        header,
        struct.pack("<QQQ", state.count, state.lppd.count, state.pwaic.count),
    ]
    for arr in (state.lppd.current_max, state.lppd.current_sum, state.pwaic.mean, state.pwaic.m2):
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(state.neg_inf, dtype="<i8").tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def checkpoint_load(blob):
    """Inverse of :func:`checkpoint_save`; validates version, length and digest."""
    blob = bytes(blob)
    fixed = len(_MAGIC) + 8
    if len(blob) < fixed + _DIGEST_LEN or not blob.startswith(_MAGIC):
        raise CorruptCheckpointError("not a WAIC checkpoint or truncated header")
    body, digest = blob[:-_DIGEST_LEN], blob[-_DIGEST_LEN:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptCheckpointError("checkpoint digest mismatch (truncated or modified)")
    version, hlen = struct.unpack_from("<II", blob, len(_MAGIC))
    if version != _VERSION:
        raise CorruptCheckpointError(f"checkpoint format version {version}, expected {_VERSION}")
    try:
        header = json.loads(body[fixed:fixed + hlen])
        F, M = header["shape"]
    except (ValueError, KeyError) as exc:
        raise CorruptCheckpointError(f"unreadable checkpoint header: {exc}") from None
    offset = fixed + hlen
    n = F * M
    if len(body) != offset + 24 + 5 * 8 * n:
        raise CorruptCheckpointError("checkpoint payload length does not match its header")
    count, lse_count, w_count = struct.unpack_from("<QQQ", body, offset)
    offset += 24
    arrays = []
    for dtype in ("<f8", "<f8", "<f8", "<f8", "<i8"):
        arrays.append(np.frombuffer(body, dtype=dtype, count=n, offset=offset).reshape(F, M).astype(dtype[1:]))
        offset += 8 * n
    cmax, csum, mean, m2, neg_inf = arrays
    return WaicState(header["mode"], header["K"], tuple(header["fractions"]),
                     header["partition_digest"], count,
                     LogSumExpState(lse_count, cmax, csum), WelfordState(w_count, mean, m2),
                     neg_inf.astype(np.int64))


def states_equal(a, b):
    """Bit-for-bit comparison of two states."""
    same_meta = (a.mode, a.K, a.fractions, a.partition_digest, a.count, a.lppd.count, a.pwaic.count) == \
        (b.mode, b.K, b.fractions, b.partition_digest, b.count, b.lppd.count, b.pwaic.count)
    if not same_meta:
        return False
    pairs = [(a.lppd.current_max, b.lppd.current_max), (a.lppd.current_sum, b.lppd.current_sum),
             (a.pwaic.mean, b.pwaic.mean), (a.pwaic.m2, b.pwaic.m2), (a.neg_inf, b.neg_inf)]
    return all(np.asarray(x).tobytes() == np.asarray(y).tobytes() and np.shape(x) == np.shape(y)
               for x, y in pairs)


class WaicEngine:
    """Mutable convenience wrapper around the functional state."""

    def __init__(self, partition, config=None):
        self.config = config or PredictiveConfig()
        self.state = waic_init(partition, self.config)

    def update(self, h):
        self.state = waic_update(self.state, h)
        return self

    def finalize(self):
        return waic_finalize(self.state)

    @property
    def count(self):
        return self.state.count
