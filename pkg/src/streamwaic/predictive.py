"""Per-sample log predictive densities ``h_m(theta^s)`` for every partition element.

Conditional densities are read straight off the model. Marginal densities
integrate the latent nodes out by Monte Carlo: ``K`` latent draws are
simulated once per posterior sample and shared by all elements, and an
online logSumExp per element is snapshotted at the quarter-K checkpoints.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .accumulators import lse_finalize, lse_init, lse_update, lse_update_block
from .config import CHECKPOINT_FRACTIONS, DEFAULT_K
from .exceptions import DomainError, IntegrityError
from .model import pointwise_log_density, simulate_latent

CONDITIONAL = "conditional"
MARGINAL = "marginal"
CHUNK_BYTES = 1 << 20  # inner-term rows per chunk: about this many bytes of float64


@dataclass(frozen=True)
class PredictiveConfig:
    """``mode`` and inner Monte Carlo size ``K``.

    Conditional mode always runs with ``K = 1`` and a single fraction.
    """

    mode: str = CONDITIONAL
    K: int = DEFAULT_K

    def __post_init__(self):
        if self.mode not in (CONDITIONAL, MARGINAL):
            raise DomainError(f"mode must be 'conditional' or 'marginal', got {self.mode!r}")
        if int(self.K) != self.K or self.K < 1:
            raise DomainError(f"K must be a positive integer, got {self.K!r}")
        object.__setattr__(self, "K", 1 if self.mode == CONDITIONAL else int(self.K))

    @property
    def fractions(self):
        return CHECKPOINT_FRACTIONS if self.mode == MARGINAL else (1.0,)

    @property
    def checkpoints(self):
        """Inner-draw counts at which marginal snapshots are taken (floor, at least 1)."""
        return tuple(max(1, math.floor(q * self.K)) for q in self.fractions)


def conditional_h(model, partition, sample, reducer=None):
    """``h_m`` = joint log density of element ``m`` given the full parameter vector."""
    reduce = reducer or partition.reducer(model.data_labels)
    return np.asarray(reduce(pointwise_log_density(model, sample)), dtype=np.float64)


def lse_snapshots(log_terms, checkpoints, block_size=None):
    """Online log-mean-exp over rows of ``log_terms`` with prefix snapshots.

    ``log_terms`` has shape ``(K, M)``; row ``k`` is the log density of every
    element under latent draw ``k``. Returns ``(len(checkpoints), M)``.
    ``block_size=1`` runs the strict one-value-at-a-time recurrence.
    Values must already be finite or ``-inf``.
    """
    K, M = log_terms.shape
    state = lse_init((M,))
    out = np.empty((len(checkpoints), M))
    done = 0
    for row, stop in enumerate(checkpoints):
        if stop < done or stop > K:
            raise IntegrityError(f"checkpoint {stop} outside 1..{K} or out of order")
        if block_size == 1:
            for k in range(done, stop):
                state = lse_update(state, log_terms[k])
        else:
            step = block_size or max(stop - done, 1)
            for start in range(done, stop, step):
                state = lse_update_block(state, log_terms[start:min(stop, start + step)], check=False)
        done = stop
        out[row] = lse_finalize(state, stop)
    return out


class PredictiveEvaluator:
    """Computes h-vectors for several (partition, config) variants of one model.

    All marginal variants share one batch of latent draws per posterior
    sample (the largest ``K``); a variant with smaller ``K`` uses a prefix of
    it. The inner terms are evaluated in chunks of draws sized to stay in
    cache, with chunk edges at every checkpoint. ``block_size`` overrides the
    chunk length (``1`` runs the strict one-value-at-a-time recurrence).
    ``n_latent_draws`` counts simulated latent vectors.
    """

    def __init__(self, model, variants, block_size=None):
        self.model = model
        self.variants = [(p, c) for p, c in variants]
        labels = model.data_labels
        self._reducers = [p.reducer(labels) for p, _ in self.variants]
        self._marginal = [i for i, (_, c) in enumerate(self.variants)
                          if c.mode == MARGINAL and model.has_latent]
        self.k_max = max((self.variants[i][1].K for i in self._marginal), default=0)
        self.block_size = block_size
        self._chunk = block_size or max(1, CHUNK_BYTES // (8 * max(len(labels), 1)))
        edges = {k for i in self._marginal for k in self.variants[i][1].checkpoints}
        self._edges = sorted(edges)
        self._scratch = {i: np.empty((min(self._chunk, self.k_max), self.variants[i][0].n_elements))
                         for i in self._marginal}
        self.n_latent_draws = 0
        self.neg_inf_count = 0

    def _marginal_h(self, sample, rng):
        latent_names = {n.name for n in self.model.latent_nodes}
        theta1 = {k: v for k, v in sample.items() if k not in latent_names}
        draws = simulate_latent(self.model, theta1, rng, size=self.k_max)
        self.n_latent_draws += self.k_max
        states = {i: lse_init((self.variants[i][0].n_elements,)) for i in self._marginal}
        snaps = {i: [] for i in self._marginal}
        scratch = self._scratch
        done = 0
        for stop in self._edges:
            for start in range(done, stop, self._chunk):
                end = min(stop, start + self._chunk)
                chunk = {k: v[start:end] for k, v in draws.items()}
                pointwise = pointwise_log_density(self.model, {**theta1, **chunk})
                for i in self._marginal:
                    if start >= self.variants[i][1].K:
                        continue
                    terms = self._reducers[i](pointwise)
                    if self._chunk == 1:
                        states[i] = lse_update(states[i], terms[0])
                    else:
                        states[i] = lse_update_block(states[i], terms, check=False, scratch=scratch[i])
            for i in self._marginal:
                repeats = self.variants[i][1].checkpoints.count(stop)
                if repeats:
                    snaps[i].extend([lse_finalize(states[i], stop)] * repeats)
            done = stop
        return {i: np.array(rows) for i, rows in snaps.items()}

    def __call__(self, sample, rng=None):
        if self.k_max and rng is None:
            raise DomainError("marginal predictive densities need a random generator")
        marginal = self._marginal_h(sample, rng) if self._marginal else {}
        pointwise_cond = None
        out = []
        for i, ((partition, config), reduce) in enumerate(zip(self.variants, self._reducers)):
            if i not in marginal:
                if pointwise_cond is None:
                    pointwise_cond = pointwise_log_density(self.model, sample)
                h = np.asarray(reduce(pointwise_cond), dtype=np.float64)
                out.append(np.tile(h, (len(config.fractions), 1)))
                continue
            h = marginal[i]
            dead = int(np.sum(h[-1] == -np.inf))
            if dead:
                self.neg_inf_count += dead
                warnings.warn(f"{dead} element(s) had zero marginal density in every inner draw",
                              RuntimeWarning, stacklevel=2)
            out.append(h)
        return out


def marginal_h(model, partition, sample, config, rng, block_size=None):
    """Monte Carlo marginal log predictive density, one row per checkpoint fraction.

    Models without latent nodes return the conditional values unchanged
    (and draw nothing from ``rng``).
    """
    if config.mode != MARGINAL:
        config = PredictiveConfig(MARGINAL, config.K)
    evaluator = PredictiveEvaluator(model, [(partition, config)], block_size=block_size)
    return evaluator(sample, rng)[0]
