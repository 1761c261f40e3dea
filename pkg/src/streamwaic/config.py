"""Numerical tolerances and study-scale defaults shared across the package."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # online vs batch logSumExp, relative
    lse_rel: float = 1e-12
    # Welford vs two-pass variance, relative (|x| <= 1e6, S <= 1e5)
    welford_rel: float = 1e-10
    # online engine vs offline oracle, per element, relative
    oracle_rel: float = 1e-10
    # Welford m2 permutation invariance, relative
    permutation_rel: float = 1e-8
    # lower bound on m2 is -m2_eps * scale
    m2_eps: float = 1e-12
    # stream replay equivalence
    replay: float = 1e-12


TOLERANCES = Tolerances()

#: quarter-K diagnostic checkpoints used by marginal WAIC
CHECKPOINT_FRACTIONS = (0.25, 0.5, 0.75, 1.0)
DEFAULT_K = 1000
DEFAULT_BURN_IN = 500
DEFAULT_KEEP = 5000
ESS_THRESHOLD = 100.0
