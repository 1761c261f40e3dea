"""Metropolis-within-Gibbs samplers for the six study models, with online WAIC.

Each scalar node gets a random-walk Metropolis update whose proposal scale
adapts during burn-in only (batches of 50 iterations, target acceptance
0.44). Positive scales move on the log scale and ``phi`` on the atanh scale,
with the Jacobian in the target. Conditionally independent components
(group means ``b_j``; alternate entries of the volatility path ``h_t``) are
updated as independent single-site moves in one vectorized step.

Two extra moves target the strong posterior coupling between hyperparameters
and latent nodes: a joint shift of the location parameter and its latent
nodes (models H, F, P, Z), and, for the volatility models, updates of
``sigma`` and ``phi`` with the standardized AR(1) innovations held fixed.

WAIC is fed after every full sweep of the kept iterations. Kept samples are
not stored; only scalar traces are kept for posterior means and ESS.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .config import DEFAULT_BURN_IN, DEFAULT_KEEP, ESS_THRESHOLD
from .datasets import HierDataset, SvDataset
from .diagnostics import effective_sample_size
from .engine import waic_finalize, waic_init, waic_update
from .exceptions import DomainError, ModelConfigurationError
from .model import normal_logpdf
from .models import (
    F_GROUP_SD,
    HIER_PRIORS,
    SV_PRIORS,
    ar1_logpdf,
    build_model,
    family_of,
    sv_obs_logpdf,
)
from .predictive import MARGINAL, PredictiveConfig, PredictiveEvaluator

TARGET_ACCEPT = 0.44
ADAPT_BATCH = 50


@dataclass(frozen=True)
class McmcConfig:
    burn_in: int = DEFAULT_BURN_IN
    keep: int = DEFAULT_KEEP
    seed: int = 0
    adapt: bool = True
    proposal_scales: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.burn_in < 0:
            raise DomainError("burn_in must be >= 0")
        if self.keep < 1:
            raise DomainError("keep must be >= 1")


class _Proposal:
    """Random-walk scale(s) for one block, adapted in batches."""

    def __init__(self, scale, size=None):
        shape = () if size is None else (size,)
        self.log_scale = np.full(shape, np.log(scale))
        self.accepted = np.zeros(shape)
        self.tried = 0
        self.batches = 0
        self.total_accepted = np.zeros(shape)
        self.total_tried = 0

    @property
    def scale(self):
        return np.exp(self.log_scale)

    def record(self, accepted, adapt):
        self.accepted = self.accepted + accepted
        self.total_accepted = self.total_accepted + accepted
        self.tried += 1
        self.total_tried += 1
        if adapt and self.tried == ADAPT_BATCH:
            self.batches += 1
            delta = min(0.5, 1.0 / np.sqrt(self.batches))
            rate = self.accepted / self.tried
            self.log_scale = self.log_scale + np.where(rate > TARGET_ACCEPT, delta, -delta)
            self.accepted = np.zeros_like(self.accepted)
            self.tried = 0
        elif not adapt and self.tried == ADAPT_BATCH:
            self.accepted = np.zeros_like(self.accepted)
            self.tried = 0

    @property
    def acceptance_rate(self):
        return float(np.mean(self.total_accepted) / max(self.total_tried, 1))


def _accept(rng, log_ratio):
    log_ratio = np.asarray(log_ratio)
    u = rng.random(log_ratio.shape)
    with np.errstate(divide="ignore"):
        return np.log(u) < log_ratio


class _Sampler:
    """Common loop: sweep, then expose the current state as a parameter dict."""

    scalar_names = ()

    def __init__(self, scales):
        self.proposals = {}
        self._scales = scales

    def _proposal(self, name, default, size=None):
        if name not in self.proposals:
            self.proposals[name] = _Proposal(self._scales.get(name, default), size)
        return self.proposals[name]

    def _scalar_move(self, rng, name, value, logp, adapt, default=0.1):
        """One random-walk Metropolis step for a scalar on its working scale."""
        prop = self._proposal(name, default)
        cand = value + prop.scale * rng.standard_normal()
        cur = logp(value)
        new = logp(cand)
        ok = bool(_accept(rng, new - cur))
        prop.record(ok, adapt)
        return cand if ok else value


class HierSampler(_Sampler):
    """Models H, F (centered random intercepts) and S (single mean)."""

    def __init__(self, name, dataset, scales=None):
        super().__init__(scales or {})
        self.name = name
        self.n = np.array(dataset.n_j, dtype=np.float64)
        self.ybar = np.array([g.mean() for g in dataset.y])
        self.ss = np.array([np.sum((g - g.mean()) ** 2) for g in dataset.y])
        self.N = self.n.sum()
        self.grand = float(np.sum(self.n * self.ybar) / self.N)
        self.ss_total = float(self.ss.sum() + np.sum(self.n * (self.ybar - self.grand) ** 2))
        pooled = np.sqrt(max(self.ss.sum() / max(self.N - len(self.n), 1.0), 1e-6))
        self.mu = self.grand
        self.log_sigma = float(np.log(pooled))
        self.log_tau = float(np.log(max(np.std(self.ybar), 0.05)))
        self.b = self.ybar.copy() if name in ("H", "F") else None
        self.scalar_names = ("mu", "sigma", "tau") if name == "H" else ("mu", "sigma")

    # log-likelihood of each group's data given its mean
    def _loglik_groups(self, b, log_sigma):
        sigma2 = np.exp(2.0 * log_sigma)
        return -self.n * (0.5 * np.log(2 * np.pi) + log_sigma) - (self.ss + self.n * (self.ybar - b) ** 2) / (2 * sigma2)

    def _loglik_pooled(self, mu, log_sigma):
        sigma2 = np.exp(2.0 * log_sigma)
        return -self.N * (0.5 * np.log(2 * np.pi) + log_sigma) - (self.ss_total + self.N * (self.grand - mu) ** 2) / (2 * sigma2)

    def _group_sd(self):
        return np.exp(self.log_tau) if self.name == "H" else F_GROUP_SD

    def sweep(self, rng, adapt):
        mu_prior, sd_prior = HIER_PRIORS["mu"], HIER_PRIORS["sigma"]
        if self.name == "S":
            self.mu = self._scalar_move(
                rng, "mu", self.mu, lambda m: self._loglik_pooled(m, self.log_sigma) + mu_prior(m), adapt, 0.05)
            self.log_sigma = self._scalar_move(
                rng, "sigma", self.log_sigma,
                lambda ls: self._loglik_pooled(self.mu, ls) + sd_prior(np.exp(ls)) + ls, adapt, 0.05)
            return

        tau = self._group_sd()
        # group means: independent given (mu, tau, sigma)
        prop = self._proposal("b", 0.1, size=len(self.b))
        cand = self.b + prop.scale * rng.standard_normal(self.b.shape)
        cur = self._loglik_groups(self.b, self.log_sigma) + normal_logpdf(self.b, self.mu, tau)
        new = self._loglik_groups(cand, self.log_sigma) + normal_logpdf(cand, self.mu, tau)
        ok = _accept(rng, new - cur)
        self.b = np.where(ok, cand, self.b)
        prop.record(ok, adapt)

        self.mu = self._scalar_move(
            rng, "mu", self.mu, lambda m: np.sum(normal_logpdf(self.b, m, tau)) + mu_prior(m), adapt, 0.1)
        if self.name == "H":
            tau_prior = HIER_PRIORS["tau"]
            self.log_tau = self._scalar_move(
                rng, "tau", self.log_tau,
                lambda lt: np.sum(normal_logpdf(self.b, self.mu, np.exp(lt))) + tau_prior(np.exp(lt)) + lt,
                adapt, 0.2)
        self.log_sigma = self._scalar_move(
            rng, "sigma", self.log_sigma,
            lambda ls: np.sum(self._loglik_groups(self.b, ls)) + sd_prior(np.exp(ls)) + ls, adapt, 0.05)

        # joint shift of mu and every b_j: leaves the b | mu terms unchanged
        shift = self._proposal("shift", 0.05)
        delta = shift.scale * rng.standard_normal()
        cur = np.sum(self._loglik_groups(self.b, self.log_sigma)) + mu_prior(self.mu)
        new = np.sum(self._loglik_groups(self.b + delta, self.log_sigma)) + mu_prior(self.mu + delta)
        ok = bool(_accept(rng, new - cur))
        if ok:
            self.mu += delta
            self.b = self.b + delta
        shift.record(ok, adapt)

    def sample(self):
        out = {"mu": float(self.mu), "sigma": float(np.exp(self.log_sigma))}
        if self.name == "H":
            out["tau"] = float(np.exp(self.log_tau))
        if self.b is not None:
            out["b"] = self.b.copy()
        return out


class SvSampler(_Sampler):
    """Models P (AR(1) volatility), Z (iid volatility) and I (no volatility)."""

    def __init__(self, name, dataset, scales=None):
        super().__init__(scales or {})
        self.name = name
        self.y = dataset.y
        self.T = dataset.T
        # E[log chi2_1] = -1.27; smooth log y^2 to start the path near its mode
        raw = np.log(self.y ** 2 + 1e-3 * (float(np.var(self.y)) or 1.0)) + 1.27
        h0 = np.convolve(raw, np.ones(9) / 9, mode="same") if name == "P" else raw
        self.mu = float(np.mean(h0))
        self.log_sigma = float(np.log(0.3)) if name != "I" else float(np.log(np.sqrt(np.mean(self.y ** 2)) or 1.0))
        self.z_phi = float(np.arctanh(0.9))
        self.h = h0.copy() if name in ("P", "Z") else None
        self.scalar_names = {"P": ("mu", "sigma", "phi"), "Z": ("mu", "sigma"), "I": ("sigma",)}[name]
        t = np.arange(self.T)
        self._blocks = (t[0::2], t[1::2]) if name == "P" else (t,)

    @property
    def phi(self):
        return float(np.tanh(self.z_phi)) if self.name == "P" else 0.0

    def _latent_logpdf(self, h, mu, log_sigma, phi):
        sigma = np.exp(log_sigma)
        if self.name == "P":
            return ar1_logpdf(h, mu, sigma, phi)
        return normal_logpdf(h, mu, sigma)

    def _h_local(self, h, idx):
        """Terms of the joint log density that involve the entries ``idx``."""
        lat = self._latent_logpdf(h, self.mu, self.log_sigma, self.phi)
        local = sv_obs_logpdf(self.y[idx], h[idx]) + lat[idx]
        if self.name == "P":
            nxt = idx + 1
            inside = nxt < self.T
            local[inside] += lat[nxt[inside]]
        return local

    def sweep(self, rng, adapt):
        sd_prior = SV_PRIORS["sigma"]
        if self.name == "I":
            self.log_sigma = self._scalar_move(
                rng, "sigma", self.log_sigma,
                lambda ls: np.sum(normal_logpdf(self.y, 0.0, np.exp(ls))) + sd_prior(np.exp(ls)) + ls, adapt, 0.05)
            return

        prop = self._proposal("h", 0.5, size=self.T)
        accepted = np.zeros(self.T)
        for idx in self._blocks:
            cand = self.h.copy()
            cand[idx] = self.h[idx] + prop.scale[idx] * rng.standard_normal(idx.size)
            ok = _accept(rng, self._h_local(cand, idx) - self._h_local(self.h, idx))
            self.h[idx] = np.where(ok, cand[idx], self.h[idx])
            accepted[idx] = ok
        prop.record(accepted, adapt)

        mu_prior = SV_PRIORS["mu"]
        self.mu = self._scalar_move(
            rng, "mu", self.mu,
            lambda m: np.sum(self._latent_logpdf(self.h, m, self.log_sigma, self.phi)) + mu_prior(m), adapt, 0.1)
        self.log_sigma = self._scalar_move(
            rng, "sigma", self.log_sigma,
            lambda ls: np.sum(self._latent_logpdf(self.h, self.mu, ls, self.phi)) + sd_prior(np.exp(ls)) + ls,
            adapt, 0.1)
        if self.name == "P":
            # phi = tanh(z); log|d phi / dz| = log(1 - phi^2); uniform prior is flat on (-1, 1)
            self.z_phi = self._scalar_move(
                rng, "phi", self.z_phi,
                lambda z: np.sum(self._latent_logpdf(self.h, self.mu, self.log_sigma, np.tanh(z)))
                + np.log1p(-np.tanh(z) ** 2),
                adapt, 0.1)

        self._noncentered_moves(rng, adapt)

        # joint shift of mu and the whole path: latent terms are shift invariant
        shift = self._proposal("shift", 0.1)
        delta = shift.scale * rng.standard_normal()
        cur = np.sum(sv_obs_logpdf(self.y, self.h)) + mu_prior(self.mu)
        new = np.sum(sv_obs_logpdf(self.y, self.h + delta)) + mu_prior(self.mu + delta)
        ok = bool(_accept(rng, new - cur))
        if ok:
            self.mu += delta
            self.h = self.h + delta
        shift.record(ok, adapt)

    def _innovations(self):
        """Standardized innovations of the current path."""
        sigma, phi = np.exp(self.log_sigma), self.phi
        dev = self.h - self.mu
        eps = np.empty(self.T)
        eps[0] = dev[0] * np.sqrt(1.0 - phi * phi) / sigma
        eps[1:] = (dev[1:] - phi * dev[:-1]) / sigma
        return eps

    def _path(self, eps, log_sigma, phi):
        sigma = np.exp(log_sigma)
        u = sigma * eps
        u[0] = sigma / np.sqrt(1.0 - phi * phi) * eps[0]
        if phi == 0.0:
            return self.mu + u
        return self.mu + lfilter([1.0], [1.0, -phi], u)

    def _noncentered_moves(self, rng, adapt):
        """Update sigma (and phi) with the innovations, not the path, held fixed.

        The innovations are standard normal a priori whatever sigma and phi
        are, so only the observation terms and the priors enter the ratio.
        """
        eps = self._innovations()
        sd_prior = SV_PRIORS["sigma"]

        def sigma_target(ls):
            path = self._path(eps, ls, self.phi)
            return np.sum(sv_obs_logpdf(self.y, path)) + sd_prior(np.exp(ls)) + ls

        new = self._scalar_move(rng, "sigma_nc", self.log_sigma, sigma_target, adapt, 0.1)
        if new != self.log_sigma:
            self.log_sigma = new
            self.h = self._path(eps, new, self.phi)
        if self.name != "P":
            return

        def phi_target(z):
            path = self._path(eps, self.log_sigma, float(np.tanh(z)))
            return np.sum(sv_obs_logpdf(self.y, path)) + np.log1p(-np.tanh(z) ** 2)

        new = self._scalar_move(rng, "phi_nc", self.z_phi, phi_target, adapt, 0.1)
        if new != self.z_phi:
            self.z_phi = new
            self.h = self._path(eps, self.log_sigma, self.phi)

    def sample(self):
        out = {"mu": float(self.mu), "sigma": float(np.exp(self.log_sigma))} if self.name != "I" \
            else {"sigma": float(np.exp(self.log_sigma))}
        if self.name == "P":
            out["phi"] = self.phi
        if self.h is not None:
            out["h"] = self.h.copy()
        return out


def make_sampler(model_name, dataset, scales=None):
    family = family_of(model_name)
    if family == "hier":
        if not isinstance(dataset, HierDataset):
            raise ModelConfigurationError(f"model {model_name} needs a hierarchical dataset")
        return HierSampler(model_name, dataset, scales)
    if not isinstance(dataset, SvDataset):
        raise ModelConfigurationError(f"model {model_name} needs a stochastic-volatility dataset")
    return SvSampler(model_name, dataset, scales)


@dataclass
class McmcRun:
    """Outcome of one chain: one WAIC result per variant plus chain summaries."""

    model: str
    results: list
    posterior_means: dict
    ess: dict
    acceptance: dict
    neg_inf_count: int = 0
    n_latent_draws: int = 0

    @property
    def low_ess(self):
        return {k: v for k, v in self.ess.items() if not (v >= ESS_THRESHOLD)}


def run_mcmc_waic_multi(model_name, dataset, variants, mcmc_config, h_sinks=None,
                        latent_free_marginal="error", block_size=None):
    """One chain feeding several (partition, PredictiveConfig) WAIC variants.

    ``latent_free_marginal="conditional"`` lets marginal variants run on a
    model without latent nodes, where they reduce to the conditional values;
    the default raises.
    """
    model = build_model(model_name, dataset)
    variants = [(p, c) for p, c in variants]
    if not model.has_latent and any(c.mode == MARGINAL for _, c in variants) \
            and latent_free_marginal != "conditional":
        raise ModelConfigurationError(
            f"model {model_name} declares no latent nodes; marginal WAIC equals conditional WAIC there, "
            "so run it in conditional mode")
    chain_seq, pred_seq = np.random.SeedSequence(mcmc_config.seed).spawn(2)
    chain_rng = np.random.default_rng(chain_seq)
    pred_rng = np.random.default_rng(pred_seq)

    sampler = make_sampler(model_name, dataset, mcmc_config.proposal_scales)
    evaluator = PredictiveEvaluator(model, variants, block_size=block_size)
    states = [waic_init(p, c) for p, c in variants]
    sinks = list(h_sinks) if h_sinks is not None else [None] * len(variants)

    for _ in range(mcmc_config.burn_in):
        sampler.sweep(chain_rng, mcmc_config.adapt)
    traces = {name: np.empty(mcmc_config.keep) for name in sampler.scalar_names}
    for it in range(mcmc_config.keep):
        sampler.sweep(chain_rng, False)
        sample = sampler.sample()
        for name in sampler.scalar_names:
            traces[name][it] = sample[name]
        hs = evaluator(sample, pred_rng)
        for v, h in enumerate(hs):
            states[v] = waic_update(states[v], h)
            if sinks[v] is not None:
                sinks[v](h)

    results = [waic_finalize(s) for s in states]
    return McmcRun(
        model=model_name,
        results=results,
        posterior_means={k: float(v.mean()) for k, v in traces.items()},
        ess={k: effective_sample_size(v) for k, v in traces.items()},
        acceptance={k: p.acceptance_rate for k, p in sampler.proposals.items()},
        neg_inf_count=evaluator.neg_inf_count,
        n_latent_draws=evaluator.n_latent_draws,
    )


def run_mcmc_waic(model_name, dataset, partition, predictive_config=None, mcmc_config=None,
                  h_sink=None, return_run=False):
    """Single-variant convenience wrapper around :func:`run_mcmc_waic_multi`."""
    predictive_config = predictive_config or PredictiveConfig()
    mcmc_config = mcmc_config or McmcConfig()
    run = run_mcmc_waic_multi(model_name, dataset, [(partition, predictive_config)], mcmc_config,
                              h_sinks=[h_sink])
    return (run.results[0], run) if return_run else run.results[0]
