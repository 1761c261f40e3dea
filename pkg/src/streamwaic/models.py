"""Constructors for the six simulation-study models.

Hierarchical family (data: :class:`HierDataset`):

* ``H`` random intercepts ``b_j ~ N(mu, tau)``, ``y_ji ~ N(b_j, sigma)``
* ``F`` same but with the group-mean sd fixed at 0.01
* ``S`` no groups, ``y_ji ~ N(mu, sigma)``

Stochastic-volatility family (data: :class:`SvDataset`):

* ``P`` AR(1) log-volatility ``h_t``, ``y_t ~ N(0, exp(h_t / 2))``
* ``Z`` as ``P`` with ``phi = 0`` (iid ``h_t``)
* ``I`` no latent state, ``y_t ~ N(0, sigma)``

Priors: ``mu ~ N(0, 100)``, ``sigma, tau ~ half-N(10)`` for the hierarchical
models; ``mu ~ N(0, 10)``, ``sigma ~ half-N(5)``, ``phi ~ U(-1, 1)`` for the
volatility models.
"""

import numpy as np

from .datasets import HierDataset, SvDataset, simulate_ar1
from .exceptions import ModelConfigurationError
from .model import DATA, LATENT, LOG_SQRT_2PI, PARAMETER, ModelGraph, Node, normal_logpdf

F_GROUP_SD = 0.01

HIER_MODELS = ("H", "F", "S")
SV_MODELS = ("P", "Z", "I")

DESCRIPTIONS = {
    "H": "hierarchical random intercept (true model): b_j ~ N(mu, tau), y ~ N(b_j, sigma)",
    "F": "hierarchical with group-mean sd fixed at 0.01: b_j ~ N(mu, 0.01)",
    "S": "single mean, no groups: y ~ N(mu, sigma)",
    "P": "stochastic volatility with AR(1) log-volatility (true model)",
    "Z": "stochastic volatility with iid log-volatility (phi = 0)",
    "I": "iid N(0, sigma) observations, no latent volatility",
}


def normal_prior(sd):
    return lambda x: normal_logpdf(x, 0.0, sd)


def half_normal_prior(sd):
    def logpdf(x):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore"):
            return np.where(x > 0, np.log(2.0) + normal_logpdf(x, 0.0, sd), -np.inf)
    return logpdf


def uniform_prior(low, high):
    def logpdf(x):
        x = np.asarray(x, dtype=np.float64)
        return np.where((x > low) & (x < high), -np.log(high - low), -np.inf)
    return logpdf


HIER_PRIORS = {"mu": normal_prior(100.0), "sigma": half_normal_prior(10.0), "tau": half_normal_prior(10.0)}
SV_PRIORS = {"mu": normal_prior(10.0), "sigma": half_normal_prior(5.0), "phi": uniform_prior(-1.0, 1.0)}


def family_of(name):
    if name in HIER_MODELS:
        return "hier"
    if name in SV_MODELS:
        return "sv"
    raise ModelConfigurationError(f"unknown model {name!r}; choose one of {HIER_MODELS + SV_MODELS}")


def _param(name, priors):
    return Node(name, PARAMETER, log_density=priors[name])


def hierarchical_model(name, dataset):
    if not isinstance(dataset, HierDataset):
        raise ModelConfigurationError(f"model {name} needs a hierarchical dataset")
    J = dataset.J
    gidx = dataset.group_index
    nodes = [_param("mu", HIER_PRIORS), _param("sigma", HIER_PRIORS)]

    sizes = set(dataset.n_j)
    if len(sizes) == 1:
        # balanced groups: broadcast over a (J, n) view instead of gathering b
        n = sizes.pop()

        def y_given_b(y, b, sigma):
            b = np.asarray(b)[..., None]
            out = normal_logpdf(np.reshape(y, (J, n)), b, sigma)
            return out.reshape(out.shape[:-2] + (J * n,))
    else:
        def y_given_b(y, b, sigma):
            return normal_logpdf(y, np.asarray(b)[..., gidx], sigma)

    if name == "H":
        nodes.append(_param("tau", HIER_PRIORS))
        nodes.append(Node(
            "b", LATENT, parents=("mu", "tau"), size=J,
            log_density=lambda b, mu, tau: normal_logpdf(b, mu, tau),
            simulate=lambda rng, batch, mu, tau: mu + tau * rng.standard_normal(tuple(batch) + (J,)),
        ))
        nodes.append(Node("y", DATA, ("b", "sigma"), dataset.values.size, y_given_b,
                          value=dataset.values, labels=dataset.labels))
    elif name == "F":
        nodes.append(Node(
            "b", LATENT, parents=("mu",), size=J,
            log_density=lambda b, mu: normal_logpdf(b, mu, F_GROUP_SD),
            simulate=lambda rng, batch, mu: mu + F_GROUP_SD * rng.standard_normal(tuple(batch) + (J,)),
        ))
        nodes.append(Node("y", DATA, ("b", "sigma"), dataset.values.size, y_given_b,
                          value=dataset.values, labels=dataset.labels))
    elif name == "S":
        nodes.append(Node("y", DATA, ("mu", "sigma"), dataset.values.size,
                          lambda y, mu, sigma: normal_logpdf(y, mu, sigma),
                          value=dataset.values, labels=dataset.labels))
    else:
        raise ModelConfigurationError(f"{name!r} is not a hierarchical model")
    return ModelGraph(name, tuple(nodes), DESCRIPTIONS[name])


def sv_obs_logpdf(y, h):
    """log N(y; 0, sd=exp(h/2))."""
    h = np.asarray(h)
    return -LOG_SQRT_2PI - 0.5 * h - 0.5 * y * y * np.exp(-h)


def ar1_logpdf(h, mu, sigma, phi):
    h = np.asarray(h, dtype=np.float64)
    out = np.empty(h.shape)
    out[..., 0] = normal_logpdf(h[..., 0], mu, sigma / np.sqrt(1.0 - phi * phi))
    out[..., 1:] = normal_logpdf(h[..., 1:], mu + phi * (h[..., :-1] - mu), sigma)
    return out


def sv_model(name, dataset):
    if not isinstance(dataset, SvDataset):
        raise ModelConfigurationError(f"model {name} needs a stochastic-volatility dataset")
    T = dataset.T
    nodes = [_param("sigma", SV_PRIORS)]
    if name == "P":
        nodes += [_param("mu", SV_PRIORS), _param("phi", SV_PRIORS)]
        nodes.append(Node(
            "h", LATENT, parents=("mu", "sigma", "phi"), size=T,
            log_density=ar1_logpdf,
            simulate=lambda rng, batch, mu, sigma, phi: simulate_ar1(rng, batch, T, mu, sigma, phi),
        ))
        nodes.append(Node("y", DATA, ("h",), T, sv_obs_logpdf, value=dataset.y, labels=dataset.labels))
    elif name == "Z":
        nodes.append(_param("mu", SV_PRIORS))
        nodes.append(Node(
            "h", LATENT, parents=("mu", "sigma"), size=T,
            log_density=lambda h, mu, sigma: normal_logpdf(h, mu, sigma),
            simulate=lambda rng, batch, mu, sigma: mu + sigma * rng.standard_normal(tuple(batch) + (T,)),
        ))
        nodes.append(Node("y", DATA, ("h",), T, sv_obs_logpdf, value=dataset.y, labels=dataset.labels))
    elif name == "I":
        nodes.append(Node("y", DATA, ("sigma",), T, lambda y, sigma: normal_logpdf(y, 0.0, sigma),
                          value=dataset.y, labels=dataset.labels))
    else:
        raise ModelConfigurationError(f"{name!r} is not a stochastic-volatility model")
    return ModelGraph(name, tuple(nodes), DESCRIPTIONS[name])


def build_model(name, dataset):
    """Model graph ``name`` bound to ``dataset``."""
    if family_of(name) == "hier":
        return hierarchical_model(name, dataset)
    return sv_model(name, dataset)
