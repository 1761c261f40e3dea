"""Simulated datasets for the hierarchical and stochastic-volatility studies.

Datasets round-trip through a small ND-text format: a ``#``-prefixed JSON
header line followed by one observation per line.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DomainError, StreamFormatError


@dataclass(frozen=True)
class HierDataset:
    """Ragged groups ``y[j]`` of sizes ``n_j``."""

    y: tuple
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.y) < 1:
            raise DomainError("a hierarchical dataset needs at least one group")
        object.__setattr__(self, "y", tuple(np.asarray(g, dtype=np.float64) for g in self.y))

    family = "hier"

    @property
    def J(self):
        return len(self.y)

    @property
    def n_j(self):
        return tuple(len(g) for g in self.y)

    @property
    def values(self):
        return np.concatenate(self.y)

    @property
    def group_index(self):
        return np.repeat(np.arange(self.J), self.n_j)

    @property
    def labels(self):
        return tuple(f"y[{j + 1},{i + 1}]" for j, n in enumerate(self.n_j) for i in range(n))


@dataclass(frozen=True)
class SvDataset:
    y: np.ndarray
    params: dict = field(default_factory=dict)

    family = "sv"

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        if y.ndim != 1 or len(y) < 2:
            raise DomainError("a stochastic-volatility series needs T >= 2")
        object.__setattr__(self, "y", y)

    @property
    def T(self):
        return len(self.y)

    @property
    def values(self):
        return self.y

    @property
    def labels(self):
        return tuple(f"y[{t + 1}]" for t in range(self.T))


def generate_hier(true_params, J, n_j, rng):
    """``b_j ~ N(mu, tau)``, then ``y_ji ~ N(b_j, sigma)``."""
    mu, tau, sigma = (float(true_params[k]) for k in ("mu", "tau", "sigma"))
    if not (tau > 0 and sigma > 0):
        raise DomainError(f"tau and sigma must be positive, got tau={tau}, sigma={sigma}")
    if J < 1:
        raise DomainError("J must be at least 1")
    sizes = [int(n_j)] * J if np.isscalar(n_j) else [int(n) for n in n_j]
    if len(sizes) != J:
        raise DomainError("n_j must be a scalar or have length J")
    b = rng.normal(mu, tau, size=J)
    y = tuple(rng.normal(b[j], sigma, size=sizes[j]) for j in range(J))
    return HierDataset(y, {"mu": mu, "tau": tau, "sigma": sigma})


def simulate_ar1(rng, batch, T, mu, sigma, phi):
    """Stationary AR(1) paths of length ``T`` with leading ``batch`` axes."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    z = rng.standard_normal(tuple(batch) + (T,))
    h = np.empty_like(z)
    h[..., 0] = mu + sigma / np.sqrt(1.0 - phi * phi) * z[..., 0]
    for t in range(1, T):
        h[..., t] = mu + phi * (h[..., t - 1] - mu) + sigma * z[..., t]
    return h


def generate_sv(true_params, T, rng):
    """Latent AR(1) log-volatility, then ``y_t ~ N(0, exp(h_t / 2))``."""
    phi, sigma, mu = (float(true_params[k]) for k in ("phi", "sigma", "mu"))
    if not abs(phi) < 1:
        raise DomainError(f"|phi| must be < 1 for a stationary path, got {phi}")
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if T < 2:
        raise DomainError("T must be at least 2")
    h = simulate_ar1(rng, (), T, mu, sigma, phi)
    y = rng.normal(0.0, np.exp(h / 2.0))
    return SvDataset(y, {"phi": phi, "sigma": sigma, "mu": mu})


def save_dataset(dataset, path):
    header = {"family": dataset.family, "params": dataset.params}
    lines = []
    if dataset.family == "hier":
        header["n_j"] = list(dataset.n_j)
        for j, group in enumerate(dataset.y):
            lines.extend(f"{j + 1},{v!r}" for v in group.tolist())
    else:
        header["T"] = dataset.T
        lines.extend(repr(v) for v in dataset.y.tolist())
    text = "# " + json.dumps(header, sort_keys=True) + "\n" + "\n".join(lines) + "\n"
    Path(path).write_text(text)


def load_dataset(path):
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise StreamFormatError("dataset file must start with a '# {json}' header", line=1)
    try:
        header = json.loads(lines[0][1:])
    except json.JSONDecodeError as exc:
        raise StreamFormatError(f"bad dataset header: {exc}", line=1) from None
    body = [(i + 2, ln) for i, ln in enumerate(lines[1:]) if ln.strip()]
    lineno = 1
    try:
        if header["family"] == "hier":
            groups = [[] for _ in header["n_j"]]
            for lineno, ln in body:
                j, v = ln.split(",")
                groups[int(j) - 1].append(float(v))
            if [len(g) for g in groups] != list(header["n_j"]):
                raise StreamFormatError("group sizes disagree with header n_j")
            return HierDataset(tuple(groups), header.get("params", {}))
        if header["family"] == "sv":
            y = [float(ln) for _, ln in body]
            if len(y) != header["T"]:
                raise StreamFormatError("series length disagrees with header T")
            return SvDataset(np.array(y), header.get("params", {}))
    except (ValueError, IndexError) as exc:
        if isinstance(exc, StreamFormatError):
            raise
        raise StreamFormatError(f"malformed dataset line near {lineno}: {exc}") from None
    raise StreamFormatError(f"unknown dataset family {header.get('family')!r}", line=1)
