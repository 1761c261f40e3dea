"""A small directed-graph model: parameter, latent and data nodes.

Nodes are vector-valued. A data node of size ``n`` contributes ``n`` scalar
data-node identifiers (``labels``), which are what partitions refer to.
Kernels broadcast over leading batch axes, so one call can evaluate the
pointwise log density under ``K`` simulated latent draws at once.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import MissingParameterError, ModelConfigurationError, NumericalError, UnknownNodeError

PARAMETER = "parameter"
LATENT = "latent"
DATA = "data"

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def normal_logpdf(x, mean, sd):
    """Normal log density with (mean, standard deviation) parameterization."""
    z = np.subtract(x, mean, dtype=np.float64)
    if np.ndim(sd) == 0:
        z *= z
        z *= -0.5 / (sd * sd)
        z -= LOG_SQRT_2PI + np.log(sd)
        return z
    z /= sd
    return -LOG_SQRT_2PI - np.log(sd) - 0.5 * z * z


@dataclass(frozen=True)
class Node:
    """One stochastic node.

    ``log_density(value, **parents)`` returns elementwise log densities.
    ``simulate(rng, batch, **parents)`` returns a draw of shape
    ``batch + (size,)``; only latent nodes need it.
    """

    name: str
    role: str
    parents: tuple = ()
    size: int = 1
    log_density: Optional[Callable] = None
    simulate: Optional[Callable] = None
    value: Optional[np.ndarray] = None
    labels: tuple = ()


@dataclass(frozen=True)
class ModelGraph:
    name: str
    nodes: tuple
    description: str = ""
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        by_name = {}
        for node in self.nodes:
            if node.name in by_name:
                raise ModelConfigurationError(f"duplicate node name {node.name!r}")
            for parent in node.parents:
                if parent not in by_name:
                    raise ModelConfigurationError(
                        f"node {node.name!r} lists parent {parent!r} before it is defined"
                    )
            if node.role == DATA:
                if node.value is None:
                    raise ModelConfigurationError(f"data node {node.name!r} has no value")
                bad = [p for p in node.parents if by_name[p].role == DATA]
                if bad:
                    raise ModelConfigurationError(
                        f"data node {node.name!r} has data parent {bad[0]!r}"
                    )
            by_name[node.name] = node
        locate = {}
        for node in self.nodes:
            if node.role == DATA:
                for i, label in enumerate(node.labels):
                    locate[label] = (node.name, i)
        object.__setattr__(self, "_index", {"nodes": by_name, "labels": locate})

    def __getitem__(self, name):
        return self._index["nodes"][name]

    def _role(self, role):
        return tuple(n for n in self.nodes if n.role == role)

    @property
    def parameter_nodes(self):
        return self._role(PARAMETER)

    @property
    def latent_nodes(self):
        return self._role(LATENT)

    @property
    def data_nodes(self):
        return self._role(DATA)

    @property
    def has_latent(self):
        return bool(self.latent_nodes)

    @property
    def data_labels(self):
        """Scalar data-node identifiers in pointwise column order."""
        return tuple(label for n in self.data_nodes for label in n.labels)

    @property
    def n_data(self):
        return sum(n.size for n in self.data_nodes)

    def locate(self, label):
        try:
            return self._index["labels"][label]
        except KeyError:
            raise UnknownNodeError(f"unknown data node {label!r}") from None


def _parent_values(model, node, params):
    out = {}
    for parent in node.parents:
        if parent not in params:
            raise MissingParameterError(
                f"node {node.name!r} needs a value for parent {parent!r}"
            )
        out[parent] = params[parent]
    return out


def node_log_density(model, name, params):
    """Elementwise log density of data node ``name`` (shape ``batch + (size,)``)."""
    node = model[name]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        values = node.log_density(node.value, **_parent_values(model, node, params))
    values = np.asarray(values, dtype=np.float64)
    # catches NaN and +inf in one pass
    if not (values < np.inf).all():
        raise NumericalError(f"log density of node {name!r} evaluated to NaN or +inf")
    return values


def log_joint_density(model, element, params):
    """Sum of conditional log densities of the data nodes in ``element``.

    Additions happen left to right in element order, so a group's value is
    exactly the running sum of its singleton values.
    """
    cache = {}
    total = 0.0
    for label in element:
        name, i = model.locate(label)
        if name not in cache:
            cache[name] = node_log_density(model, name, params)
        total = total + float(cache[name][..., i])
    return total


def pointwise_log_density(model, params):
    """All data-node log densities as an array ``batch + (n_data,)``."""
    parts = [node_log_density(model, node.name, params) for node in model.data_nodes]
    if len(parts) == 1:
        return parts[0]
    batch = np.broadcast_shapes(*(p.shape[:-1] for p in parts))
    return np.concatenate([np.broadcast_to(p, batch + p.shape[-1:]) for p in parts], axis=-1)


def simulate_latent(model, condition, rng, size=None):
    """Ancestral draw of every latent node given the non-latent parameters.

    With ``size`` the result carries a leading axis of ``size`` independent
    draws. Data nodes are never read or written.
    """
    batch = () if size is None else (int(size),)
    values = dict(condition)
    drawn = {}
    for node in model.latent_nodes:
        parents = _parent_values(model, node, values)
        draw = np.asarray(node.simulate(rng, batch, **parents), dtype=np.float64)
        values[node.name] = draw
        drawn[node.name] = draw
    return drawn
