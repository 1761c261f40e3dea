"""Partitions of the scalar data nodes into WAIC elements."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import (
    DomainError,
    DuplicateNodeError,
    IncompletePartitionError,
    PartitionError,
    UnknownNodeError,
)


@dataclass(frozen=True)
class PartitionSpec:
    """Ordered groups of data-node identifiers.

    ``kind`` is ``"ungrouped"`` exactly when every group is a singleton.
    """

    elements: tuple
    kind: str

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_nodes(self):
        return sum(len(g) for g in self.elements)

    @property
    def sizes(self):
        return tuple(len(g) for g in self.elements)

    def digest(self):
        """Short stable fingerprint, stored in engine checkpoints."""
        import hashlib

        h = hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode())
        return h.hexdigest()[:16]

    def to_dict(self):
        return {"kind": self.kind, "groups": [list(g) for g in self.elements]}

    def reducer(self, node_order):
        """Return a function mapping ``(..., n)`` pointwise values to ``(..., M)``.

        ``node_order`` is the column order of the pointwise array. Groups are
        summed in their listed order.
        """
        position = {node: i for i, node in enumerate(node_order)}
        missing = [g for grp in self.elements for g in grp if g not in position]
        if missing:
            raise UnknownNodeError(f"partition references unknown node {missing[0]!r}")
        if len(position) != self.n_nodes:
            raise IncompletePartitionError(
                f"partition covers {self.n_nodes} nodes, model has {len(position)}"
            )
        order = np.array([position[g] for grp in self.elements for g in grp], dtype=np.intp)
        if self.kind == "ungrouped":
            if np.array_equal(order, np.arange(len(order))):
                return lambda values: values
            return lambda values: np.take(values, order, axis=-1)
        starts = np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(np.intp)
        if np.array_equal(order, np.arange(len(order))):
            return lambda values: np.add.reduceat(values, starts, axis=-1)
        return lambda values: np.add.reduceat(np.take(values, order, axis=-1), starts, axis=-1)


def _kind(groups):
    return "ungrouped" if all(len(g) == 1 for g in groups) else "grouped"


def build_partition(data_nodes, grouping=None):
    """Validate ``grouping`` against ``data_nodes``; default is all singletons."""
    data_nodes = list(data_nodes)
    if not data_nodes:
        raise PartitionError("a partition needs at least one data node")
    if grouping is None:
        groups = tuple((node,) for node in data_nodes)
        return PartitionSpec(groups, "ungrouped")

    known = set(data_nodes)
    seen = set()
    groups = []
    for group in grouping:
        group = tuple(group)
        if not group:
            raise PartitionError("partition groups must be nonempty")
        for node in group:
            if node not in known:
                raise UnknownNodeError(f"unknown data node {node!r}")
            if node in seen:
                raise DuplicateNodeError(f"data node {node!r} appears in more than one group")
            seen.add(node)
        groups.append(group)
    if len(seen) != len(known):
        absent = next(n for n in data_nodes if n not in seen)
        raise IncompletePartitionError(
            f"{len(known) - len(seen)} data node(s) missing from the grouping, e.g. {absent!r}"
        )
    return PartitionSpec(tuple(groups), _kind(groups))


def consecutive_blocks(data_nodes, block_size):
    """Consecutive runs of ``block_size`` nodes; the last block may be shorter."""
    if int(block_size) != block_size or block_size < 1:
        raise DomainError(f"block_size must be a positive integer, got {block_size!r}")
    data_nodes = list(data_nodes)
    block_size = int(block_size)
    groups = [data_nodes[i:i + block_size] for i in range(0, len(data_nodes), block_size)]
    return build_partition(data_nodes, groups)


def group_by(data_nodes, key):
    """Group nodes by ``key(node)``, groups ordered by first appearance."""
    buckets = {}
    for node in data_nodes:
        buckets.setdefault(key(node), []).append(node)
    return build_partition(data_nodes, list(buckets.values()))


def save_partition(partition, path):
    Path(path).write_text(json.dumps(partition.to_dict(), indent=1))


def load_partition(path, data_nodes=None):
    """Read a partition file (``{"groups": [[node, ...], ...]}``).

    With ``data_nodes`` the groups are validated against the model's nodes.
    """
    doc = json.loads(Path(path).read_text())
    return partition_from_dict(doc, data_nodes)


def partition_from_dict(doc, data_nodes=None):
    try:
        groups = [list(g) for g in doc["groups"]]
    except (KeyError, TypeError) as exc:
        raise PartitionError("partition document needs a 'groups' list of lists") from exc
    if data_nodes is None:
        data_nodes = [node for g in groups for node in g]
    return build_partition(data_nodes, groups)
