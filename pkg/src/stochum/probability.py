"""Finite filtered probability space: the binary Brownian scenario tree.

Level k of the tree (k = 0..K) carries 2^k nodes, one per atom of the
filtration after k noise steps.  Node j at level k+1 descends from parent
j // 2; the edge carries the Brownian increment +sqrt(dt) when j is even
("up") and -sqrt(dt) when j is odd.  All 2^K leaf paths are equally
probable, so every expectation is a plain mean over a level.

The two-point increment matches the first two moments of a Gaussian step
exactly, which makes conditional expectation (child mean) and the discrete
martingale representation

    v_child = E[v | parent] + Z * dW,      Z = (v_up - v_down) / (2 sqrt(dt))

exact identities rather than approximations.

Random fields are drawn from counter-based (Philox) streams keyed on
(seed, role, level, node), so a node's sample never depends on evaluation
order or on which other nodes were sampled — reductions and parallel
workers cannot perturb the draw.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "NoiseTree",
    "AdaptedField",
    "build_tree",
    "conditional_expectation",
    "martingale_part",
    "expectation",
    "gaussian_field",
    "gaussian_leaf_vectors",
    "gaussian_root_vector",
]

_MASK64 = 0xFFFF_FFFF_FFFF_FFFF


@dataclass(frozen=True)
class NoiseTree:
    """Binary scenario tree with K uniform noise steps of size dt = T/K."""

    depth: int
    horizon: float
    dt: float
    sqrt_dt: float

    @property
    def node_count(self) -> int:
        return (1 << (self.depth + 1)) - 1

    @property
    def leaf_probability(self) -> float:
        return 2.0 ** (-self.depth)

    def level_size(self, level: int) -> int:
        if not 0 <= level <= self.depth:
            raise ParameterError(f"level {level} outside 0..{self.depth}")
        return 1 << level

    def increments(self, level: int) -> np.ndarray:
        """Signed increments dW on the edges into level+1, shape (2^(level+1),)."""
        size = 2 * self.level_size(level)
        sgn = np.where(np.arange(size) % 2 == 0, 1.0, -1.0)
        return sgn * self.sqrt_dt


def build_tree(K: int, T: float) -> NoiseTree:
    """Scenario tree with K noise steps on (0, T); 1 <= K <= 16 (memory guard)."""
    if not (isinstance(K, (int, np.integer)) and 1 <= K <= 16):
        raise ParameterError(f"tree depth K must be an integer in [1, 16], got {K!r}")
    if not (0.0 < T < 1.0):
        raise ParameterError(f"time horizon must lie in (0, 1), got T={T}")
    dt = T / K
    return NoiseTree(depth=int(K), horizon=float(T), dt=dt, sqrt_dt=math.sqrt(dt))


@dataclass
class AdaptedField:
    """A tree-node-indexed family of spatial grid vectors.

    ``values[k]`` has shape (2^k, n): one grid vector per filtration atom at
    level k.  Indexing by node is what makes adaptedness structural — a
    level-k value cannot read a level-(k+1) branch except through
    conditional_expectation / martingale_part.  A field may stop earlier
    than the tree depth (cell fields live on levels 0..K-1, trajectories on
    0..K).
    """

    tree: NoiseTree
    values: list[np.ndarray]

    def __post_init__(self) -> None:
        if not self.values:
            raise ParameterError("adapted field needs at least one level")
        if len(self.values) > self.tree.depth + 1:
            raise ParameterError(
                f"field has {len(self.values)} levels but the tree depth is {self.tree.depth}"
            )
        n = self.values[0].shape[-1]
        for k, arr in enumerate(self.values):
            if arr.shape != (1 << k, n):
                raise ParameterError(
                    f"level {k} must have shape {(1 << k, n)}, got {arr.shape}"
                )

    @property
    def levels(self) -> int:
        return len(self.values)

    @property
    def n(self) -> int:
        return self.values[0].shape[-1]

    @classmethod
    def zeros(cls, tree: NoiseTree, n: int, levels: int) -> "AdaptedField":
        return cls(tree=tree, values=[np.zeros((1 << k, n)) for k in range(levels)])

    def copy(self) -> "AdaptedField":
        return AdaptedField(tree=self.tree, values=[v.copy() for v in self.values])

    def _binary(self, other: "AdaptedField", op) -> "AdaptedField":
        if not isinstance(other, AdaptedField):
            return NotImplemented
        if other.tree is not self.tree and other.tree != self.tree:
            raise ParameterError("fields live on different trees")
        if other.levels != self.levels or other.n != self.n:
            raise ParameterError("fields are not conformable")
        return AdaptedField(
            tree=self.tree, values=[op(a, b) for a, b in zip(self.values, other.values)]
        )

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        if not isinstance(scalar, (int, float)):
            return NotImplemented
        return AdaptedField(tree=self.tree, values=[scalar * v for v in self.values])

    __rmul__ = __mul__


def conditional_expectation(child_values: np.ndarray) -> np.ndarray:
    """E[. | F_k] of a level-(k+1) field: the mean of each sibling pair."""
    v = np.asarray(child_values)
    if v.ndim != 2 or v.shape[0] < 2 or v.shape[0] % 2:
        raise ParameterError(f"expected a (2m, n) child-level array, got shape {v.shape}")
    return 0.5 * (v[0::2] + v[1::2])


def martingale_part(child_values: np.ndarray, tree: NoiseTree) -> np.ndarray:
    """Martingale representation coefficient Z of a level-(k+1) field.

    Z = (v_up - v_down) / (2 sqrt(dt)); the reconstruction
    v_child = E[v|parent] + Z*dW holds exactly on the two-point measure.
    """
    v = np.asarray(child_values)
    if v.ndim != 2 or v.shape[0] < 2 or v.shape[0] % 2:
        raise ParameterError(f"expected a (2m, n) child-level array, got shape {v.shape}")
    return (v[0::2] - v[1::2]) / (2.0 * tree.sqrt_dt)


def expectation(field: AdaptedField, level: int, spatial_functional) -> float:
    """Probability-weighted sum of a per-node reduction over one level.

    ``spatial_functional`` maps one grid vector to a scalar; all nodes of a
    level are equally probable, so the result is a plain mean.
    """
    if not 0 <= level < field.levels:
        raise ParameterError(f"field has no level {level}")
    vals = field.values[level]
    return float(np.mean([spatial_functional(v) for v in vals]))


# ----------------------------------------------------------------- sampling
def _node_stream(seed: int, role: str, level: int, node: int) -> np.random.Generator:
    tag = hashlib.blake2s(f"{role}|{level}|{node}".encode(), digest_size=8).digest()
    key = np.array([seed & _MASK64, int.from_bytes(tag, "little")], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def gaussian_field(
    tree: NoiseTree, n: int, seed: int, role: str, levels: int | None = None, scale: float = 1.0
) -> AdaptedField:
    """Adapted field of i.i.d. N(0, scale^2) grid vectors, one per node.

    Each node's vector comes from its own counter-based stream keyed on
    (seed, role, level, node): the draw at a node is independent of which
    other nodes are sampled and in what order.
    """
    if levels is None:
        levels = tree.depth + 1
    if not 1 <= levels <= tree.depth + 1:
        raise ParameterError(f"levels must lie in 1..{tree.depth + 1}, got {levels}")
    vals = []
    for k in range(levels):
        rows = [scale * _node_stream(seed, role, k, j).standard_normal(n) for j in range(1 << k)]
        vals.append(np.stack(rows))
    return AdaptedField(tree=tree, values=vals)


def gaussian_leaf_vectors(tree: NoiseTree, n: int, seed: int, role: str, scale: float = 1.0) -> np.ndarray:
    """Leaf-level (2^K, n) sample using the same per-node keying as gaussian_field."""
    K = tree.depth
    rows = [scale * _node_stream(seed, role, K, j).standard_normal(n) for j in range(1 << K)]
    return np.stack(rows)


def gaussian_root_vector(n: int, seed: int, role: str, scale: float = 1.0) -> np.ndarray:
    """Deterministic (F_0-measurable) N(0, scale^2) grid vector."""
    return scale * _node_stream(seed, role, 0, 0).standard_normal(n)
