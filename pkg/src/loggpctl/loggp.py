"""Locally growing random trees of Gaussian processes.

A :class:`LogGpTree` routes every input through binary nodes whose right-branch
probability is a saturating linear function of one input coordinate.  Leaves
hold at most ``max_points`` training pairs in an exact GP
(:class:`~loggpctl.gp_exact.FactorizedModel`).  Full leaves are split on the
dimension of largest spread, and every insertion takes one RPROP step on the
receiving leaf's log-space hyperparameters.  Predictions are the
probability-weighted sum of the active leaves' posterior means.

:class:`VectorPredictor` bundles one independent tree per output dimension.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gp_exact
from .gp_exact import FactorizedModel, Hyperparameters
from .validation import (
    DegenerateSplitError,
    NonFiniteSampleError,
    NumericError,
    as_input_vector,
)

__all__ = [
    "RpropConfig",
    "HyperState",
    "RoutingNode",
    "LeafNode",
    "LogGpTree",
    "VectorPredictor",
    "route_probability",
    "choose_split",
    "rprop_step",
]


@dataclass(frozen=True)
class RpropConfig:
    """RPROP constants, in log-hyperparameter space."""

    step_init: float = 0.01
    eta_plus: float = 1.2
    eta_minus: float = 0.5
    step_min: float = 1e-6
    step_max: float = 0.5
    # box on log-hyperparameters; keeps exp() finite and the kernel matrix usable
    theta_min: float = math.log(1e-4)
    theta_max: float = math.log(1e4)


@dataclass
class HyperState:
    """Unconstrained hyperparameters ``theta_tilde = log(theta)`` plus RPROP memory."""

    theta_tilde: np.ndarray
    step_widths: np.ndarray
    prev_signs: np.ndarray

    @classmethod
    def from_hyper(cls, hp: Hyperparameters, rprop: RpropConfig = RpropConfig()) -> "HyperState":
        theta = np.log(hp.to_vector())
        return cls(theta, np.full_like(theta, rprop.step_init), np.zeros_like(theta))

    def hyper(self) -> Hyperparameters:
        theta = np.exp(self.theta_tilde)
        if not np.all(np.isfinite(theta) & (theta > 0)):
            raise ValueError(f"log-hyperparameters map outside (0, inf): {self.theta_tilde}")
        return Hyperparameters._from_positive_vector(theta)

    def copy(self) -> "HyperState":
        return HyperState(self.theta_tilde.copy(), self.step_widths.copy(), self.prev_signs.copy())


def rprop_step(state: HyperState, grad, cfg: RpropConfig, active=None) -> HyperState:
    """One iRprop- ascent step on ``theta_tilde`` given the log-space gradient.

    Step widths grow by ``eta_plus`` while the gradient sign persists and shrink
    by ``eta_minus`` on a sign flip; after a flip the component is not moved and
    its remembered sign is reset to zero.  ``active`` masks frozen components.
    """
    grad = np.asarray(grad, dtype=float)
    signs = np.sign(grad)
    if active is not None:
        signs = np.where(active, signs, 0.0)
    agree = signs * state.prev_signs
    steps = state.step_widths.copy()
    steps[agree > 0] = np.minimum(steps[agree > 0] * cfg.eta_plus, cfg.step_max)
    flipped = agree < 0
    steps[flipped] = np.maximum(steps[flipped] * cfg.eta_minus, cfg.step_min)
    signs[flipped] = 0.0
    theta = np.clip(state.theta_tilde + signs * steps, cfg.theta_min, cfg.theta_max)
    return HyperState(theta, steps, signs)


class RoutingNode:
    """Internal node splitting on ``dim`` at ``split`` with overlap width ``overlap``."""

    __slots__ = ("dim", "split", "overlap", "left", "right", "lo", "hi")

    def __init__(self, dim: int, split: float, overlap: float, left=None, right=None):
        if overlap < 0:
            raise ValueError("overlap must be non-negative")
        self.dim = int(dim)
        self.split = float(split)
        self.overlap = float(overlap)
        self.left = left
        self.right = right
        # ramp ends, cached for the traversal loops
        self.lo = self.split - 0.5 * self.overlap
        self.hi = self.split + 0.5 * self.overlap

    def __repr__(self):
        return f"RoutingNode(dim={self.dim}, split={self.split:.6g}, overlap={self.overlap:.6g})"


class LeafNode:
    __slots__ = ("model", "hyper_state")

    def __init__(self, model: FactorizedModel, hyper_state: HyperState):
        self.model = model
        self.hyper_state = hyper_state

    @property
    def n_points(self) -> int:
        return self.model.n_points

    def __repr__(self):
        return f"LeafNode(n_points={self.n_points})"


def route_probability(node: RoutingNode, x) -> float:
    """Probability of descending to the right child at ``x``.

    Saturating linear ramp of width ``overlap`` centred on ``split``; a zero
    overlap degenerates to a step with value 1/2 exactly at the split.
    """
    v = x[node.dim]
    if v < node.lo:
        return 0.0
    if v > node.hi:
        return 1.0
    if node.overlap == 0.0:
        return 0.5
    return (v - node.split) / node.overlap + 0.5


def choose_split(X, overlap_ratio: float) -> tuple[int, float, float]:
    """Splitting dimension (largest range, lowest index on ties), mean, overlap."""
    X = np.asarray(X, dtype=float)
    spread = X.max(axis=0) - X.min(axis=0)
    dim = int(np.argmax(spread))
    if spread[dim] <= 0.0:
        raise DegenerateSplitError("all points in the leaf are identical")
    return dim, float(X[:, dim].mean()), float(overlap_ratio * spread[dim])


@dataclass
class TreeStats:
    dropped_samples: int = 0
    skipped_updates: int = 0
    evictions: int = 0
    splits: int = 0


class LogGpTree:
    """Streaming local-GP tree for one scalar output.

    Parameters
    ----------
    n_inputs : int
        Input dimension.
    init_hyper : Hyperparameters
        Hyperparameters given to the root leaf (children inherit their
        parent's state at every split).
    max_points : int
        Leaf capacity; a leaf holding this many pairs is split before the
        next one is added.
    overlap_ratio : float
        Overlap width as a fraction of the split dimension's range.
    adapt : bool
        Take one RPROP step per insertion.
    optimize_noise : bool
        Whether the noise std is adapted along with the kernel parameters.
    seed : int, Generator or None
        Source of the routing and split randomness.
    """

    def __init__(
        self,
        n_inputs: int,
        init_hyper: Hyperparameters | None = None,
        max_points: int = 100,
        overlap_ratio: float = 0.1,
        adapt: bool = True,
        optimize_noise: bool = True,
        rprop: RpropConfig = RpropConfig(),
        seed=None,
    ):
        if max_points < 1:
            raise ValueError("max_points must be positive")
        if not 0.0 <= overlap_ratio < 1.0:
            raise ValueError("overlap_ratio must lie in [0, 1)")
        if init_hyper is None:
            init_hyper = Hyperparameters(1.0, np.ones(n_inputs), 0.1)
        if init_hyper.n_inputs != n_inputs:
            raise ValueError("init_hyper lengthscales do not match n_inputs")
        self.n_inputs = int(n_inputs)
        self.init_hyper = init_hyper
        self.max_points = int(max_points)
        self.overlap_ratio = float(overlap_ratio)
        self.adapt = bool(adapt)
        self.optimize_noise = bool(optimize_noise)
        self.rprop = rprop
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.total_count = 0
        self.stats = TreeStats()
        self._active = np.ones(n_inputs + 2, dtype=bool)
        self._active[-1] = self.optimize_noise
        self.root = self._empty_leaf(HyperState.from_hyper(init_hyper, rprop))

    def _empty_leaf(self, state: HyperState) -> LeafNode:
        hp = state.hyper()
        return LeafNode(gp_exact.factorize(np.zeros((0, self.n_inputs)), np.zeros(0), hp), state)

    # -- structure -----------------------------------------------------------
    def leaves(self) -> list[LeafNode]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, LeafNode):
                out.append(node)
            else:
                stack.append(node.right)
                stack.append(node.left)
        return out

    def routing_nodes(self) -> list[RoutingNode]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, RoutingNode):
                out.append(node)
                stack.append(node.right)
                stack.append(node.left)
        return out

    @property
    def depth(self) -> int:
        best, stack = 0, [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if isinstance(node, RoutingNode):
                stack.append((node.left, d + 1))
                stack.append((node.right, d + 1))
        return best

    def __len__(self):
        return self.total_count

    # -- learning ------------------------------------------------------------
    def insert(self, x, y: float) -> None:
        """Add one training pair; split, adapt and refactorize the receiving leaf."""
        x = as_input_vector(x, self.n_inputs)
        y = float(y)
        if not (np.all(np.isfinite(x)) and math.isfinite(y)):
            self.stats.dropped_samples += 1
            raise NonFiniteSampleError("non-finite training sample dropped")

        xs = x.tolist()
        parent, is_right, node = None, False, self.root
        while True:
            while node.__class__ is RoutingNode:
                v = xs[node.dim]
                if v < node.lo:
                    go_right = False
                elif v > node.hi:
                    go_right = True
                else:
                    p = route_probability(node, xs)
                    go_right = p >= 1.0 or (p > 0.0 and self.rng.random() < p)
                parent, is_right = node, go_right
                node = node.right if go_right else node.left
            if node.n_points < self.max_points:
                break
            try:
                new = self._split(node)
            except DegenerateSplitError:
                self._evict_oldest(node)
                self.stats.evictions += 1
                break
            self._replace(parent, is_right, new)
            node = new

        self._add_to_leaf(node, x, y)
        self.total_count += 1

    def _replace(self, parent, is_right, new):
        if parent is None:
            self.root = new
        elif is_right:
            parent.right = new
        else:
            parent.left = new

    def _split(self, leaf: LeafNode) -> RoutingNode:
        X, y = leaf.model.X, leaf.model.y
        dim, split, overlap = choose_split(X, self.overlap_ratio)
        node = RoutingNode(dim, split, overlap)
        p = np.array([route_probability(node, xi) for xi in X])
        right = self.rng.random(X.shape[0]) < p
        hp = leaf.model.hyper
        node.left = LeafNode(gp_exact.factorize(X[~right], y[~right], hp), leaf.hyper_state.copy())
        node.right = LeafNode(gp_exact.factorize(X[right], y[right], hp), leaf.hyper_state.copy())
        self.stats.splits += 1
        return node

    def _evict_oldest(self, leaf: LeafNode):
        m = leaf.model
        leaf.model = gp_exact.factorize(m.X[1:], m.y[1:], m.hyper)

    def _add_to_leaf(self, leaf: LeafNode, x, y):
        leaf.model = gp_exact.insert_point(leaf.model, x, y)
        if self.adapt:
            self.hyper_update_step(leaf)

    def hyper_update_step(self, leaf: LeafNode) -> None:
        """One RPROP ascent step on the leaf's log marginal likelihood, then refactorize."""
        model = leaf.model
        if model.n_points == 0:
            raise ValueError("cannot adapt hyperparameters of an empty leaf")
        try:
            grad = gp_exact.model_log_likelihood_gradient(model)
        except NumericError:
            grad = None
        if grad is None or not np.all(np.isfinite(grad)):
            self.stats.skipped_updates += 1
            return
        # d/d log(theta_i) = theta_i * d/d theta_i
        grad_tilde = grad * model.hyper.to_vector()
        new_state = rprop_step(leaf.hyper_state, grad_tilde, self.rprop, self._active)
        try:
            new_model = gp_exact.refresh_factorization(model, new_state.hyper())
        except NumericError:
            self.stats.skipped_updates += 1
            return
        leaf.hyper_state = new_state
        leaf.model = new_model

    # -- prediction ----------------------------------------------------------
    def leaf_weights(self, x) -> list[tuple[LeafNode, float]]:
        """Active leaves and their path-probability weights (zero weights pruned)."""
        x = as_input_vector(x, self.n_inputs)
        xs = x.tolist()
        out, stack = [], [(self.root, 1.0)]
        while stack:
            node, w = stack.pop()
            if node.__class__ is LeafNode:
                out.append((node, w))
                continue
            v = xs[node.dim]
            if v < node.lo:
                stack.append((node.left, w))
                continue
            if v > node.hi:
                stack.append((node.right, w))
                continue
            p = route_probability(node, xs)
            if p < 1.0:
                stack.append((node.left, w * (1.0 - p)))
            if p > 0.0:
                stack.append((node.right, w * p))
        return out

    def predict(self, x) -> float:
        """Mixture-of-experts mean; empty leaves contribute the zero prior mean."""
        x = as_input_vector(x, self.n_inputs)
        mu = 0.0
        for leaf, w in self.leaf_weights(x):
            m = leaf.model
            if m.n_points:
                mu += w * float(gp_exact.kernel_vector(m.X, x, m.hyper) @ m.alpha)
        return mu

    def check_partition(self) -> int:
        """Total number of stored pairs; raises if it disagrees with ``total_count``."""
        n = sum(leaf.n_points for leaf in self.leaves())
        expected = self.total_count - self.stats.evictions
        if n != expected:
            raise AssertionError(f"leaves hold {n} pairs, expected {expected}")
        return n


class VectorPredictor:
    """One :class:`LogGpTree` per output dimension, all on the same inputs."""

    def __init__(self, trees: list[LogGpTree]):
        if not trees:
            raise ValueError("need at least one tree")
        rho = trees[0].n_inputs
        if any(t.n_inputs != rho for t in trees):
            raise ValueError("all trees must share the input dimension")
        self.trees = list(trees)

    @classmethod
    def create(cls, n_outputs: int, n_inputs: int, seed=None, **tree_kwargs) -> "VectorPredictor":
        """Independent trees with child seeds spawned from ``seed``."""
        if isinstance(seed, np.random.Generator):
            rngs = seed.spawn(n_outputs)
        else:
            rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_outputs)]
        return cls([LogGpTree(n_inputs, seed=r, **tree_kwargs) for r in rngs])

    @property
    def n_outputs(self) -> int:
        return len(self.trees)

    @property
    def n_inputs(self) -> int:
        return self.trees[0].n_inputs

    def predict_vector(self, x) -> np.ndarray:
        x = as_input_vector(x, self.n_inputs)
        return np.array([t.predict(x) for t in self.trees])

    def update_vector(self, x, y, executor=None) -> None:
        """Insert ``(x, y_i)`` into tree ``i``; trees are independent, so an
        executor may run the insertions concurrently."""
        x = as_input_vector(x, self.n_inputs)
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != self.n_outputs:
            raise ValueError(f"expected {self.n_outputs} targets, got {y.shape[0]}")
        if executor is None:
            for tree, yi in zip(self.trees, y):
                tree.insert(x, yi)
        else:
            futures = [executor.submit(t.insert, x, yi) for t, yi in zip(self.trees, y)]
            for f in futures:
                f.result()


def warm_up(n_inputs: int = 2) -> None:
    """Run every insert/split/predict path once on a throwaway tree, so
    compiled helpers and first-call imports are loaded before timing."""
    gp_exact.warm_up()
    tree = LogGpTree(n_inputs, max_points=4, seed=0)
    X = np.random.default_rng(0).normal(size=(12, n_inputs))
    for x in X:
        tree.insert(x, float(x.sum()))
        tree.predict(x)
