"""Binary snapshots of a :class:`~loggpctl.loggp.VectorPredictor`.

Layout (little-endian throughout)::

    header   magic b"LGPT", uint16 version, uint32 rho, uint32 d, uint32 max_points
    d times  tree block:
        float64 overlap_ratio, uint8 adapt, uint8 optimize_noise,
        uint64 total_count, 4 x uint64 stats (dropped, skipped, evictions, splits),
        7 x float64 RPROP constants, (rho + 2) x float64 initial hyperparameters,
        uint32 length + UTF-8 JSON of the routing RNG state,
        uint64 node count, then the nodes in preorder:
            uint8 0 (routing): uint32 dim, float64 split, float64 overlap
            uint8 1 (leaf):    uint32 n, (rho + 2) x float64 log-hyperparameters,
                               (rho + 2) x float64 step widths, (rho + 2) x float64
                               previous signs, n*rho x float64 inputs (row-major),
                               n x float64 targets

Hyperparameters are stored as ``(sigma_f, l_1..l_rho, sigma_on)``.  Cholesky
factors are not stored; leaves are refactorized on load.
"""
from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from . import gp_exact
from .gp_exact import Hyperparameters
from .loggp import HyperState, LeafNode, LogGpTree, RoutingNode, RpropConfig, TreeStats, VectorPredictor

__all__ = ["MAGIC", "VERSION", "dumps", "loads", "save", "load"]

MAGIC = b"LGPT"
VERSION = 1
_HEADER = struct.Struct("<4sHIII")
_TREE = struct.Struct("<dBBQ4Q7d")
_ROUTE = struct.Struct("<Idd")
_RPROP_FIELDS = ("step_init", "eta_plus", "eta_minus", "step_min", "step_max", "theta_min", "theta_max")


def _f64(buf: io.BytesIO, a) -> None:
    buf.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def _write_tree(buf: io.BytesIO, tree: LogGpTree) -> None:
    s = tree.stats
    buf.write(_TREE.pack(tree.overlap_ratio, tree.adapt, tree.optimize_noise, tree.total_count,
                         s.dropped_samples, s.skipped_updates, s.evictions, s.splits,
                         *(getattr(tree.rprop, f) for f in _RPROP_FIELDS)))
    _f64(buf, tree.init_hyper.to_vector())
    rng = json.dumps(tree.rng.bit_generator.state, sort_keys=True).encode()
    buf.write(struct.pack("<I", len(rng)))
    buf.write(rng)
    nodes, stack = [], [tree.root]
    while stack:
        node = stack.pop()
        nodes.append(node)
        if isinstance(node, RoutingNode):
            stack.append(node.right)
            stack.append(node.left)
    buf.write(struct.pack("<Q", len(nodes)))
    for node in nodes:
        if isinstance(node, RoutingNode):
            buf.write(b"\x00" + _ROUTE.pack(node.dim, node.split, node.overlap))
        else:
            m, hs = node.model, node.hyper_state
            buf.write(b"\x01" + struct.pack("<I", m.n_points))
            for a in (hs.theta_tilde, hs.step_widths, hs.prev_signs, m.X, m.y):
                _f64(buf, a)


def dumps(predictor: VectorPredictor) -> bytes:
    buf = io.BytesIO()
    t0 = predictor.trees[0]
    buf.write(_HEADER.pack(MAGIC, VERSION, predictor.n_inputs, predictor.n_outputs, t0.max_points))
    for tree in predictor.trees:
        if tree.max_points != t0.max_points:
            raise ValueError("all trees must share max_points")
        _write_tree(buf, tree)
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("snapshot is truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, st: struct.Struct):
        return st.unpack(self.take(st.size))

    def f64(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(float)


def _read_tree(r: _Reader, rho: int, max_points: int) -> LogGpTree:
    (overlap_ratio, adapt, opt_noise, total, dropped, skipped, evictions, splits, *rp) = r.unpack(_TREE)
    rprop = RpropConfig(**dict(zip(_RPROP_FIELDS, rp)))
    init_hyper = Hyperparameters.from_vector(r.f64(rho + 2))
    (n_rng,) = struct.unpack("<I", r.take(4))
    rng_state = json.loads(r.take(n_rng).decode())
    tree = LogGpTree(rho, init_hyper=init_hyper, max_points=max_points, overlap_ratio=overlap_ratio,
                     adapt=bool(adapt), optimize_noise=bool(opt_noise), rprop=rprop, seed=0)
    tree.rng.bit_generator.state = rng_state
    tree.total_count = int(total)
    tree.stats = TreeStats(int(dropped), int(skipped), int(evictions), int(splits))
    (n_nodes,) = struct.unpack("<Q", r.take(8))

    def read_node():
        (tag,) = r.take(1)
        if tag == 0:
            dim, split, overlap = r.unpack(_ROUTE)
            if dim >= rho:
                raise ValueError(f"routing dimension {dim} out of range")
            return RoutingNode(dim, split, overlap)
        if tag != 1:
            raise ValueError(f"unknown node tag {tag}")
        (n,) = struct.unpack("<I", r.take(4))
        state = HyperState(r.f64(rho + 2), r.f64(rho + 2), r.f64(rho + 2))
        X = r.f64(n * rho).reshape(n, rho)
        y = r.f64(n)
        return LeafNode(gp_exact.factorize(X, y, state.hyper()), state)

    # preorder rebuild with an explicit stack of open child slots (deep trees are common)
    tree.root = read_node()
    count = 1
    open_slots = [(tree.root, "right"), (tree.root, "left")] if isinstance(tree.root, RoutingNode) else []
    while open_slots:
        parent, side = open_slots.pop()
        child = read_node()
        count += 1
        setattr(parent, side, child)
        if isinstance(child, RoutingNode):
            open_slots.append((child, "right"))
            open_slots.append((child, "left"))
    if count != n_nodes:
        raise ValueError(f"tree block declares {n_nodes} nodes but holds {count}")
    return tree


def loads(data: bytes) -> VectorPredictor:
    r = _Reader(bytes(data))
    magic, version, rho, d, max_points = r.unpack(_HEADER)
    if magic != MAGIC:
        raise ValueError(f"not a tree snapshot (magic {magic!r})")
    if version != VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    pred = VectorPredictor([_read_tree(r, rho, max_points) for _ in range(d)])
    if r.pos != len(r.data):
        raise ValueError(f"{len(r.data) - r.pos} trailing bytes after snapshot")
    return pred


def save(predictor: VectorPredictor, path) -> Path:
    path = Path(path)
    path.write_bytes(dumps(predictor))
    return path


def load(path) -> VectorPredictor:
    return loads(Path(path).read_bytes())
