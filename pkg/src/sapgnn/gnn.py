"""GNN layer functions and the centralized reference model.

One layer is: build a message per directed edge, max-pool messages per node,
apply a local update combining the node's own state with the pooled message,
then apply a global linear map with optional relu and dropout. The same
primitives drive both the multi-party protocol and the single-machine model
it is compared against, so a P=1 protocol run reproduces the reference
bit for bit.

Max pooling records, per element, which source contributed the maximum
(ties to the lowest node rank); the backward pass routes the subgradient to
exactly that source.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .graphs import Graph
from .numerics import NEG_INF, SENTINEL_THRESHOLD, glorot_init, relu, relu_grad, softmax_rows

PROB_CLAMP = 1e-12


class UpdateKind(str, Enum):
    """Local update combining own state h with the pooled message m."""

    SUM = "sum"            # h + m
    CONCAT = "concat"      # h || m
    GATED = "gated"        # relu(W_g h) * m
    NEGATED_SUM = "negated-sum"  # h - m; NOT monotone in m, test-only

    @property
    def monotone(self) -> bool:
        return self is not UpdateKind.NEGATED_SUM


@dataclass
class ModelConfig:
    layers: int = 2
    hidden: int = 16
    update_kind: UpdateKind = UpdateKind.SUM
    relu: bool = True          # applied to every layer output except the last
    dropout: float = 0.0       # likewise, server-side only
    message_linear: bool = False  # message = W_rho h_u instead of h_u

    def __post_init__(self):
        self.update_kind = UpdateKind(self.update_kind)
        if self.layers < 1:
            raise ValueError("need at least one layer")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


@dataclass
class LayerDims:
    d_in: int
    d_msg: int
    t_dim: int
    d_out: int


def layer_dims(cfg: ModelConfig, feat_dim: int) -> list[LayerDims]:
    dims = []
    d_in = feat_dim
    for _ in range(cfg.layers):
        d_msg = d_in
        if cfg.update_kind is UpdateKind.CONCAT:
            t_dim = d_in + d_msg
        else:
            t_dim = d_in
        dims.append(LayerDims(d_in=d_in, d_msg=d_msg, t_dim=t_dim, d_out=cfg.hidden))
        d_in = cfg.hidden
    return dims


def layer_relu_flags(cfg: ModelConfig) -> list[bool]:
    return [cfg.relu and l < cfg.layers - 1 for l in range(cfg.layers)]


def layer_dropout_rates(cfg: ModelConfig) -> list[float]:
    return [cfg.dropout if l < cfg.layers - 1 else 0.0 for l in range(cfg.layers)]


@dataclass
class LayerWeights:
    """Per-layer parameters: local message/gate maps and the global map."""

    w_message: np.ndarray | None
    w_gate: np.ndarray | None
    w_global: np.ndarray
    use_relu: bool
    dropout: float


@dataclass
class LocalWeightSet:
    """The replicated holder-side parameters."""

    w_message: list   # per layer, None unless the linear message variant is on
    w_gate: list      # per layer, None unless the gated update is on
    w_predict: np.ndarray

    def tensors(self):
        """(name, array) pairs in the canonical aggregation order."""
        out = []
        for l, w in enumerate(self.w_message):
            if w is not None:
                out.append((f"w_message[{l}]", w))
        for l, w in enumerate(self.w_gate):
            if w is not None:
                out.append((f"w_gate[{l}]", w))
        out.append(("w_predict", self.w_predict))
        return out


@dataclass
class ModelWeights:
    """Combined view: per-layer weights plus the prediction head."""

    layers: list
    w_predict: np.ndarray


def init_local_weights(cfg: ModelConfig, feat_dim: int, n_classes: int,
                       rng: np.random.Generator) -> LocalWeightSet:
    """Holder-side weights; every holder drawing from the same stream gets
    byte-identical copies (the replication invariant)."""
    dims = layer_dims(cfg, feat_dim)
    w_message, w_gate = [], []
    for d in dims:
        w_message.append(glorot_init(rng, d.d_msg, d.d_in) if cfg.message_linear else None)
        w_gate.append(glorot_init(rng, d.d_msg, d.d_in)
                      if cfg.update_kind is UpdateKind.GATED else None)
    w_predict = glorot_init(rng, n_classes, dims[-1].d_out)
    return LocalWeightSet(w_message=w_message, w_gate=w_gate, w_predict=w_predict)


def init_global_weights(cfg: ModelConfig, feat_dim: int,
                        rng: np.random.Generator) -> list:
    """Server-side per-layer linear maps."""
    return [glorot_init(rng, d.d_out, d.t_dim) for d in layer_dims(cfg, feat_dim)]


def build_model_weights(cfg: ModelConfig, feat_dim: int, n_classes: int,
                        local_rng: np.random.Generator,
                        server_rng: np.random.Generator) -> ModelWeights:
    locals_ = init_local_weights(cfg, feat_dim, n_classes, local_rng)
    globals_ = init_global_weights(cfg, feat_dim, server_rng)
    relus = layer_relu_flags(cfg)
    drops = layer_dropout_rates(cfg)
    layers = [LayerWeights(w_message=locals_.w_message[l], w_gate=locals_.w_gate[l],
                           w_global=globals_[l], use_relu=relus[l], dropout=drops[l])
              for l in range(cfg.layers)]
    return ModelWeights(layers=layers, w_predict=locals_.w_predict)


# ---------------------------------------------------------------------------
# Message construction and pooling
# ---------------------------------------------------------------------------

def message_construct(h_v: np.ndarray, h_u: np.ndarray, h_edge=None,
                      theta_rho: np.ndarray | None = None) -> np.ndarray:
    """Message on one edge: the neighbor state, optionally linearly mapped."""
    if theta_rho is None:
        return np.asarray(h_u, dtype=np.float64)
    return theta_rho @ np.asarray(h_u, dtype=np.float64)


def message_matrix(h: np.ndarray, w_message: np.ndarray | None) -> np.ndarray:
    return h if w_message is None else h @ w_message.T


def aggregate_max(messages):
    """Element-wise max over a nonempty message set plus per-element argmax
    (ties to the lowest index)."""
    arr = np.asarray(messages, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("aggregate_max needs a nonempty set of equal-length vectors")
    return arr.max(axis=0), arr.argmax(axis=0)


def aggregate_min(messages):
    """Min pooling, realized as max pooling over negated values."""
    agg, idx = aggregate_max(-np.asarray(messages, dtype=np.float64))
    return -agg, idx


@dataclass
class NeighborIndex:
    """Directed-edge view grouped by destination; sources ascend within a group."""

    starts: np.ndarray     # group boundaries into src
    dst_nodes: np.ndarray  # destination row per group
    src: np.ndarray        # concatenated source rows

    @classmethod
    def from_edges(cls, edge_ranks: np.ndarray, n: int) -> "NeighborIndex":
        edge_ranks = np.asarray(edge_ranks, dtype=np.int64).reshape(-1, 2)
        if edge_ranks.size == 0:
            empty = np.empty(0, dtype=np.int64)
            return cls(starts=empty, dst_nodes=empty, src=empty)
        directed = np.concatenate([edge_ranks, edge_ranks[:, ::-1]], axis=0)
        order = np.lexsort((directed[:, 1], directed[:, 0]))
        directed = directed[order]
        dst, src = directed[:, 0], directed[:, 1]
        starts = np.flatnonzero(np.r_[True, dst[1:] != dst[:-1]])
        return cls(starts=starts, dst_nodes=dst[starts], src=src)


@dataclass
class LocalTape:
    """Forward record one holder needs to run its backward pass."""

    winner: np.ndarray        # (n, d_msg) source row of the pooled max, -1 if none
    participates: np.ndarray  # (n,) rows with a real (non-sentinel) embedding
    m: np.ndarray             # (n, d_msg) pooled messages
    pre_gate: np.ndarray | None
    d_in: int
    # winner == -1 on a participating row means the pooled message is the
    # constant zero vector (an owned node with no neighbors anywhere), so no
    # max subgradient is routed for it.


def pooled_messages(msg: np.ndarray, idx: NeighborIndex):
    """Per-node element-wise max over incoming messages, with provenance."""
    n, d_msg = msg.shape
    m = np.full((n, d_msg), NEG_INF)
    winner = np.full((n, d_msg), -1, dtype=np.int64)
    if idx.src.size:
        vals = msg[idx.src]
        gmax = np.maximum.reduceat(vals, idx.starts, axis=0)
        counts = np.diff(np.append(idx.starts, len(idx.src)))
        gid = np.repeat(np.arange(len(idx.starts)), counts)
        eq = vals == gmax[gid]
        pos = np.where(eq, np.arange(len(idx.src))[:, None], len(idx.src))
        first = np.minimum.reduceat(pos, idx.starts, axis=0)
        m[idx.dst_nodes] = gmax
        winner[idx.dst_nodes] = idx.src[first]
    return m, winner


def local_embedding(h: np.ndarray, idx: NeighborIndex, iso_ranks: np.ndarray,
                    kind: UpdateKind, w_message: np.ndarray | None,
                    w_gate: np.ndarray | None):
    """One holder's per-node local embeddings over the full node universe.

    Rows for nodes with local neighbors get the local update applied to the
    pooled message; an owned node with no neighbors anywhere in the combined
    graph (listed in iso_ranks) updates against a zero message, so its own
    state still flows through the local update; every other row is the
    sentinel, meaning "this holder knows nothing about this node".
    """
    n = h.shape[0]
    msg = message_matrix(h, w_message)
    m, winner = pooled_messages(msg, idx)
    participates = winner[:, 0] >= 0
    iso_ranks = np.asarray(iso_ranks, dtype=np.int64)
    if iso_ranks.size:
        m[iso_ranks] = 0.0
        participates[iso_ranks] = True

    d_in = h.shape[1]
    d_msg = msg.shape[1]
    pre_gate = None
    if kind is UpdateKind.GATED:
        pre_gate = h @ w_gate.T
    t_dim = d_in + d_msg if kind is UpdateKind.CONCAT else d_in
    if kind in (UpdateKind.SUM, UpdateKind.NEGATED_SUM) and d_msg != d_in:
        raise ValueError("sum-style updates need message dim == input dim")
    if kind is UpdateKind.GATED:
        t_dim = d_msg

    t = np.full((n, t_dim), NEG_INF)
    rows = np.flatnonzero(participates)
    if rows.size:
        if kind is UpdateKind.SUM:
            t[rows] = h[rows] + m[rows]
        elif kind is UpdateKind.CONCAT:
            t[rows] = np.concatenate([h[rows], m[rows]], axis=1)
        elif kind is UpdateKind.GATED:
            t[rows] = relu(pre_gate[rows]) * m[rows]
        elif kind is UpdateKind.NEGATED_SUM:
            t[rows] = h[rows] - m[rows]
    tape = LocalTape(winner=winner, participates=participates, m=m,
                     pre_gate=pre_gate, d_in=d_in)
    return t, tape


def local_backward(h: np.ndarray, tape: LocalTape, kind: UpdateKind,
                   w_message: np.ndarray | None, w_gate: np.ndarray | None,
                   R: np.ndarray):
    """Backward through the local update and pooling.

    R is the loss gradient w.r.t. this holder's local embeddings (zero on
    elements this holder did not win). Returns (dw_message, dw_gate, dH)
    where dH is this holder's accumulated contribution to the gradient with
    respect to the layer input, including the paths through neighbors'
    pooled messages.
    """
    n, d_in = h.shape
    dH = np.zeros((n, d_in))
    dw_message = None if w_message is None else np.zeros_like(w_message)
    dw_gate = None if w_gate is None else np.zeros_like(w_gate)
    rows = np.flatnonzero(tape.participates)
    if rows.size == 0:
        return dw_message, dw_gate, dH
    R_sub = R[rows]

    if kind is UpdateKind.SUM:
        dH[rows] += R_sub
        dM_sub = R_sub
    elif kind is UpdateKind.CONCAT:
        dH[rows] += R_sub[:, :d_in]
        dM_sub = R_sub[:, d_in:]
    elif kind is UpdateKind.GATED:
        pre = tape.pre_gate[rows]
        gate = relu(pre)
        dgate = R_sub * tape.m[rows]
        dpre = dgate * relu_grad(pre)
        dw_gate += dpre.T @ h[rows]
        dH[rows] += dpre @ w_gate
        dM_sub = R_sub * gate
    elif kind is UpdateKind.NEGATED_SUM:
        dH[rows] += R_sub
        dM_sub = -R_sub
    else:  # pragma: no cover
        raise ValueError(kind)

    winner_sub = tape.winner[rows]
    if w_message is None:
        vi, vk = np.nonzero(dM_sub != 0.0)
        if vi.size:
            np.add.at(dH, (winner_sub[vi, vk], vk), dM_sub[vi, vk])
    else:
        d_msg = dM_sub.shape[1]
        for k in range(d_msg):
            sel = dM_sub[:, k] != 0.0
            if not sel.any():
                continue
            srcs = winner_sub[sel, k]
            vals = dM_sub[sel, k]
            dw_message[k] += vals @ h[srcs]
            np.add.at(dH, srcs, vals[:, None] * w_message[k][None, :])
    return dw_message, dw_gate, dH


# ---------------------------------------------------------------------------
# Global update (the server-side half of a layer)
# ---------------------------------------------------------------------------

def global_update(m: np.ndarray, w_global: np.ndarray, use_relu: bool,
                  mask: np.ndarray | None):
    """Linear map, then optional relu, then optional (pre-drawn) dropout mask."""
    z = m @ w_global.T
    a = relu(z) if use_relu else z
    h_next = a * mask if mask is not None else a
    return h_next, z


def global_backward(G: np.ndarray, z: np.ndarray, m: np.ndarray,
                    mask: np.ndarray | None, w_global: np.ndarray, use_relu: bool):
    dz = G * mask if mask is not None else G
    if use_relu:
        dz = dz * relu_grad(z)
    dW = dz.T @ m
    dM = dz @ w_global
    return dW, dM


def stack_max(t_stack: np.ndarray):
    """Element-wise max across holders with the winning holder per element.

    Raises if any node is sentinel at every holder (nobody can embed it).
    """
    m = t_stack.max(axis=0)
    if np.any(m <= SENTINEL_THRESHOLD):
        bad = int(np.flatnonzero((m <= SENTINEL_THRESHOLD).any(axis=1))[0])
        raise ValueError(f"node row {bad} is unknown to every holder")
    winner = t_stack.argmax(axis=0).astype(np.int8)
    return m, winner


def global_embedding(t_stack: np.ndarray, w_global: np.ndarray,
                     use_relu: bool = False, dropout_rng=None, dropout: float = 0.0):
    """Server-side half of a layer: pool per-holder local embeddings by
    element-wise max, then apply the global map with optional relu/dropout.

    The global map reads only the pooled value. A map that also read the
    per-node layer input would need the server to hold it, and at the first
    layer that input is the holders' private features.

    Returns (h_next, winning holder index per element).
    """
    from .numerics import dropout_mask
    m, winner = stack_max(np.asarray(t_stack, dtype=np.float64))
    mask = None
    if dropout > 0.0:
        if dropout_rng is None:
            raise ValueError("dropout requires an rng")
        mask = dropout_mask(dropout_rng, dropout, (m.shape[0], w_global.shape[0]))
    h_next, _z = global_update(m, w_global, use_relu, mask)
    return h_next, winner


# ---------------------------------------------------------------------------
# Prediction and loss
# ---------------------------------------------------------------------------

def predict_probs(h_final: np.ndarray, w_predict: np.ndarray) -> np.ndarray:
    return softmax_rows(h_final @ w_predict.T)


def loss_from_probs(probs: np.ndarray, rows: np.ndarray, classes: np.ndarray) -> float:
    """Unnormalized cross-entropy sum over the given labeled rows (ascending).

    Kept as a sum, not a mean, so per-holder losses add up to exactly the
    loss over all labels.
    """
    if rows.size == 0:
        return 0.0
    p = probs[rows, classes]
    return float(np.sum(-np.log(np.maximum(p, PROB_CLAMP))))


def predict_and_loss(h_final: np.ndarray, label_rows: np.ndarray,
                     label_classes: np.ndarray, w_predict: np.ndarray):
    """Class probabilities for all rows plus this label set's loss."""
    n_classes = w_predict.shape[0]
    if label_classes.size and (label_classes.min() < 0 or label_classes.max() >= n_classes):
        raise ValueError(f"label class outside [0, {n_classes})")
    probs = predict_probs(h_final, w_predict)
    return probs, loss_from_probs(probs, label_rows, label_classes)


def predict_backward(h_final: np.ndarray, probs: np.ndarray, rows: np.ndarray,
                     classes: np.ndarray, w_predict: np.ndarray):
    """Gradients of the summed cross-entropy: (dW_predict, dH over all rows)."""
    dW = np.zeros_like(w_predict)
    dH = np.zeros_like(h_final)
    if rows.size:
        dlogits = probs[rows].copy()
        dlogits[np.arange(len(rows)), classes] -= 1.0
        dW += dlogits.T @ h_final[rows]
        dH[rows] = dlogits @ w_predict
    return dW, dH


# ---------------------------------------------------------------------------
# Centralized reference model
# ---------------------------------------------------------------------------

@dataclass
class ModelGrads:
    w_message: list
    w_gate: list
    w_global: list
    w_predict: np.ndarray


@dataclass
class CentralPass:
    embeddings: list          # h^(2) .. h^(L+1), the per-layer outputs
    loss: float
    probs: np.ndarray
    grads: ModelGrads


def _central_forward(g: Graph, weights: ModelWeights, cfg: ModelConfig,
                     dropout_masks: list | None):
    n = g.n_nodes
    idx = NeighborIndex.from_edges(g.rank_of(g.edges.ravel()).reshape(-1, 2)
                                   if g.edges.size else np.empty((0, 2), dtype=np.int64), n)
    iso = np.flatnonzero(g.degrees() == 0)
    kind = cfg.update_kind

    h = g.features
    hs = [h]
    tapes = []
    server_tapes = []
    for l, lw in enumerate(weights.layers):
        t, tape = local_embedding(h, idx, iso, kind, lw.w_message, lw.w_gate)
        if np.any(~tape.participates):
            raise ValueError("combined graph has a node no computation covers")
        mask = dropout_masks[l] if dropout_masks is not None else None
        h_next, z = global_update(t, lw.w_global, lw.use_relu, mask)
        tapes.append(tape)
        server_tapes.append((t, z, mask))
        h = h_next
        hs.append(h)
    return hs, tapes, server_tapes


def centralized_forward(g: Graph, weights: ModelWeights, cfg: ModelConfig,
                        dropout_masks: list | None = None):
    """Forward-only reference pass: (per-layer embeddings, class probabilities)."""
    hs, _tapes, _server_tapes = _central_forward(g, weights, cfg, dropout_masks)
    return hs[1:], predict_probs(hs[-1], weights.w_predict)


def centralized_forward_backward(g: Graph, weights: ModelWeights, cfg: ModelConfig,
                                 dropout_masks: list | None = None,
                                 train_ids: np.ndarray | None = None) -> CentralPass:
    """Reference forward/backward over the combined graph on one machine.

    Reverse-mode gradients route max subgradients to the recorded argmax
    contributor (ties to the lowest node rank). dropout_masks, when given,
    must hold one pre-drawn mask per layer (or None entries).
    """
    hs, tapes, server_tapes = _central_forward(g, weights, cfg, dropout_masks)
    h = hs[-1]

    ids = train_ids if train_ids is not None else g.train_ids
    rows = g.rank_of(np.sort(ids))
    classes = g.labels[rows]
    probs, loss = predict_and_loss(h, rows, classes, weights.w_predict)

    dW_pred, G = predict_backward(h, probs, rows, classes, weights.w_predict)
    kind = cfg.update_kind
    gw_message, gw_gate, gw_global = [], [], []
    for l in reversed(range(cfg.layers)):
        lw = weights.layers[l]
        t, z, mask = server_tapes[l]
        dW, dM = global_backward(G, z, t, mask, lw.w_global, lw.use_relu)
        dwm, dwg, dH = local_backward(hs[l], tapes[l], kind, lw.w_message, lw.w_gate, dM)
        gw_global.append(dW)
        gw_message.append(dwm)
        gw_gate.append(dwg)
        G = dH
    grads = ModelGrads(w_message=gw_message[::-1], w_gate=gw_gate[::-1],
                       w_global=gw_global[::-1], w_predict=dW_pred)
    return CentralPass(embeddings=hs[1:], loss=loss, probs=probs, grads=grads)


# ---------------------------------------------------------------------------
# Monotone-update validation
# ---------------------------------------------------------------------------

def _apply_update(kind: UpdateKind, h: np.ndarray, m: np.ndarray,
                  w_gate: np.ndarray | None) -> np.ndarray:
    if kind is UpdateKind.SUM:
        return h + m
    if kind is UpdateKind.CONCAT:
        return np.concatenate([h, m])
    if kind is UpdateKind.GATED:
        return relu(w_gate @ h) * m
    if kind is UpdateKind.NEGATED_SUM:
        return h - m
    raise ValueError(kind)


def check_monotone_update(kind: UpdateKind, trials: int, rng: np.random.Generator) -> dict:
    """Empirically test that pooling local maxima then updating equals
    updating the global maximum.

    Each trial samples a node state, a random message set, and a random
    assignment of messages to 2..4 holders (each holder nonempty; monotone
    kinds also get overlapping assignments, the negative control gets a
    disjoint partition). Equality is exact up to 1e-12. Returns the fraction
    of trials where the two sides agree.
    """
    kind = UpdateKind(kind)
    if trials < 1:
        raise ValueError("need at least one trial")
    holds = 0
    for _ in range(trials):
        d = int(rng.integers(2, 6))
        n_msgs = int(rng.integers(2, 7))
        P = int(rng.integers(2, min(4, n_msgs) + 1))
        h = rng.normal(size=d)
        msgs = rng.normal(size=(n_msgs, d))
        w_gate = rng.normal(size=(d, d))
        perm = rng.permutation(n_msgs)
        subsets = [[int(perm[p])] for p in range(P)]
        for j in perm[P:]:
            subsets[int(rng.integers(0, P))].append(int(j))
        if kind.monotone:
            # overlapping holder neighbor sets are allowed and must not matter
            for j in range(n_msgs):
                if rng.random() < 0.3:
                    subsets[int(rng.integers(0, P))].append(j)
        per_holder = np.stack([
            _apply_update(kind, h, msgs[sub].max(axis=0), w_gate) for sub in subsets])
        lhs = per_holder.max(axis=0)
        rhs = _apply_update(kind, h, msgs.max(axis=0), w_gate)
        if np.max(np.abs(lhs - rhs)) <= 1e-12:
            holds += 1
    return {"holds": holds / trials, "trials": trials, "violations": trials - holds}
