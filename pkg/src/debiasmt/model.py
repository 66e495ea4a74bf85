"""Small attention encoder-decoder with hand-written gradients.

Architecture: single-layer gated recurrent encoder; decoder reuses the same
cell with input [target embedding; previous context]; dot-product attention
over encoder states; output logits from an affine map of [decoder state;
context]; decoder initial state from an affine+tanh map of the final encoder
state, initial context zero.

All math runs in float64 for gradient checkability, but parameters and
optimizer moments are kept on the float32 grid after every update so that the
32-bit checkpoint format round-trips bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument, TrainingDivergence
from .vocab import BOS_ID, EOS_ID, PAD_ID, UNK_ID, Vocab

INIT_SCALE = 0.08
# Ids that decoding never proposes (scoring still assigns them probability).
BANNED_DECODE_IDS = (BOS_ID, UNK_ID, PAD_ID)

Params = dict[str, np.ndarray]
IdPair = tuple[list[int], list[int]]


@dataclass
class ModelConfig:
    src_vocab_size: int
    tgt_vocab_size: int
    embed_dim: int = 32
    hidden_dim: int = 64
    max_decode_factor: int = 2
    max_decode_extra: int = 5
    seed: int = 0

    def max_decode_len(self, src_len: int) -> int:
        return self.max_decode_factor * src_len + self.max_decode_extra

    def to_dict(self) -> dict:
        return {
            "src_vocab_size": self.src_vocab_size,
            "tgt_vocab_size": self.tgt_vocab_size,
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "max_decode_factor": self.max_decode_factor,
            "max_decode_extra": self.max_decode_extra,
            "seed": self.seed,
        }


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    de, dh = config.embed_dim, config.hidden_dim
    din = de + dh  # decoder cell input: [target embedding; previous context]
    shapes: dict[str, tuple[int, ...]] = {
        "src_emb": (config.src_vocab_size, de),
        "tgt_emb": (config.tgt_vocab_size, de),
    }
    for gate in ("z", "r", "n"):
        shapes[f"enc_W{gate}"] = (de, dh)
        shapes[f"enc_U{gate}"] = (dh, dh)
        shapes[f"enc_b{gate}"] = (dh,)
    for gate in ("z", "r", "n"):
        shapes[f"dec_W{gate}"] = (din, dh)
        shapes[f"dec_U{gate}"] = (dh, dh)
        shapes[f"dec_b{gate}"] = (dh,)
    shapes["init_W"] = (dh, dh)
    shapes["init_b"] = (dh,)
    shapes["out_W"] = (2 * dh, config.tgt_vocab_size)
    shapes["out_b"] = (config.tgt_vocab_size,)
    return shapes


def n_params(config: ModelConfig) -> int:
    return sum(int(np.prod(s)) for s in param_shapes(config).values())


def init_params(config: ModelConfig) -> Params:
    """Seeded uniform init in [-INIT_SCALE, INIT_SCALE]."""
    if config.embed_dim < 1 or config.hidden_dim < 1:
        raise InvalidArgument("embed_dim and hidden_dim must be >= 1")
    if config.src_vocab_size < 5 or config.tgt_vocab_size < 5:
        raise InvalidArgument("vocabularies must hold the 4 control ids plus content")
    rng = np.random.RandomState(config.seed)
    params: Params = {}
    for name, shape in param_shapes(config).items():
        values = rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
        params[name] = values.astype(np.float32).astype(np.float64)
    return params


def zero_grads(params: Params) -> Params:
    return {k: np.zeros_like(v) for k, v in params.items()}


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _gru_forward(p: Params, prefix: str, x, h_prev):
    z = _sigmoid(x @ p[f"{prefix}_Wz"] + h_prev @ p[f"{prefix}_Uz"] + p[f"{prefix}_bz"])
    r = _sigmoid(x @ p[f"{prefix}_Wr"] + h_prev @ p[f"{prefix}_Ur"] + p[f"{prefix}_br"])
    rh = r * h_prev
    n = np.tanh(x @ p[f"{prefix}_Wn"] + rh @ p[f"{prefix}_Un"] + p[f"{prefix}_bn"])
    h = (1.0 - z) * n + z * h_prev
    return h, (x, h_prev, z, r, rh, n)


def _gru_backward(p: Params, g: Params, prefix: str, cache, dh):
    x, h_prev, z, r, rh, n = cache
    dn = dh * (1.0 - z)
    dz = dh * (h_prev - n)
    dh_prev = dh * z
    dan = dn * (1.0 - n * n)
    g[f"{prefix}_Wn"] += x.T @ dan
    g[f"{prefix}_Un"] += rh.T @ dan
    g[f"{prefix}_bn"] += dan.sum(axis=0)
    dx = dan @ p[f"{prefix}_Wn"].T
    drh = dan @ p[f"{prefix}_Un"].T
    dr = drh * h_prev
    dh_prev += drh * r
    daz = dz * z * (1.0 - z)
    dar = dr * r * (1.0 - r)
    g[f"{prefix}_Wz"] += x.T @ daz
    g[f"{prefix}_Uz"] += h_prev.T @ daz
    g[f"{prefix}_bz"] += daz.sum(axis=0)
    g[f"{prefix}_Wr"] += x.T @ dar
    g[f"{prefix}_Ur"] += h_prev.T @ dar
    g[f"{prefix}_br"] += dar.sum(axis=0)
    dx += daz @ p[f"{prefix}_Wz"].T + dar @ p[f"{prefix}_Wr"].T
    dh_prev += daz @ p[f"{prefix}_Uz"].T + dar @ p[f"{prefix}_Ur"].T
    return dx, dh_prev


def _encode(p: Params, src: np.ndarray):
    """src: (B, S) int array -> H (B, S, dh) plus per-step caches."""
    B, S = src.shape
    dh = p["enc_Uz"].shape[0]
    X = p["src_emb"][src]  # (B, S, de)
    h = np.zeros((B, dh))
    states = np.empty((B, S, dh))
    caches = []
    for t in range(S):
        h, cache = _gru_forward(p, "enc", X[:, t], h)
        states[:, t] = h
        caches.append(cache)
    return states, caches


def _init_decoder_state(p: Params, enc_final: np.ndarray):
    pre = enc_final @ p["init_W"] + p["init_b"]
    return np.tanh(pre)


def _attend(H: np.ndarray, h: np.ndarray):
    scores = np.einsum("bsd,bd->bs", H, h)
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    alpha = e / e.sum(axis=1, keepdims=True)
    context = np.einsum("bs,bsd->bd", alpha, H)
    return context, alpha


def _decode_step(p: Params, y_emb, c_prev, h_prev, H):
    """One decoder step for a batch. Returns logits, new h, new c, cache."""
    inp = np.concatenate([y_emb, c_prev], axis=1)
    h, gru_cache = _gru_forward(p, "dec", inp, h_prev)
    c, alpha = _attend(H, h)
    o = np.concatenate([h, c], axis=1)
    logits = o @ p["out_W"] + p["out_b"]
    return logits, h, c, (gru_cache, alpha, h, c, o)


def _bucket_pairs(batch: Sequence[IdPair]):
    buckets: dict[tuple[int, int], list[int]] = {}
    order: list[tuple[int, int]] = []
    for i, (src, tgt) in enumerate(batch):
        key = (len(src), len(tgt))
        if key not in buckets:
            buckets[key] = []
            order.append(key)
        buckets[key].append(i)
    return [(key, buckets[key]) for key in order]


def _validate_ids(config_sizes: tuple[int, int], src: Sequence[int], tgt: Sequence[int]):
    sv, tv = config_sizes
    if not src or not tgt:
        raise InvalidArgument("empty sentence in batch")
    if min(src) < 0 or max(src) >= sv:
        raise InvalidArgument("source token id out of range")
    if min(tgt) < 0 or max(tgt) >= tv:
        raise InvalidArgument("target token id out of range")


def loss_and_grad(params: Params, batch: Sequence[IdPair]) -> tuple[float, Params]:
    """Mean per-token negative log-likelihood with teacher forcing, plus exact
    gradients for every parameter.

    Batch items are (source ids, target surface ids); an EOS step is appended
    to every target internally and counts as a predicted token.
    """
    if not batch:
        raise InvalidArgument("empty batch")
    sv = params["src_emb"].shape[0]
    tv = params["tgt_emb"].shape[0]
    for src, tgt in batch:
        _validate_ids((sv, tv), src, tgt)
    grads = zero_grads(params)
    total_nll = 0.0
    total_tokens = 0
    for (_, _), idxs in _bucket_pairs(batch):
        sub = [batch[i] for i in idxs]
        nll, tokens = _forward_backward_bucket(params, grads, sub)
        total_nll += nll
        total_tokens += tokens
    if not np.isfinite(total_nll):
        for i, pair in enumerate(batch):
            g = zero_grads(params)
            nll, _ = _forward_backward_bucket(params, g, [pair])
            if not np.isfinite(nll):
                raise TrainingDivergence(
                    f"non-finite loss at batch index {i}", batch_index=i
                )
        raise TrainingDivergence("non-finite loss", batch_index=None)
    scale = 1.0 / total_tokens
    for name in grads:
        grads[name] *= scale
    return total_nll * scale, grads


def _forward_backward_bucket(params: Params, grads: Params, sub: Sequence[IdPair]):
    """Sum-NLL forward/backward over same-shape pairs; grads accumulate unscaled."""
    src = np.array([s for s, _ in sub], dtype=np.int64)
    surface = np.array([t for _, t in sub], dtype=np.int64)
    B, S = src.shape
    T = surface.shape[1] + 1  # EOS step appended
    tgt_out = np.concatenate(
        [surface, np.full((B, 1), EOS_ID, dtype=np.int64)], axis=1
    )
    tgt_in = np.concatenate(
        [np.full((B, 1), BOS_ID, dtype=np.int64), surface], axis=1
    )

    H, enc_caches = _encode(params, src)
    dh_dim = H.shape[2]
    h = _init_decoder_state(params, H[:, -1])
    init_cache_h0 = h
    c = np.zeros((B, dh_dim))
    step_caches = []
    dlogits_steps = []
    nll = 0.0
    rows = np.arange(B)
    for t in range(T):
        y_emb = params["tgt_emb"][tgt_in[:, t]]
        logits, h, c, cache = _decode_step(params, y_emb, c, h, H)
        logp = log_softmax(logits)
        nll -= logp[rows, tgt_out[:, t]].sum()
        dlogits = np.exp(logp)
        dlogits[rows, tgt_out[:, t]] -= 1.0
        step_caches.append((tgt_in[:, t], y_emb, cache))
        dlogits_steps.append(dlogits)

    dH = np.zeros_like(H)
    carry_dh = np.zeros((B, dh_dim))
    carry_dc = np.zeros((B, dh_dim))
    for t in range(T - 1, -1, -1):
        y_ids, y_emb, (gru_cache, alpha, h_t, c_t, o_t) = step_caches[t]
        dlogits = dlogits_steps[t]
        grads["out_W"] += o_t.T @ dlogits
        grads["out_b"] += dlogits.sum(axis=0)
        do = dlogits @ params["out_W"].T
        dh_t = do[:, :dh_dim] + carry_dh
        dc_t = do[:, dh_dim:] + carry_dc
        # attention backward
        dalpha = np.einsum("bd,bsd->bs", dc_t, H)
        dH += alpha[:, :, None] * dc_t[:, None, :]
        dscores = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
        dh_t += np.einsum("bs,bsd->bd", dscores, H)
        dH += dscores[:, :, None] * h_t[:, None, :]
        dinp, carry_dh = _gru_backward(params, grads, "dec", gru_cache, dh_t)
        d_emb = dinp[:, : y_emb.shape[1]]
        carry_dc = dinp[:, y_emb.shape[1]:]
        np.add.at(grads["tgt_emb"], y_ids, d_emb)
    # decoder init projection; the first step's context is a constant zero
    dh0 = carry_dh
    dpre = dh0 * (1.0 - init_cache_h0 * init_cache_h0)
    grads["init_W"] += H[:, -1].T @ dpre
    grads["init_b"] += dpre.sum(axis=0)
    dH[:, -1] += dpre @ params["init_W"].T

    carry = np.zeros((B, dh_dim))
    src_emb_d = params["src_emb"].shape[1]
    dX = np.empty((B, S, src_emb_d))
    for t in range(S - 1, -1, -1):
        dh_t = dH[:, t] + carry
        dx, carry = _gru_backward(params, grads, "enc", enc_caches[t], dh_t)
        dX[:, t] = dx
    np.add.at(grads["src_emb"], src.ravel(), dX.reshape(-1, src_emb_d))
    return float(nll), B * T


# ---------------------------------------------------------------------------
# Scoring and decoding
# ---------------------------------------------------------------------------

def score_sequence(params: Params, src: Sequence[int], tgt: Sequence[int]) -> float:
    """Exact log-probability of an EOS-terminated target sequence."""
    return float(score_sequences(params, src, [list(tgt)])[0])


def score_sequences(
    params: Params, src: Sequence[int], targets: Sequence[Sequence[int]]
) -> np.ndarray:
    """Log-probabilities of several EOS-terminated targets for one source.

    Targets may have different lengths; they are scored in same-length groups
    against a single encoding of the source.
    """
    sv = params["src_emb"].shape[0]
    tv = params["tgt_emb"].shape[0]
    if not src or min(src) < 0 or max(src) >= sv:
        raise InvalidArgument("source token id out of range")
    for tgt in targets:
        if not tgt or tgt[-1] != EOS_ID:
            raise InvalidArgument("target must be EOS-terminated")
        if min(tgt) < 0 or max(tgt) >= tv:
            raise InvalidArgument("target token id out of range")
    H1, _ = _encode(params, np.array([src], dtype=np.int64))
    scores = np.empty(len(targets))
    groups: dict[int, list[int]] = {}
    for i, tgt in enumerate(targets):
        groups.setdefault(len(tgt), []).append(i)
    dh = H1.shape[2]
    for length, idxs in groups.items():
        B = len(idxs)
        out = np.array([list(targets[i]) for i in idxs], dtype=np.int64)
        tin = np.concatenate(
            [np.full((B, 1), BOS_ID, dtype=np.int64), out[:, :-1]], axis=1
        )
        H = np.broadcast_to(H1, (B,) + H1.shape[1:])
        h = _init_decoder_state(params, H[:, -1])
        c = np.zeros((B, dh))
        logp_total = np.zeros(B)
        rows = np.arange(B)
        for t in range(length):
            y_emb = params["tgt_emb"][tin[:, t]]
            logits, h, c, _ = _decode_step(params, y_emb, c, h, H)
            logp_total += log_softmax(logits)[rows, out[:, t]]
        for b, i in enumerate(idxs):
            scores[i] = logp_total[b]
    return scores


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]  # EOS-terminated when reached_eos is True
    log_prob: float
    reached_eos: bool = True


def _pick_top(cand_scores: np.ndarray, beams_tokens: list[tuple[int, ...]], k: int):
    """Indices of the k best (beam, token) candidates, ranked by score and, on
    exact ties, by lexicographically smaller full token sequence."""
    flat = cand_scores.ravel()
    V = cand_scores.shape[1]
    finite = np.flatnonzero(flat > -np.inf)
    if len(finite) <= k:
        chosen = finite
    else:
        part = finite[np.argpartition(-flat[finite], k - 1)]
        boundary = np.sort(-flat[part[:k]])[-1]
        chosen = finite[flat[finite] >= -boundary]

    def key(idx: int):
        w, v = divmod(int(idx), V)
        return (-flat[idx], beams_tokens[w] + (v,))

    return sorted(chosen.tolist(), key=key)[:k]


def beam_search(
    params: Params,
    src: Sequence[int],
    beam_width: int = 4,
    max_len: int | None = None,
) -> Hypothesis:
    """Length-unnormalized sum-log-prob beam search.

    Returns the best EOS-terminated hypothesis; if none finishes within
    `max_len` steps the best unfinished prefix is returned with
    ``reached_eos=False``. Ties break toward the lexicographically smaller
    token id sequence.
    """
    if beam_width < 1:
        raise InvalidArgument("beam_width must be >= 1")
    sv = params["src_emb"].shape[0]
    if not src or min(src) < 0 or max(src) >= sv:
        raise InvalidArgument("source token id out of range")
    if max_len is None:
        max_len = 2 * len(src) + 5
    H1, _ = _encode(params, np.array([src], dtype=np.int64))
    dh = H1.shape[2]
    h = _init_decoder_state(params, H1[:, -1])
    c = np.zeros((1, dh))
    beams_tokens: list[tuple[int, ...]] = [()]
    beams_logp = np.zeros(1)
    finished: list[tuple[float, tuple[int, ...]]] = []
    for _ in range(max_len):
        B = len(beams_tokens)
        prev = np.array(
            [t[-1] if t else BOS_ID for t in beams_tokens], dtype=np.int64
        )
        H = np.broadcast_to(H1, (B,) + H1.shape[1:])
        logits, h, c, _ = _decode_step(params, params["tgt_emb"][prev], c, h, H)
        logp = log_softmax(logits)
        cand = beams_logp[:, None] + logp
        masked = cand.copy()
        masked[:, list(BANNED_DECODE_IDS)] = -np.inf
        top = _pick_top(masked, beams_tokens, beam_width)
        new_tokens: list[tuple[int, ...]] = []
        new_logp = []
        parent_rows = []
        V = cand.shape[1]
        for idx in top:
            w, v = divmod(idx, V)
            score = float(cand[w, v])
            if v == EOS_ID:
                finished.append((score, beams_tokens[w] + (EOS_ID,)))
            else:
                new_tokens.append(beams_tokens[w] + (v,))
                new_logp.append(score)
                parent_rows.append(w)
        if not new_tokens:
            break
        best_finished = max(finished)[0] if finished else -np.inf
        if finished and max(new_logp) < best_finished:
            break
        beams_tokens = new_tokens
        beams_logp = np.array(new_logp)
        h = h[parent_rows]
        c = c[parent_rows]
    if finished:
        score, tokens = min(finished, key=lambda st: (-st[0], st[1]))
        return Hypothesis(tokens=tokens, log_prob=score, reached_eos=True)
    order = min(range(len(beams_tokens)),
                key=lambda i: (-beams_logp[i], beams_tokens[i]))
    return Hypothesis(
        tokens=beams_tokens[order],
        log_prob=float(beams_logp[order]),
        reached_eos=False,
    )


def greedy_decode_batch(
    params: Params, sources: Sequence[Sequence[int]], max_len: int
) -> list[Hypothesis]:
    """Batched greedy decode of equal-length sources.

    Equivalent to beam_search with width 1 on each source: per-step argmax
    over permitted ids (np.argmax prefers the smallest id on ties, matching
    the beam tie-break), sequence truncated at its first EOS.
    """
    src = np.array(sources, dtype=np.int64)
    B = src.shape[0]
    H, _ = _encode(params, src)
    dh = H.shape[2]
    h = _init_decoder_state(params, H[:, -1])
    c = np.zeros((B, dh))
    prev = np.full(B, BOS_ID, dtype=np.int64)
    token_rows = np.empty((B, max_len), dtype=np.int64)
    logp_rows = np.empty((B, max_len))
    for t in range(max_len):
        logits, h, c, _ = _decode_step(params, params["tgt_emb"][prev], c, h, H)
        logp = log_softmax(logits)
        masked = logp.copy()
        masked[:, list(BANNED_DECODE_IDS)] = -np.inf
        choice = masked.argmax(axis=1)
        token_rows[:, t] = choice
        logp_rows[:, t] = logp[np.arange(B), choice]
        prev = choice
    out: list[Hypothesis] = []
    for b in range(B):
        row = token_rows[b]
        eos_pos = np.flatnonzero(row == EOS_ID)
        if len(eos_pos):
            end = int(eos_pos[0]) + 1
            out.append(Hypothesis(
                tokens=tuple(int(x) for x in row[:end]),
                log_prob=float(logp_rows[b, :end].sum()),
                reached_eos=True,
            ))
        else:
            out.append(Hypothesis(
                tokens=tuple(int(x) for x in row),
                log_prob=float(logp_rows[b].sum()),
                reached_eos=False,
            ))
    return out


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

def adam_init(params: Params) -> dict:
    return {
        "m": {k: np.zeros_like(v) for k, v in params.items()},
        "v": {k: np.zeros_like(v) for k, v in params.items()},
        "t": 0,
    }


def adam_step(
    params: Params,
    grads: Params,
    state: dict,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[Params, dict]:
    """Standard bias-corrected adaptive-moment update, in place.

    Parameters and moments are re-quantized to the float32 grid afterwards so
    in-memory state always matches its checkpoint file bit for bit.
    """
    state["t"] += 1
    t = state["t"]
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, g in grads.items():
        m = state["m"][name]
        v = state["v"][name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
        _quantize(params[name])
        _quantize(m)
        _quantize(v)
    return params, state


def _quantize(arr: np.ndarray) -> None:
    arr[...] = arr.astype(np.float32).astype(np.float64)


def copy_params(params: Params) -> Params:
    return {k: v.copy() for k, v in params.items()}


def copy_adam_state(state: dict) -> dict:
    return {
        "m": {k: v.copy() for k, v in state["m"].items()},
        "v": {k: v.copy() for k, v in state["v"].items()},
        "t": state["t"],
    }


# ---------------------------------------------------------------------------
# Checkpoint format: one JSON manifest line (tensor name, shape, byte offset),
# then concatenated row-major little-endian float32 buffers.
# ---------------------------------------------------------------------------

def save_tensors(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    manifest = []
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(data)
        offset += len(data)
    header = json.dumps(
        {"format": "tensors-v1", "tensors": manifest}, separators=(",", ":")
    ).encode("utf-8") + b"\n"
    Path(path).write_bytes(header + b"".join(blobs))


def load_tensors(path: str | Path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    meta = json.loads(raw[:nl].decode("utf-8"))
    if meta.get("format") != "tensors-v1":
        raise InvalidArgument(f"{path}: not a tensor checkpoint")
    data = raw[nl + 1:]
    out: dict[str, np.ndarray] = {}
    for entry in meta["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=start)
        out[entry["name"]] = arr.reshape(shape).astype(np.float64)
    return out


def save_params(path: str | Path, params: Params) -> None:
    save_tensors(path, params)


def load_params(path: str | Path, config: ModelConfig | None = None) -> Params:
    params = load_tensors(path)
    if config is not None:
        expected = param_shapes(config)
        if set(expected) != set(params) or any(
            params[k].shape != expected[k] for k in expected
        ):
            raise InvalidArgument(f"{path}: tensor shapes do not match config")
    return params


def save_adam_state(path: str | Path, state: dict) -> None:
    tensors = {f"m.{k}": v for k, v in state["m"].items()}
    tensors.update({f"v.{k}": v for k, v in state["v"].items()})
    tensors["t"] = np.array([float(state["t"])])
    save_tensors(path, tensors)


def load_adam_state(path: str | Path) -> dict:
    tensors = load_tensors(path)
    state = {"m": {}, "v": {}, "t": int(tensors.pop("t")[0])}
    for name, arr in tensors.items():
        kind, key = name.split(".", 1)
        state[kind][key] = arr
    return state


# ---------------------------------------------------------------------------
# String-level convenience wrapper
# ---------------------------------------------------------------------------

class Translator:
    """Bundles parameters, config, and vocabularies for token-level decoding."""

    def __init__(
        self,
        params: Params,
        config: ModelConfig,
        src_vocab: Vocab,
        tgt_vocab: Vocab,
        beam_width: int = 4,
    ):
        self.params = params
        self.config = config
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.beam_width = beam_width

    def translate_tokens(
        self, tokens: Sequence[str], beam_width: int | None = None
    ) -> list[str]:
        width = self.beam_width if beam_width is None else beam_width
        src = self.src_vocab.ids(tokens)
        hyp = beam_search(
            self.params, src, width, self.config.max_decode_len(len(src))
        )
        return self.tgt_vocab.words(hyp.tokens)

    def translate_corpus(
        self, sources: Iterable[Sequence[str]], beam_width: int | None = None
    ) -> tuple[list[list[str]], int]:
        """Decode many sentences; returns the surface token sequences and how
        many decodes had to be cut off at the length limit (those sequences
        get an end marker appended internally before the cut is counted)."""
        width = self.beam_width if beam_width is None else beam_width
        sources = [list(s) for s in sources]
        truncated = 0
        results: list[list[str] | None] = [None] * len(sources)
        if width == 1:
            groups: dict[int, list[int]] = {}
            for i, s in enumerate(sources):
                groups.setdefault(len(s), []).append(i)
            for length, idxs in groups.items():
                batch = [self.src_vocab.ids(sources[i]) for i in idxs]
                hyps = greedy_decode_batch(
                    self.params, batch, self.config.max_decode_len(length)
                )
                for i, hyp in zip(idxs, hyps):
                    if not hyp.reached_eos:
                        truncated += 1
                    results[i] = self.tgt_vocab.words(hyp.tokens)
        else:
            for i, s in enumerate(sources):
                src = self.src_vocab.ids(s)
                hyp = beam_search(
                    self.params, src, width, self.config.max_decode_len(len(src))
                )
                if not hyp.reached_eos:
                    truncated += 1
                results[i] = self.tgt_vocab.words(hyp.tokens)
        return [r for r in results if r is not None], truncated

    def score_tokens(self, src_tokens: Sequence[str], tgt_tokens: Sequence[str]) -> float:
        src = self.src_vocab.ids(src_tokens)
        tgt = self.tgt_vocab.ids(tgt_tokens) + [EOS_ID]
        return score_sequence(self.params, src, tgt)
