"""Forward-only reference of the alignment network: a point-cloud
branch with shifted-window attention over a 32-row tooth grid, a
center-feature branch of shared blocks, fusion, and a 7-parameter
rigid-transform head.

Deterministic given (weights, input). Weights come seeded and
untrained: this module validates shapes, window mechanics, weight
sharing, and masking behavior, not clinical accuracy.

Grid conventions: a 2D feature grid is (rows, cols, C) with rows fixed
at 32 (one per tooth slot) — attention windows tile rows x cols but
merging only ever halves cols. A 1D token sequence is (n, C). Absent
teeth are handled by masking: their rows are blocked as attention keys
and their attention outputs are zeroed, so with zero biases an
all-zero row stays exactly zero through the whole network.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .case import NORM_SCALE_MM, Case, ToothPointImage, tooth_centers
from .errors import BadHeadCount, IndivisibleGrid, OddColumns
from .geometry import RigidTransform, quat_normalize

CHANNELS = 32
HEADS = 4
SWTP_STAGES = 4


@dataclass(frozen=True)
class WindowSpec:
    size: int = 8
    shift: int = 4

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("window size must be positive")
        if not (0 <= self.shift < self.size):
            raise ValueError("shift must lie in [0, size)")


DEFAULT_SPEC = WindowSpec()


# ------------------------------------------------------------- primitives

def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def layer_norm(x: np.ndarray, params: dict, eps: float = 1e-5) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * params["gamma"] + params["beta"]


def window_partition(grid: np.ndarray, spec: WindowSpec = DEFAULT_SPEC) -> np.ndarray:
    """Non-overlapping tiles in row-major order.

    (H, W, C) -> (H/s * W/s, s, s, C); a 1D sequence (n, C) -> (n/s, s, C).
    """
    s = spec.size
    if grid.ndim == 2:
        n, c = grid.shape
        if n % s:
            raise IndivisibleGrid(f"{n} tokens not divisible by window {s}")
        return grid.reshape(n // s, s, c)
    h, w, c = grid.shape
    if h % s or w % s:
        raise IndivisibleGrid(f"{h}x{w} grid not divisible by window {s}")
    tiles = grid.reshape(h // s, s, w // s, s, c)
    return tiles.transpose(0, 2, 1, 3, 4).reshape(-1, s, s, c)


def window_reverse(windows: np.ndarray, grid_shape: tuple, spec: WindowSpec = DEFAULT_SPEC) -> np.ndarray:
    """Exact inverse of window_partition for the given grid shape."""
    s = spec.size
    if len(grid_shape) == 2:
        n, c = grid_shape
        return windows.reshape(n, c)
    h, w, c = grid_shape
    tiles = windows.reshape(h // s, w // s, s, s, c)
    return tiles.transpose(0, 2, 1, 3, 4).reshape(h, w, c)


def cyclic_shift(grid: np.ndarray, shift: int) -> np.ndarray:
    """Rolls the grid cyclically; cyclic_shift(g, -shift) inverts."""
    if grid.ndim == 2:
        return np.roll(grid, -shift, axis=0)
    return np.roll(grid, (-shift, -shift), axis=(0, 1))


def _region_ids_1d(n: int, spec: WindowSpec) -> np.ndarray:
    ids = np.zeros(n, dtype=int)
    if spec.shift:
        ids[n - spec.size : n - spec.shift] = 1
        ids[n - spec.shift :] = 2
    return ids


def window_allow_masks(
    grid_shape: tuple, spec: WindowSpec, shifted: bool, valid: np.ndarray | None = None
) -> np.ndarray:
    """(nwin, L, L) flags of permitted attention pairs per window.

    Combines the wrapped-region separation of a shifted layout (regions
    that were not neighbors before the roll must not attend to each
    other) with key validity: invalid (absent-tooth) cells never serve
    as keys. Without shifting and with everything valid this is all
    True.
    """
    if len(grid_shape) == 2:
        n = grid_shape[0]
        rid = _region_ids_1d(n, spec) if shifted else np.zeros(n, dtype=int)
        rid_w = window_partition(rid[:, None].astype(float), spec)[..., 0].astype(int)
        if valid is None:
            valid_w = np.ones_like(rid_w, dtype=bool)
        else:
            v = valid if not shifted else np.roll(valid, -spec.shift)
            valid_w = window_partition(v[:, None].astype(float), spec)[..., 0] > 0.5
    else:
        h, w = grid_shape[0], grid_shape[1]
        if shifted:
            rid = _region_ids_1d(h, spec)[:, None] * 3 + _region_ids_1d(w, spec)[None, :]
        else:
            rid = np.zeros((h, w), dtype=int)
        rid_w = window_partition(rid[..., None].astype(float), spec)[..., 0]
        rid_w = rid_w.reshape(rid_w.shape[0], -1).astype(int)
        if valid is None:
            valid_w = np.ones_like(rid_w, dtype=bool)
        else:
            v = valid if not shifted else np.roll(valid, (-spec.shift, -spec.shift), (0, 1))
            valid_w = window_partition(v[..., None].astype(float), spec)[..., 0] > 0.5
            valid_w = valid_w.reshape(valid_w.shape[0], -1)
    allow = rid_w[:, :, None] == rid_w[:, None, :]
    return allow & valid_w[:, None, :]


def window_attention(
    windows: np.ndarray, weights: dict, heads: int = HEADS, allow: np.ndarray | None = None
) -> np.ndarray:
    """Multi-head scaled dot-product attention within each window.

    ``windows`` is (nwin, L, C) (flatten tile dims first). Disallowed
    keys get zero attention weight; a query with no allowed key yields
    a zero row. Softmax rows over allowed keys sum to 1.
    """
    nwin, length, c = windows.shape
    if c % heads:
        raise BadHeadCount(f"{c} channels not divisible by {heads} heads")
    dh = c // heads
    q = (windows @ weights["wq"] + weights["bq"]).reshape(nwin, length, heads, dh)
    k = (windows @ weights["wk"] + weights["bk"]).reshape(nwin, length, heads, dh)
    v = (windows @ weights["wv"] + weights["bv"]).reshape(nwin, length, heads, dh)
    scores = np.einsum("nqhd,nkhd->nhqk", q, k) / np.sqrt(dh)
    if allow is not None:
        scores = np.where(allow[:, None, :, :], scores, -np.inf)
    top = scores.max(axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    e = np.exp(scores - top)
    if allow is not None:
        e = np.where(allow[:, None, :, :], e, 0.0)
    denom = e.sum(axis=-1, keepdims=True)
    probs = e / np.where(denom == 0.0, 1.0, denom)
    out = np.einsum("nhqk,nkhd->nqhd", probs, v).reshape(nwin, length, c)
    return out @ weights["wo"] + weights["bo"]


def swin_block(
    grid: np.ndarray,
    spec: WindowSpec,
    weights: dict,
    shifted: bool,
    valid: np.ndarray | None = None,
    heads: int = HEADS,
) -> np.ndarray:
    """Pre-norm transformer block with (shifted-)window attention.

    norm -> windowed attention -> residual, then norm -> MLP ->
    residual. ``valid`` marks live cells (1D: per token, 2D: per grid
    cell); invalid cells neither provide keys nor receive attention
    output, so the attention term for them is exactly zero.
    """
    x = grid
    h = layer_norm(x, weights["ln1"])
    if shifted and spec.shift:
        h = cyclic_shift(h, spec.shift)
    allow = window_allow_masks(grid.shape, spec, shifted and spec.shift > 0, valid)
    win = window_partition(h, spec)
    flat = win.reshape(win.shape[0], -1, win.shape[-1])
    att = window_attention(flat, weights["attn"], heads=heads, allow=allow)
    att = window_reverse(att.reshape(win.shape), grid.shape, spec)
    if shifted and spec.shift:
        att = cyclic_shift(att, -spec.shift)
    if valid is not None:
        att = att * np.asarray(valid, dtype=float)[..., None]
    x = x + att
    h2 = layer_norm(x, weights["ln2"])
    mlp = _gelu(h2 @ weights["mlp"]["w1"] + weights["mlp"]["b1"])
    mlp = mlp @ weights["mlp"]["w2"] + weights["mlp"]["b2"]
    if valid is not None:
        mlp = mlp * np.asarray(valid, dtype=float)[..., None]
    return x + mlp


def column_merge(grid: np.ndarray, weights: dict) -> np.ndarray:
    """Concatenates adjacent column pairs and projects back to C
    channels; rows never mix."""
    h, w, c = grid.shape
    if w % 2:
        raise OddColumns(f"cannot merge {w} columns")
    paired = grid.reshape(h, w // 2, 2 * c)
    return paired @ weights["w"] + weights["b"]


# ------------------------------------------------------------- the branches

def swtbs_forward(
    features: np.ndarray,
    block_weights: dict,
    spec: WindowSpec = DEFAULT_SPEC,
    presence: np.ndarray | None = None,
    heads: int = HEADS,
) -> np.ndarray:
    """Four applications of ONE shared block (alternating regular and
    shifted windows) over a (32, C) token sequence; every application's
    residual is accumulated and added to the final output."""
    x = features
    acc = np.zeros_like(features)
    for shifted in (False, True, False, True):
        nxt = swin_block(x, spec, block_weights, shifted, valid=presence, heads=heads)
        acc = acc + (nxt - x)
        x = nxt
    return x + acc


def swtp_forward(
    grid: np.ndarray,
    weights: dict,
    presence: np.ndarray | None = None,
    spec: WindowSpec = DEFAULT_SPEC,
    heads: int = HEADS,
    return_trace: bool = False,
):
    """Point-branch tower: four stages of [regular block, shifted
    block, column merge] take (32, 512, C) down to (32, 32, C) at
    constant channels, then average-pool the columns to (32, C).

    ``presence`` masks absent tooth rows; pass return_trace=True to get
    the column count after entry and each stage.
    """
    x = grid
    valid = None
    if presence is not None:
        valid = np.broadcast_to(
            np.asarray(presence, dtype=bool)[:, None], x.shape[:2]
        ).copy()
    trace = [x.shape[1]]
    for stage in weights["swtp"]:
        x = swin_block(x, spec, stage["blk_a"], False, valid=valid, heads=heads)
        x = swin_block(x, spec, stage["blk_b"], True, valid=valid, heads=heads)
        x = column_merge(x, stage["merge"])
        if valid is not None:
            valid = valid[:, : x.shape[1]]
        trace.append(x.shape[1])
    pooled = x.mean(axis=1)
    if return_trace:
        return pooled, trace
    return pooled


def positional_encoding(rows: int = 32, channels: int = CHANNELS) -> np.ndarray:
    """Fixed sinusoidal code over tooth slot index."""
    pos = np.arange(rows)[:, None].astype(float)
    i = np.arange(channels // 2)[None, :].astype(float)
    freq = 1.0 / np.power(10000.0, 2.0 * i / channels)
    pe = np.zeros((rows, channels))
    pe[:, 0::2] = np.sin(pos * freq)
    pe[:, 1::2] = np.cos(pos * freq)
    return pe


def center_encoder(centers: np.ndarray, weights: dict) -> np.ndarray:
    """Per-tooth MLP embedding of normalized centers plus the fixed
    positional code, so identical centers at different slots embed
    differently."""
    w = weights["center_mlp"]
    h = _gelu(centers @ w["w1"] + w["b1"])
    emb = h @ w["w2"] + w["b2"]
    return emb + positional_encoding(centers.shape[0], emb.shape[1])


# --------------------------------------------------------------- weights

def _linear(rng, n_in: int, n_out: int) -> dict:
    return {"w": rng.normal(0.0, 0.02, size=(n_in, n_out)), "b": np.zeros(n_out)}


def _block(rng, c: int) -> dict:
    return {
        "ln1": {"gamma": np.ones(c), "beta": np.zeros(c)},
        "attn": {
            "wq": rng.normal(0.0, 0.02, size=(c, c)),
            "wk": rng.normal(0.0, 0.02, size=(c, c)),
            "wv": rng.normal(0.0, 0.02, size=(c, c)),
            "wo": rng.normal(0.0, 0.02, size=(c, c)),
            "bq": np.zeros(c),
            "bk": np.zeros(c),
            "bv": np.zeros(c),
            "bo": np.zeros(c),
        },
        "ln2": {"gamma": np.ones(c), "beta": np.zeros(c)},
        "mlp": {
            "w1": rng.normal(0.0, 0.02, size=(c, 2 * c)),
            "b1": np.zeros(2 * c),
            "w2": rng.normal(0.0, 0.02, size=(2 * c, c)),
            "b2": np.zeros(c),
        },
    }


def init_weights(seed: int, channels: int = CHANNELS, heads: int = HEADS, window: int = 8) -> dict:
    """Full seeded parameter set. One shared block per SWTBS branch;
    distinct blocks per SWTP stage. Biases start at zero."""
    if channels % heads:
        raise BadHeadCount(f"{channels} channels not divisible by {heads} heads")
    rng = np.random.default_rng(seed)
    mlp1 = _linear(rng, 3, channels)
    mlp2 = _linear(rng, channels, channels)
    weights = {
        "meta": {"channels": channels, "heads": heads, "window": window},
        "patch_embed": _linear(rng, 3, channels),
        "center_mlp": {"w1": mlp1["w"], "b1": mlp1["b"], "w2": mlp2["w"], "b2": mlp2["b"]},
        "center_block": _block(rng, channels),
        "swtp": [
            {
                "blk_a": _block(rng, channels),
                "blk_b": _block(rng, channels),
                "merge": _linear(rng, 2 * channels, channels),
            }
            for _ in range(SWTP_STAGES)
        ],
        "fuse_proj": _linear(rng, 2 * channels, channels),
        "fusion_block": _block(rng, channels),
        "head": {
            "w1": rng.normal(0.0, 0.02, size=(channels, channels)),
            "b1": np.zeros(channels),
            "w2": rng.normal(0.0, 0.02, size=(channels, 7)),
            "b2": np.zeros(7),
        },
    }
    return weights


_BIAS_KEYS = {"b", "b1", "b2", "bq", "bk", "bv", "bo", "beta"}


def zero_biases(weights: dict) -> dict:
    """Copy of a weight set with every bias and norm offset zeroed;
    used by the zero-row propagation probes."""
    out = copy.deepcopy(weights)

    def scrub(node):
        if isinstance(node, dict):
            for key, val in node.items():
                if key in _BIAS_KEYS and isinstance(val, np.ndarray):
                    node[key] = np.zeros_like(val)
                else:
                    scrub(val)
        elif isinstance(node, list):
            for item in node:
                scrub(item)

    scrub(out)
    return out


# ------------------------------------------------------------- full model

def predict_transforms(
    tpi: ToothPointImage,
    centers: np.ndarray,
    weights: dict,
    spec: WindowSpec = DEFAULT_SPEC,
) -> dict[int, RigidTransform]:
    """Per-tooth rigid corrections for the present teeth.

    Inputs are in mm; they are normalized internally (shift by the
    mouth center of present teeth, divide by the case scale). The head
    emits 4 quaternion + 3 translation values per row; quaternions are
    normalized (w >= 0), translations rescaled to mm, and each pivot is
    the tooth's center. Absent rows come out as identity internally and
    are omitted from the returned map.
    """
    heads = weights["meta"]["heads"]
    presence = np.asarray(tpi.presence, dtype=bool)
    if not presence.any():
        return {}
    mouth = centers[presence].mean(axis=0)
    data = np.zeros_like(tpi.data)
    data[presence] = (tpi.data[presence] - mouth) / NORM_SCALE_MM
    centers_n = np.zeros_like(centers)
    centers_n[presence] = (centers[presence] - mouth) / NORM_SCALE_MM

    grid = data @ weights["patch_embed"]["w"] + weights["patch_embed"]["b"]
    grid[~presence] = 0.0
    f_t = swtp_forward(grid, weights, presence=presence, spec=spec, heads=heads)
    f_c = swtbs_forward(
        center_encoder(centers_n, weights), weights["center_block"], spec, presence, heads
    )
    fused = (
        np.concatenate([f_c, f_t], axis=1) @ weights["fuse_proj"]["w"]
        + weights["fuse_proj"]["b"]
    )
    fused[~presence] = 0.0
    fused = swtbs_forward(fused, weights["fusion_block"], spec, presence, heads)
    h = _gelu(fused @ weights["head"]["w1"] + weights["head"]["b1"])
    raw = h @ weights["head"]["w2"] + weights["head"]["b2"]

    out: dict[int, RigidTransform] = {}
    for row in np.flatnonzero(presence):
        q = raw[row, :4]
        if np.linalg.norm(q) < 1e-12:
            q = np.array([1.0, 0.0, 0.0, 0.0])
        out[int(row) + 1] = RigidTransform(
            rotation=quat_normalize(q),
            translation=raw[row, 4:] * NORM_SCALE_MM,
            pivot=centers[row],
        )
    return out


def predict_case(case: Case, weights: dict, ordering: str = "arch_line", seed: int = 0) -> Case:
    """One forward pass applied back onto the case geometry."""
    from .arch import fit_case_arches
    from .case import build_tooth_point_image, tooth_assembler

    arches = fit_case_arches(case) if ordering == "arch_line" else None
    tpi = build_tooth_point_image(case, ordering=ordering, arches=arches, seed=seed)
    transforms = predict_transforms(tpi, tooth_centers(case), weights)
    moved_only = {tid: t for tid, t in transforms.items() if case.tooth(tid).moved}
    return tooth_assembler(case, moved_only)
