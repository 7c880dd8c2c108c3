"""Alignment losses: reconstruction, transform, occlusal-overlap
consistency, and occlusal-distance uniformity.

Conventions shared by every function here:

* Predictions and targets correspond index-wise per tooth.
* Static teeth (``moved=False``) are excluded from every sum; their
  transform is identically zero by definition.
* Occlusal projection drops z; the overlap threshold ``tau`` is strict
  (a point at exactly tau is outside). Distance comparisons are done on
  squared values so the strict threshold is reproducible bit-for-bit.
* The transform losses are L1 per component with a subgradient of 0 at
  kinks. Rotation-angle and translation-norm enhancement factors scale
  each tooth's contribution by (1 + zeta).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .case import ANTERIOR_IDS, Case, Jaw, Tooth, jaw_of_id
from .errors import CorrespondenceMismatch, DegenerateAxis
from .geometry import RigidTransform, kabsch_recover


@dataclass(frozen=True)
class LossWeights:
    """Hyperparameters of the combined loss."""

    delta: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    omega: float = 10.0  # rotation emphasis inside the transform loss
    w_posterior: float = 2.0  # posterior share of the uniformity loss
    omega_anterior: float = float(1.0 / np.pi)  # angular-term scale
    tau: float = 0.07  # occlusal overlap threshold, mm
    max_angle: float = float(np.pi / 2.0)  # enhancement normalizer, rad
    max_translation: float = 4.5  # enhancement normalizer, mm

    def validate(self) -> None:
        vals = (*self.delta, self.omega, self.w_posterior, self.omega_anterior,
                self.tau, self.max_angle, self.max_translation)
        if any(v < 0 for v in vals):
            raise ValueError("loss weights must be nonnegative")
        if self.tau <= 0:
            raise ValueError("tau must be positive")


@dataclass
class LossBreakdown:
    l_recon: float
    l_rotate: float
    l_trans: float
    l_val: float
    l_fit: float
    l_uni_ant: float
    l_uni_pior: float
    l_uni: float
    total: float
    gradients: dict[str, dict[int, np.ndarray]] | None = field(default=None, repr=False)

    def to_dict(self, include_gradients: bool = True) -> dict:
        out = {
            "l_recon": self.l_recon,
            "l_rotate": self.l_rotate,
            "l_trans": self.l_trans,
            "l_val": self.l_val,
            "l_fit": self.l_fit,
            "l_uni_ant": self.l_uni_ant,
            "l_uni_pior": self.l_uni_pior,
            "l_uni": self.l_uni,
            "total": self.total,
        }
        if include_gradients and self.gradients is not None:
            out["gradients"] = {
                term: {str(tid): g.tolist() for tid, g in sorted(per.items())}
                for term, per in sorted(self.gradients.items())
            }
        return out


# ----------------------------------------------------------- tooth pairing

def _moved_teeth(case: Case) -> list[Tooth]:
    return sorted(
        (t for t in case.all_teeth() if t.present and t.moved), key=lambda t: t.id
    )


def _paired_moved(pred: Case, gt: Case) -> list[tuple[Tooth, Tooth]]:
    pred_ids = [t.id for t in _moved_teeth(pred)]
    gt_ids = [t.id for t in _moved_teeth(gt)]
    if pred_ids != gt_ids:
        raise CorrespondenceMismatch(
            f"moved-tooth sets differ: {pred_ids} vs {gt_ids}"
        )
    pairs = []
    for tid in pred_ids:
        a = pred.tooth(tid)
        b = gt.tooth(tid)
        if a.points.shape != b.points.shape:
            raise CorrespondenceMismatch(f"tooth {tid}: point counts differ")
        pairs.append((a, b))
    return pairs


# -------------------------------------------------------- rotation algebra

def _rotation_with_partials(q: np.ndarray):
    """R(q / |q|) and the four dR/dq_k including the normalization chain."""
    q = np.asarray(q, dtype=float)
    n = float(np.linalg.norm(q))
    if n < 1e-12:
        raise ValueError("zero quaternion in loss evaluation")
    w, x, y, z = qh = q / n
    rot = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
    d_unit = np.array(
        [
            [[0, -z, y], [z, 0, -x], [-y, x, 0]],
            [[0, y, z], [y, -2 * x, -w], [z, w, -2 * x]],
            [[-2 * y, x, w], [x, 0, z], [-w, z, -2 * y]],
            [[-2 * z, -w, x], [w, -2 * z, y], [x, y, 0]],
        ],
        dtype=float,
    ) * 2.0
    chain = (np.eye(4) - np.outer(qh, qh)) / n  # d(q/|q|)/dq
    partials = np.einsum("jab,jk->kab", d_unit, chain)
    return rot, partials


# --------------------------------------------------------- reconstruction

def _recon_tooth(pre_pts, gt_pts, q, trans, pivot):
    """Squared point offsets plus squared centroid offset, with gradient
    with respect to the 7 raw transform parameters."""
    q = np.asarray(q, dtype=float)
    trans = np.asarray(trans, dtype=float)
    rot, partials = _rotation_with_partials(q)
    u = pre_pts - pivot
    uc = u.mean(axis=0)
    if q[0] == 1.0 and not q[1:].any() and not trans.any():
        # identity: skip the (p - pivot) + pivot round trip so that
        # pre == gt gives a bit-exact zero residual
        resid = pre_pts - gt_pts
        resid_c = pre_pts.mean(axis=0) - gt_pts.mean(axis=0)
    else:
        base = pivot + trans
        resid = u @ rot.T + base - gt_pts
        resid_c = rot @ uc + base - gt_pts.mean(axis=0)
    value = float((resid * resid).sum() + resid_c @ resid_c)
    grad = np.empty(7)
    for k in range(4):
        dr = partials[k]
        grad[k] = 2.0 * float((resid * (u @ dr.T)).sum() + resid_c @ (dr @ uc))
    grad[4:] = 2.0 * (resid.sum(axis=0) + resid_c)
    return value, grad


def recon_loss_from_transforms(
    case: Case, transforms: dict[int, RigidTransform]
) -> tuple[float, dict[int, np.ndarray]]:
    """Reconstruction loss of ``transforms`` applied to ``case.points``
    against ``case.gt_points``, with per-tooth gradients."""
    value = 0.0
    grads: dict[int, np.ndarray] = {}
    for tooth in _moved_teeth(case):
        if tooth.gt_points is None:
            raise CorrespondenceMismatch(f"tooth {tooth.id} has no gt_points")
        t = transforms.get(tooth.id)
        if t is None:
            raise CorrespondenceMismatch(f"no transform for moved tooth {tooth.id}")
        v, g = _recon_tooth(tooth.points, tooth.gt_points, t.rotation, t.translation, t.pivot)
        value += v
        grads[tooth.id] = g
    return value, grads


def recon_loss(pred_case: Case, gt_case: Case) -> tuple[float, dict[int, np.ndarray]]:
    """Squared point-wise and centroid offsets between two assembled cases.

    The gradient is taken with respect to an identity transform applied
    to the prediction (pivot at each tooth's current centroid): the
    direction a further correction would move each of the 7 parameters.
    """
    value = 0.0
    grads: dict[int, np.ndarray] = {}
    identity_q = np.array([1.0, 0.0, 0.0, 0.0])
    zero_t = np.zeros(3)
    for a, b in _paired_moved(pred_case, gt_case):
        v, g = _recon_tooth(a.points, b.points, identity_q, zero_t, a.centroid())
        value += v
        grads[a.id] = g
    return value, grads


# ------------------------------------------------------- transform losses

def enhancement_weights(
    gt_transforms: dict[int, RigidTransform] | None,
    weights: LossWeights | None = None,
) -> dict[int, tuple[float, float]]:
    """Per-tooth (zeta_rotate, zeta_trans) in [0, 1].

    Larger ground-truth corrections get weights closer to 1 so severe
    misalignments dominate. Pass ``None`` (test mode) to make the caller
    fall back to 1.0 for every tooth.
    """
    if gt_transforms is None:
        return {}
    w = weights or LossWeights()
    out = {}
    for tid, t in gt_transforms.items():
        zr = min(t.angle() / w.max_angle, 1.0)
        zt = min(float(np.linalg.norm(t.translation)) / w.max_translation, 1.0)
        out[tid] = (zr, zt)
    return out


def rot_trans_loss(
    pred_transforms: dict[int, RigidTransform],
    gt_transforms: dict[int, RigidTransform],
    weights: LossWeights | None = None,
    zeta: dict[int, tuple[float, float]] | None = None,
) -> tuple[float, float, float, dict[int, np.ndarray]]:
    """L1 quaternion and translation losses with enhancement factors.

    Returns ``(l_rotate, l_trans, l_val, gradients)`` where l_val =
    omega * l_rotate + l_trans and the gradient of l_val is taken with
    respect to each predicted tooth's 7 parameters. ``zeta=None`` is
    test mode: every enhancement factor is 1.0.
    """
    w = weights or LossWeights()
    if set(pred_transforms) != set(gt_transforms):
        raise CorrespondenceMismatch("pred and gt transform tooth sets differ")
    l_rotate = 0.0
    l_trans = 0.0
    grads: dict[int, np.ndarray] = {}
    for tid in sorted(pred_transforms):
        tp, tg = pred_transforms[tid], gt_transforms[tid]
        zr, zt = (1.0, 1.0) if zeta is None else zeta[tid]
        dq = tp.rotation - tg.rotation
        dt = tp.translation - tg.translation
        l_rotate += float(np.abs(dq).sum()) * (1.0 + zr)
        l_trans += float(np.abs(dt).sum()) * (1.0 + zt)
        g = np.empty(7)
        g[:4] = w.omega * np.sign(dq) * (1.0 + zr)
        g[4:] = np.sign(dt) * (1.0 + zt)
        grads[tid] = g
    return l_rotate, l_trans, w.omega * l_rotate + l_trans, grads


# -------------------------------------------------------- occlusal masks

def _min_sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-row minimum squared distance from a (n,d) to b (m,d).

    cdist accumulates (x-y)^2 per dimension exactly like the naive
    broadcast form, so thresholding stays bit-compatible with it.
    """
    return cdist(a, b, "sqeuclidean").min(axis=1)


def _xy_mask(a_pts: np.ndarray, b_pts: np.ndarray, tau: float) -> np.ndarray:
    """Flags of a's points whose projected distance to b is under tau."""
    if b_pts.shape[0] == 0:
        return np.zeros(a_pts.shape[0], dtype=bool)
    return _min_sqdist(a_pts[:, :2], b_pts[:, :2]) < tau * tau


def opposing_region(tooth: Tooth, opposing_jaw: Jaw, tau: float = 0.07) -> list[Tooth]:
    """Opposing-jaw teeth whose tau-dilated projected boxes meet the
    tooth's projected box. Never misses a tooth holding a point within
    tau of the tooth's projection."""
    a = tooth.points[:, :2]
    a_lo, a_hi = a.min(axis=0), a.max(axis=0)
    region = []
    for other in opposing_jaw.present_teeth():
        b = other.points[:, :2]
        b_lo, b_hi = b.min(axis=0), b.max(axis=0)
        if np.all(a_lo - tau <= b_hi + tau) and np.all(b_lo - tau <= a_hi + tau):
            region.append(other)
    return region


def region_points(region: list[Tooth]) -> np.ndarray:
    if not region:
        return np.zeros((0, 3))
    return np.concatenate([t.points for t in region])


def occlusal_overlap_mask(tooth: Tooth, region: list[Tooth], tau: float = 0.07) -> np.ndarray:
    """Binary flags: a tooth point is set iff its projected distance to
    the opposing region is strictly below tau. Empty region: all zero."""
    return _xy_mask(tooth.points, region_points(region), tau)


def overlap_consistency_loss(pred_case: Case, gt_case: Case, tau: float = 0.07) -> float:
    """Average Hamming distance between predicted and target overlap
    masks, over moved teeth whose opposing region is nonempty in either
    case; 0.0 when no tooth qualifies."""
    hams = []
    for a, b in _paired_moved(pred_case, gt_case):
        region_a = opposing_region(a, pred_case.opposing_jaw(jaw_of_id(a.id)), tau)
        region_b = opposing_region(b, gt_case.opposing_jaw(jaw_of_id(b.id)), tau)
        if not region_a and not region_b:
            continue
        mask_a = occlusal_overlap_mask(a, region_a, tau)
        mask_b = occlusal_overlap_mask(b, region_b, tau)
        hams.append(float(np.count_nonzero(mask_a != mask_b)))
    return float(np.mean(hams)) if hams else 0.0


# ------------------------------------------------------ uniformity losses

def posterior_uniformity_loss(pred_case: Case, tau: float = 0.07) -> float:
    """Sum over posterior teeth of the population variance of in-mask
    occlusal contact distances.

    For each posterior tooth, take its points flagged by the overlap
    mask and the opposing-region points flagged by the reciprocal mask;
    the statistic is the variance of each flagged tooth point's nearest
    3D distance into the flagged region points. Teeth with fewer than
    two flagged points contribute 0. This term regularizes the
    prediction itself: it vanishes at ground truth only when the target
    contacts are themselves uniform or degenerate.
    """
    value = 0.0
    for tooth in _moved_teeth(pred_case):
        if tooth.id in ANTERIOR_IDS:
            continue
        region = opposing_region(tooth, pred_case.opposing_jaw(jaw_of_id(tooth.id)), tau)
        if not region:
            continue
        b = region_points(region)
        mask_t = _xy_mask(tooth.points, b, tau)
        if np.count_nonzero(mask_t) < 2:
            continue
        mask_b = _xy_mask(b, tooth.points, tau)
        if not mask_b.any():
            continue
        d = np.sqrt(_min_sqdist(tooth.points[mask_t], b[mask_b]))
        value += float(d.var())  # population variance
    return value


def _incisal_peak(tooth: Tooth) -> np.ndarray:
    """Extreme point along the occlusal direction: max z for lower
    teeth, min z for upper teeth."""
    z = tooth.points[:, 2]
    idx = int(np.argmax(z)) if tooth.id > 16 else int(np.argmin(z))
    return tooth.points[idx]


def anterior_uniformity_loss(
    pred_case: Case, gt_case: Case, omega_ant: float = float(1.0 / np.pi)
) -> float:
    value, _, _ = anterior_uniformity_parts(pred_case, gt_case, omega_ant)
    return value


def anterior_uniformity_parts(
    pred_case: Case, gt_case: Case, omega_ant: float = float(1.0 / np.pi)
) -> tuple[float, float, float]:
    """(total, positional part, angular part) of the anterior term.

    Positional part: centroid offset plus incisal-peak offset per tooth.
    Angular part: the angle between the pred and target tooth axes
    (centroid to peak), via a clamped arccos.
    """
    l_pos = 0.0
    l_ang = 0.0
    for a, b in _paired_moved(pred_case, gt_case):
        if a.id not in ANTERIOR_IDS:
            continue
        ca, cb = a.centroid(), b.centroid()
        pa, pb = _incisal_peak(a), _incisal_peak(b)
        va, vb = pa - ca, pb - cb
        na, nb = float(np.linalg.norm(va)), float(np.linalg.norm(vb))
        if na < 1e-12 or nb < 1e-12:
            raise DegenerateAxis(f"tooth {a.id}: incisal peak coincides with centroid")
        l_pos += float(np.linalg.norm(ca - cb)) + float(np.linalg.norm(pa - pb))
        if np.array_equal(va, vb):
            continue  # arccos(~1) would leak ~1e-8 for identical axes
        dot = float(np.clip(va @ vb / (na * nb), -1.0, 1.0))
        l_ang += float(np.arccos(dot))
    return l_pos + omega_ant * l_ang, l_pos, l_ang


def uniformity_loss(pred_case: Case, gt_case: Case, weights: LossWeights | None = None) -> float:
    w = weights or LossWeights()
    ant = anterior_uniformity_loss(pred_case, gt_case, w.omega_anterior)
    pior = posterior_uniformity_loss(pred_case, w.tau)
    return ant + w.w_posterior * pior


# ------------------------------------------------------------- total loss

def recovered_transforms(pred_case: Case, gt_case: Case) -> dict[int, RigidTransform]:
    """Per-tooth rigid transform carrying each predicted cloud onto its
    target, recovered by least squares; the residual correction."""
    out = {}
    for a, b in _paired_moved(pred_case, gt_case):
        out[a.id] = kabsch_recover(a.points, b.points)
    return out


def total_loss(
    pred_case: Case,
    gt_case: Case,
    weights: LossWeights | None = None,
    test_mode: bool = False,
) -> LossBreakdown:
    """Full weighted loss between an assembled prediction and target.

    Transform-space terms use the prediction as the baseline: the
    predicted transform is the identity and the target transform is the
    recovered residual correction. In train mode (default) enhancement
    factors derive from those residuals; ``test_mode`` pins them to 1.
    """
    w = weights or LossWeights()
    w.validate()
    l_recon, g_recon = recon_loss(pred_case, gt_case)
    gt_t = recovered_transforms(pred_case, gt_case)
    pred_t = {
        tid: RigidTransform.identity(pred_case.tooth(tid).centroid()) for tid in gt_t
    }
    zeta = None if test_mode else enhancement_weights(gt_t, w)
    l_rotate, l_trans, l_val, g_val = rot_trans_loss(pred_t, gt_t, w, zeta)
    l_fit = overlap_consistency_loss(pred_case, gt_case, w.tau)
    ant, _, _ = anterior_uniformity_parts(pred_case, gt_case, w.omega_anterior)
    pior = posterior_uniformity_loss(pred_case, w.tau)
    l_uni = ant + w.w_posterior * pior
    d0, d1, d2, d3 = w.delta
    total = d0 * l_recon + d1 * l_fit + d2 * l_uni + d3 * l_val
    return LossBreakdown(
        l_recon=l_recon,
        l_rotate=l_rotate,
        l_trans=l_trans,
        l_val=l_val,
        l_fit=l_fit,
        l_uni_ant=ant,
        l_uni_pior=pior,
        l_uni=l_uni,
        total=total,
        gradients={"recon": g_recon, "val": g_val},
    )


# ------------------------------------------------------- gradient checks

def grad_check(loss_fn, theta: np.ndarray, h: float = 1e-5) -> float:
    """Max relative disagreement between ``loss_fn``'s analytic gradient
    and central finite differences at ``theta``.

    ``loss_fn(theta) -> (value, gradient)``. The relative error is the
    largest per-component difference divided by the larger of 1 and the
    finite-difference gradient's magnitude.
    """
    theta = np.asarray(theta, dtype=float)
    _, analytic = loss_fn(theta)
    analytic = np.asarray(analytic, dtype=float)
    fd = np.empty_like(theta)
    for i in range(theta.size):
        t_hi = theta.copy()
        t_lo = theta.copy()
        t_hi[i] += h
        t_lo[i] -= h
        fd[i] = (loss_fn(t_hi)[0] - loss_fn(t_lo)[0]) / (2.0 * h)
    scale = max(1.0, float(np.abs(fd).max()))
    return float(np.abs(analytic - fd).max()) / scale


def recon_theta_fn(case: Case, pivots: dict[int, np.ndarray]):
    """Wrap the reconstruction loss as a function of one flat parameter
    vector (7 per moved tooth, in ascending id order) for grad checks."""
    teeth = _moved_teeth(case)

    def fn(theta: np.ndarray):
        value = 0.0
        grad = np.empty_like(theta)
        for i, tooth in enumerate(teeth):
            part = theta[7 * i : 7 * i + 7]
            v, g = _recon_tooth(
                tooth.points, tooth.gt_points, part[:4], part[4:], pivots[tooth.id]
            )
            value += v
            grad[7 * i : 7 * i + 7] = g
        return value, grad

    return fn, 7 * len(teeth)


def val_theta_fn(
    gt_transforms: dict[int, RigidTransform],
    weights: LossWeights | None = None,
    zeta: dict[int, tuple[float, float]] | None = None,
):
    """Wrap l_val as a function of the flat predicted parameter vector."""
    w = weights or LossWeights()
    ids = sorted(gt_transforms)

    def fn(theta: np.ndarray):
        value = 0.0
        grad = np.empty_like(theta)
        for i, tid in enumerate(ids):
            part = theta[7 * i : 7 * i + 7]
            tg = gt_transforms[tid]
            zr, zt = (1.0, 1.0) if zeta is None else zeta[tid]
            dq = part[:4] - tg.rotation
            dt = part[4:] - tg.translation
            value += w.omega * float(np.abs(dq).sum()) * (1.0 + zr)
            value += float(np.abs(dt).sum()) * (1.0 + zt)
            grad[7 * i : 7 * i + 4] = w.omega * np.sign(dq) * (1.0 + zr)
            grad[7 * i + 4 : 7 * i + 7] = np.sign(dt) * (1.0 + zt)
        return value, grad

    return fn, 7 * len(ids)
