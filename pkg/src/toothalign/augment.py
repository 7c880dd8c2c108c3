"""Constrained data augmentation.

Pre-treatment states are simulated from finished (target) geometry:
each tooth gets a random rigid displacement, then the jaw is pushed
back toward clinical plausibility by two constraint passes:

* regularization: inter-tooth gaps are closed to at most 2.35 mm by
  sliding the distal tooth of an offending pair toward the midline
  along the arch, and centroids are kept within [0, 2.2] mm of the
  arch by pulling teeth perpendicular onto it;
* collision resolution: interpenetrating pairs are separated by
  sliding the tooth farther from the midline outward along the arch.

Both passes only translate teeth, so the per-tooth rotation stays
exactly the sampled one. Collision tests treat each cloud as a union
of proxy spheres and are exact (tree-accelerated, not approximate).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arch import ArchLine, fit_arch_line
from .bvh import AabbTree, interlock_masks
from .case import Case, Jaw, Tooth, midline_offset
from .errors import (
    CollisionUnresolved,
    ConfigError,
    ConstraintViolation,
    CorrespondenceMismatch,
    NoCollision,
)
from .geometry import RigidTransform, kabsch_recover, quat_from_axis_angle
from .seeding import derive_seed

_REGULARIZE_PASSES = 8
_PULL_STEPS = 16
_JOINT_ROUNDS = 4
_SLACK = 1e-6  # settle strictly inside thresholds so re-checks stay quiet


@dataclass(frozen=True)
class AugmentConfig:
    rot_range: float = 10.0  # degrees
    trans_mu: float = 0.0  # mm
    trans_sigma: float = 0.3  # mm
    gap_threshold: float = 2.35  # mm
    arch_dist_range: tuple[float, float] = (0.0, 2.2)  # mm
    constraint_ratio: float = 0.54
    ordinary_prob: float = 0.62
    max_collision_iters: int = 10

    def validate(self) -> None:
        if self.rot_range < 0 or self.trans_sigma < 0 or self.gap_threshold < 0:
            raise ConfigError("augmentation ranges must be nonnegative")
        lo, hi = self.arch_dist_range
        if not (0 <= lo <= hi):
            raise ConfigError("arch_dist_range must be 0 <= lo <= hi")
        for name in ("constraint_ratio", "ordinary_prob"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.max_collision_iters < 1:
            raise ConfigError("max_collision_iters must be at least 1")


@dataclass
class CollisionReport:
    """Colliding present-tooth pairs of one jaw with positive separation
    steps large enough to clear each overlap."""

    pairs: list[tuple[int, int, float]]


# ------------------------------------------------------------ perturbation

def perturb_tooth(tooth: Tooth, seed: int, config: AugmentConfig) -> RigidTransform:
    """Random displacement about the tooth centroid: rotation angle
    uniform in +-rot_range about a uniformly random axis, translation
    components i.i.d. Normal(trans_mu, trans_sigma).

    Draw order (axis, angle, translation) is fixed; same seed, same
    transform.
    """
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=3)
    while np.linalg.norm(axis) < 1e-12:
        axis = rng.normal(size=3)
    angle = rng.uniform(-np.deg2rad(config.rot_range), np.deg2rad(config.rot_range))
    trans = rng.normal(config.trans_mu, config.trans_sigma, size=3)
    return RigidTransform(
        rotation=quat_from_axis_angle(axis, angle),
        translation=trans,
        pivot=tooth.centroid(),
    )


# --------------------------------------------------------------- collision

def _pair_sqdists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # |a-b|^2 via one GEMM; cancellation can dip microscopically negative
    aa = (a * a).sum(axis=1)[:, None]
    bb = (b * b).sum(axis=1)[None, :]
    return np.maximum(aa + bb - 2.0 * (a @ b.T), 0.0)


def _min_pair_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(_pair_sqdists(a, b).min()))


def _max_pair_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(_pair_sqdists(a, b).max()))


def _interlock(a: Tooth, b: Tooth, trees: dict[int, AabbTree]):
    radius = a.proxy_radius + b.proxy_radius
    mask_a, mask_b, d_min = interlock_masks(trees[a.id], trees[b.id], radius)
    return mask_a, mask_b, d_min, radius


def penetration_distance(tooth_a: Tooth, tooth_b: Tooth) -> float:
    """Overlap extent: the farthest distance between interlocking
    points, where a point interlocks when it lies strictly inside the
    other cloud's proxy volume.

    A single coincident contact point yields ~0; this is the raw
    extent, see CollisionReport for the always-positive resolution step.
    """
    trees = {tooth_a.id: AabbTree(tooth_a.points), tooth_b.id: AabbTree(tooth_b.points)}
    mask_a, mask_b, _, _ = _interlock(tooth_a, tooth_b, trees)
    if not mask_a.any():
        raise NoCollision(f"teeth {tooth_a.id} and {tooth_b.id} do not interlock")
    return _max_pair_distance(tooth_a.points[mask_a], tooth_b.points[mask_b])


def _separation_step(a: Tooth, b: Tooth, trees) -> float | None:
    """None when disjoint; otherwise a positive slide distance that
    clears the overlap: proxy penetration depth plus a hair of margin.

    Deliberately NOT the interlock extent penetration_distance reports;
    extent-sized slides over-separate banded contacts by millimetres and
    fight the gap constraint."""
    mask_a, mask_b, d_min, radius = _interlock(a, b, trees)
    if not mask_a.any():
        return None
    return radius - d_min + 1e-3


def detect_collisions(jaw: Jaw) -> CollisionReport:
    """All interlocking present-tooth pairs, ascending id order."""
    teeth = jaw.present_teeth()
    trees = {t.id: AabbTree(t.points) for t in teeth}
    pairs = []
    for i, a in enumerate(teeth):
        for b in teeth[i + 1 :]:
            step = _separation_step(a, b, trees)
            if step is not None:
                pairs.append((a.id, b.id, step))
    return CollisionReport(pairs)


# ------------------------------------------------------------- constraints

def adjacent_gaps(jaw: Jaw) -> list[tuple[int, int, float]]:
    """Nearest point-pair distance between adjacent present teeth;
    adjacency means consecutive present ids (absences skipped)."""
    teeth = jaw.present_teeth()
    out = []
    for a, b in zip(teeth, teeth[1:]):
        out.append((a.id, b.id, _min_pair_distance(a.points, b.points)))
    return out


def _center_out(teeth: list[Tooth]) -> list[Tooth]:
    return sorted(teeth, key=lambda t: (midline_offset(t.id), t.id))


def _mesial_neighbor(jaw: Jaw, tooth_id: int) -> Tooth | None:
    """Adjacent present tooth on the midline side of tooth_id."""
    ids = sorted(t.id for t in jaw.present_teeth())
    pos = ids.index(tooth_id)
    mid = 8.5 if tooth_id <= 16 else 24.5
    if tooth_id < mid:
        return jaw.get(ids[pos + 1]) if pos + 1 < len(ids) else None
    return jaw.get(ids[pos - 1]) if pos > 0 else None


def _translate(tooth: Tooth, vec: np.ndarray) -> None:
    tooth.points = tooth.points + vec


def _pull_to_arch(tooth: Tooth, arch: ArchLine, lo: float, hi: float) -> float:
    """Perpendicular pulls until the centroid's arch distance is inside
    [lo, hi]. Returns the total displacement."""
    total = 0.0
    for _ in range(_PULL_STEPS):
        c = tooth.centroid()
        dist = abs(arch.signed_distance(c))
        if lo <= dist <= hi:
            break
        if dist < 1e-12:
            break  # on the arch; no direction to push outward
        target = hi - _SLACK if dist > hi else lo + _SLACK
        _, feet, _ = arch.project(c[None, :])
        foot = feet[0]
        vec = (1.0 - target / dist) * (foot - c)
        _translate(tooth, vec)
        total += float(np.linalg.norm(vec))
    return total


def _close_gap(tooth: Tooth, mesial: Tooth, arch: ArchLine, threshold: float) -> float:
    """Slides tooth toward the midline along the arch until its gap to
    the mesial neighbor is at most threshold. Returns total slide."""
    total = 0.0
    for _ in range(_PULL_STEPS):
        gap = _min_pair_distance(tooth.points, mesial.points)
        if gap <= threshold:
            break
        delta = -(gap - (threshold - _SLACK))
        c = tooth.centroid()
        vec = arch.move_along(c, delta, extend=True) - c
        _translate(tooth, vec)
        total += float(np.linalg.norm(vec))
    return total


def jaw_regularize(jaw: Jaw, arch: ArchLine, config: AugmentConfig) -> Jaw:
    """Center-out constraint pass, repeated to a fixed point: arch
    distances into range, then each tooth's gap to its mesial neighbor
    closed. The most central tooth anchors the traversal (it is never
    slid). Pure; the input jaw is left untouched."""
    config.validate()
    out = jaw.copy()
    lo, hi = config.arch_dist_range
    order = _center_out(out.present_teeth())
    for _ in range(_REGULARIZE_PASSES):
        shifted = 0.0
        for k, tooth in enumerate(order):
            shifted += _pull_to_arch(tooth, arch, lo, hi)
            if k == 0:
                continue
            mesial = _mesial_neighbor(out, tooth.id)
            if mesial is not None:
                shifted += _close_gap(tooth, mesial, arch, config.gap_threshold)
        if shifted < 1e-9:
            break
    for tooth in out.present_teeth():
        _refresh_moved(tooth, jaw.get(tooth.id))
    return out


def _refresh_moved(tooth: Tooth, before: Tooth | None) -> None:
    if tooth.gt_points is not None:
        tooth.moved = not np.array_equal(tooth.points, tooth.gt_points)
    elif before is not None and not np.array_equal(tooth.points, before.points):
        tooth.moved = True


def resolve_collisions(jaw: Jaw, arch: ArchLine, config: AugmentConfig) -> Jaw:
    out, _ = resolve_collisions_verbose(jaw, arch, config)
    return out


def resolve_collisions_verbose(
    jaw: Jaw, arch: ArchLine, config: AugmentConfig
) -> tuple[Jaw, int]:
    """Iteratively separates colliding pairs by sliding the tooth
    farther from the midline outward along the arch; returns the
    collision-free jaw and the number of iterations used.

    Raises CollisionUnresolved when max_collision_iters passes still
    leave a collision.
    """
    config.validate()
    out = jaw.copy()
    for iteration in range(config.max_collision_iters + 1):
        report = detect_collisions(out)
        if not report.pairs:
            for tooth in out.present_teeth():
                _refresh_moved(tooth, jaw.get(tooth.id))
            return out, iteration
        if iteration == config.max_collision_iters:
            break
        for id_a, id_b, step in report.pairs:
            a, b = out.get(id_a), out.get(id_b)
            mover = max(a, b, key=lambda t: (midline_offset(t.id), t.id))
            c = mover.centroid()
            vec = arch.move_along(c, step, extend=True) - c
            _translate(mover, vec)
    raise CollisionUnresolved(
        f"collisions remain after {config.max_collision_iters} iterations"
    )


# ------------------------------------------------------------ case drivers

def _gt_jaw(jaw: Jaw) -> Jaw:
    """Copy of the jaw posed at its ground-truth geometry."""
    out = jaw.copy()
    for tooth in out.present_teeth():
        if tooth.gt_points is None:
            raise CorrespondenceMismatch(
                f"tooth {tooth.id} has no gt_points; augmentation needs targets"
            )
        tooth.points = tooth.gt_points.copy()
        tooth.moved = False
    return out


def check_constraints(case: Case, config: AugmentConfig) -> dict:
    """Constraint-satisfaction report for a case's current geometry.

    Gaps, arch distances (against an arch fitted to gt centers, the
    same arch augmentation uses), collisions, and, where targets exist,
    the recovered per-tooth rotation angle.
    """
    report: dict = {"case_id": case.id, "jaws": {}}
    ok = True
    for side in ("upper", "lower"):
        jaw = case.jaw(side)
        teeth = jaw.present_teeth()
        arch = None
        if len(teeth) >= 2:
            has_gt = all(t.gt_points is not None for t in teeth)
            arch = fit_arch_line(_gt_jaw(jaw)) if has_gt else fit_arch_line(jaw)
        gaps = [g for _, _, g in adjacent_gaps(jaw)]
        dists = (
            [abs(arch.signed_distance(t.centroid())) for t in teeth] if arch else []
        )
        angles = [
            np.rad2deg(kabsch_recover(t.gt_points, t.points).angle())
            for t in teeth
            if t.gt_points is not None
        ]
        collisions = len(detect_collisions(jaw).pairs)
        entry = {
            "teeth": len(teeth),
            "collisions": collisions,
            "max_gap_mm": max(gaps) if gaps else 0.0,
            "max_arch_dist_mm": max(dists) if dists else 0.0,
            "max_angle_deg": max(angles) if angles else 0.0,
        }
        lo, hi = config.arch_dist_range
        entry["satisfied"] = bool(
            collisions == 0
            and entry["max_gap_mm"] <= config.gap_threshold + 1e-9
            and entry["max_arch_dist_mm"] <= hi + 1e-9
            and entry["max_angle_deg"] <= config.rot_range + 1e-9
        )
        ok = ok and entry["satisfied"]
        report["jaws"][side] = entry
    report["satisfied"] = ok
    return report


def constrained_augment_case(
    gt_case: Case, seed: int, config: AugmentConfig | None = None
) -> Case:
    case, _ = constrained_augment_case_report(gt_case, seed, config)
    return case


def constrained_augment_case_report(
    gt_case: Case, seed: int, config: AugmentConfig | None = None
) -> tuple[Case, dict]:
    """Simulated pre-treatment case from target geometry, plus its
    constraint report.

    Per jaw: fit the arch to target centers, displace each tooth
    (center-out order, per-tooth derived seeds), then alternate
    regularization and collision resolution until both families of
    constraints hold. Targets pass through bit-identical.
    """
    config = config or AugmentConfig()
    config.validate()
    out = gt_case.copy()
    iterations: dict[str, int] = {}
    for side in ("upper", "lower"):
        working = _gt_jaw(out.jaw(side))
        arch = fit_arch_line(working)
        for tooth in _center_out(working.present_teeth()):
            t = perturb_tooth(tooth, derive_seed(seed, "perturb", out.id, tooth.id), config)
            tooth.points = t.apply(tooth.points)
        total_iters = 0
        for _ in range(_JOINT_ROUNDS):
            working = jaw_regularize(working, arch, config)
            working, iters = resolve_collisions_verbose(working, arch, config)
            total_iters += iters
            gaps_ok = all(
                g <= config.gap_threshold + 1e-9 for _, _, g in adjacent_gaps(working)
            )
            lo, hi = config.arch_dist_range
            arch_ok = all(
                lo - 1e-9 <= abs(arch.signed_distance(t.centroid())) <= hi + 1e-9
                for t in working.present_teeth()
            )
            if gaps_ok and arch_ok:
                break
        else:
            raise ConstraintViolation(
                f"jaw {side}: gap and arch constraints jointly unsatisfiable"
            )
        iterations[side] = total_iters
        target = out.jaw(side)
        for tooth in working.present_teeth():
            dst = target.get(tooth.id)
            dst.points = tooth.points
            dst.moved = not np.array_equal(tooth.points, dst.gt_points)
    report = check_constraints(out, config)
    report["collision_iterations"] = iterations
    return out, report


def ordinary_augment(case: Case, seed: int, config: AugmentConfig | None = None) -> Case:
    """Training-time augmentation: with probability ordinary_prob the
    current (pre-treatment) geometry of every present tooth is
    displaced; targets are never touched."""
    config = config or AugmentConfig()
    config.validate()
    out = case.copy()
    rng = np.random.default_rng(derive_seed(seed, "ordinary-trigger", out.id))
    if rng.random() >= config.ordinary_prob:
        return out
    for tooth in sorted(out.present_teeth(), key=lambda t: t.id):
        t = perturb_tooth(tooth, derive_seed(seed, "ordinary", out.id, tooth.id), config)
        if t.is_identity():
            continue
        tooth.points = t.apply(tooth.points)
        tooth.moved = True
    return out
