import numpy as np
import pytest

from toothalign.arch import fit_arch_line
from toothalign.augment import (
    AugmentConfig,
    adjacent_gaps,
    check_constraints,
    constrained_augment_case,
    constrained_augment_case_report,
    detect_collisions,
    jaw_regularize,
    ordinary_augment,
    penetration_distance,
    perturb_tooth,
    resolve_collisions,
    resolve_collisions_verbose,
)
from toothalign.case import Jaw, Tooth
from toothalign.errors import CollisionUnresolved, ConfigError, NoCollision
from toothalign.seeding import derive_seed

from conftest import gt_view
from oracles import brute_collision_pairs, brute_min_distance, maxwell_mean


def _tooth(tid, pts, radius=0.25, gt=None):
    pts = np.asarray(pts, dtype=float)
    return Tooth(
        id=tid,
        present=True,
        moved=False,
        points=pts,
        gt_points=pts.copy() if gt is None else np.asarray(gt, dtype=float),
        proxy_radius=radius,
    )


# ------------------------------------------------------------------ config

@pytest.mark.parametrize(
    "kwargs",
    [
        {"rot_range": -1.0},
        {"trans_sigma": -0.1},
        {"gap_threshold": -2.0},
        {"arch_dist_range": (2.0, 1.0)},
        {"arch_dist_range": (-0.5, 1.0)},
        {"constraint_ratio": 1.5},
        {"ordinary_prob": -0.1},
        {"max_collision_iters": 0},
    ],
)
def test_config_rejects(kwargs):
    with pytest.raises(ConfigError):
        AugmentConfig(**kwargs).validate()


# ------------------------------------------------------------ perturbation

def test_perturb_deterministic(case7):
    tooth = case7.upper.teeth[0]
    s = derive_seed(3, "perturb", case7.id, tooth.id)
    a = perturb_tooth(tooth, s, AugmentConfig())
    b = perturb_tooth(tooth, s, AugmentConfig())
    assert np.array_equal(a.rotation, b.rotation)
    assert np.array_equal(a.translation, b.translation)
    assert np.array_equal(a.pivot, tooth.centroid())
    c = perturb_tooth(tooth, s + 1, AugmentConfig())
    assert not np.array_equal(a.translation, c.translation)


def test_perturb_distributions(case7):
    # angle uniform on +-10 deg, translation components N(0, 0.3):
    # sample means against their analytic values
    tooth = case7.upper.teeth[0]
    config = AugmentConfig()
    n = 2000
    draws = [perturb_tooth(tooth, 10_000 + k, config) for k in range(n)]
    angles = np.array([np.rad2deg(t.angle()) for t in draws])
    norms = np.array([np.linalg.norm(t.translation) for t in draws])
    assert angles.max() <= config.rot_range + 1e-9
    assert abs(angles.mean() - config.rot_range / 2.0) < 0.3
    assert abs(norms.mean() - maxwell_mean(config.trans_sigma)) < 0.02
    comps = np.array([t.translation for t in draws]).ravel()
    assert abs(comps.mean()) < 0.01
    assert abs(comps.std() - config.trans_sigma) < 0.01


def test_perturb_zero_ranges_is_identity(case7):
    config = AugmentConfig(rot_range=0.0, trans_sigma=0.0)
    t = perturb_tooth(case7.upper.teeth[0], 5, config)
    assert t.angle() == 0.0
    assert not t.translation.any()


# --------------------------------------------------------------- collision

def test_penetration_two_point_analytic():
    # interlocking pairs 0.3 apart; the extent is the far diagonal
    a = _tooth(1, [[0.0, 0.0, 0.0], [0.7, 1.0, 1.0]])
    b = _tooth(2, [[0.3, 0.0, 0.0], [1.0, 1.0, 1.0]])
    assert penetration_distance(a, b) == pytest.approx(np.sqrt(3.0), abs=1e-12)


def test_penetration_requires_contact():
    a = _tooth(1, [[0.0, 0.0, 0.0]])
    b = _tooth(2, [[5.0, 0.0, 0.0]])
    with pytest.raises(NoCollision):
        penetration_distance(a, b)


def test_interlock_is_strict():
    # exactly at the radius sum: no interlock
    a = _tooth(1, [[0.0, 0.0, 0.0]])
    b = _tooth(2, [[0.5, 0.0, 0.0]])
    with pytest.raises(NoCollision):
        penetration_distance(a, b)


def test_detect_collisions_matches_brute(rng):
    # random blobs jammed into a small box; tree and brute must agree
    for trial in range(10):
        teeth = []
        for k in range(6):
            center = rng.uniform(-4.0, 4.0, size=3)
            pts = center + rng.normal(0.0, 1.2, size=(40, 3))
            teeth.append(_tooth(k + 1, pts))
        jaw = Jaw("upper", teeth)
        got = {(a, b) for a, b, _ in detect_collisions(jaw).pairs}
        want = brute_collision_pairs(teeth)
        assert got == want


def test_separation_step_clears_single_pair():
    a = _tooth(3, [[0.0, 0.0, 0.0]])
    b = _tooth(4, [[0.3, 0.0, 0.0]])
    jaw = Jaw("upper", [a, b])
    pairs = detect_collisions(jaw).pairs
    assert len(pairs) == 1
    _, _, step = pairs[0]
    # slide b straight away by the step: contact must be cleared
    b.points = b.points + np.array([step, 0.0, 0.0])
    assert not detect_collisions(jaw).pairs


def test_adjacent_gaps_matches_brute(corpus):
    case = corpus[1]
    for jaw in (case.upper, case.lower):
        for a_id, b_id, gap in adjacent_gaps(jaw):
            a, b = jaw.get(a_id), jaw.get(b_id)
            assert gap == pytest.approx(brute_min_distance(a.points, b.points), abs=1e-9)


def test_adjacent_gaps_skip_absent(corpus):
    case = corpus[2].copy()
    jaw = case.upper
    victim = jaw.teeth[5]
    victim.present = False
    ids = [(a, b) for a, b, _ in adjacent_gaps(jaw)]
    assert (jaw.teeth[4].id, jaw.teeth[6].id) in ids
    assert all(victim.id not in pair for pair in ids)


# ------------------------------------------------------------ regularizing

def _perturbed_jaw(case, side, seed):
    jaw = gt_view(case).jaw(side)
    config = AugmentConfig()
    for tooth in jaw.present_teeth():
        t = perturb_tooth(tooth, derive_seed(seed, "perturb", case.id, tooth.id), config)
        tooth.points = t.apply(tooth.points)
    return jaw


def test_regularize_satisfies_both_families(corpus):
    config = AugmentConfig()
    lo, hi = config.arch_dist_range
    for k, case in enumerate(corpus[:5]):
        jaw = _perturbed_jaw(case, "upper", 600 + k)
        arch = fit_arch_line(gt_view(case).upper)
        reg = jaw_regularize(jaw, arch, config)
        for _, _, gap in adjacent_gaps(reg):
            assert gap <= config.gap_threshold + 1e-9
        for tooth in reg.present_teeth():
            d = abs(arch.signed_distance(tooth.centroid()))
            assert lo - 1e-9 <= d <= hi + 1e-9


def test_regularize_is_pure_and_idempotent(corpus):
    case = corpus[3]
    jaw = _perturbed_jaw(case, "lower", 77)
    before = [t.points.copy() for t in jaw.teeth]
    arch = fit_arch_line(gt_view(case).lower)
    config = AugmentConfig()
    once = jaw_regularize(jaw, arch, config)
    for t, snap in zip(jaw.teeth, before):
        assert np.array_equal(t.points, snap)
    twice = jaw_regularize(once, arch, config)
    for a, b in zip(once.teeth, twice.teeth):
        assert np.linalg.norm(a.points - b.points) < 1e-6


def test_regularize_preserves_rotation(corpus):
    # the pass only translates, so recovered rotations survive it
    from toothalign.geometry import kabsch_recover

    case = corpus[4]
    jaw = _perturbed_jaw(case, "upper", 91)
    arch = fit_arch_line(gt_view(case).upper)
    pre = {
        t.id: kabsch_recover(t.gt_points, t.points).angle()
        for t in jaw.present_teeth()
    }
    reg = jaw_regularize(jaw, arch, AugmentConfig())
    for t in reg.present_teeth():
        post = kabsch_recover(t.gt_points, t.points).angle()
        assert post == pytest.approx(pre[t.id], abs=1e-9)


# ------------------------------------------------------------- resolution

def test_resolve_clears_forced_overlap(corpus):
    case = corpus[5]
    jaw = gt_view(case).upper
    arch = fit_arch_line(jaw)
    a, b = jaw.teeth[6], jaw.teeth[7]
    # shallow contact, like a perturbation would cause: close the surface
    # gap and sink another 0.6 mm
    gap = brute_min_distance(a.points, b.points)
    direction = a.centroid() - b.centroid()
    direction /= np.linalg.norm(direction)
    b.points = b.points + (gap + 0.6) * direction
    assert detect_collisions(jaw).pairs
    fixed, iters = resolve_collisions_verbose(jaw, arch, AugmentConfig())
    assert not detect_collisions(fixed).pairs
    assert 1 <= iters <= 10


def test_resolve_noop_when_clear(corpus):
    case = corpus[6]
    jaw = gt_view(case).lower
    arch = fit_arch_line(jaw)
    out, iters = resolve_collisions_verbose(jaw, arch, AugmentConfig())
    assert iters == 0
    for t_in, t_out in zip(jaw.teeth, out.teeth):
        assert np.array_equal(t_in.points, t_out.points)


def test_resolve_gives_up_honestly(corpus):
    case = corpus[7]
    jaw = gt_view(case).upper
    arch = fit_arch_line(jaw)
    a, b = jaw.teeth[5], jaw.teeth[6]
    b.points = b.points + 0.9 * (a.centroid() - b.centroid())
    with pytest.raises(CollisionUnresolved):
        resolve_collisions(jaw, arch, AugmentConfig(max_collision_iters=1))


# ------------------------------------------------------------ case drivers

def test_constrained_augment_deterministic(corpus):
    case = corpus[8]
    a = constrained_augment_case(case, seed=21)
    b = constrained_augment_case(case, seed=21)
    c = constrained_augment_case(case, seed=22)
    for ta, tb in zip(a.upper.teeth + a.lower.teeth, b.upper.teeth + b.lower.teeth):
        assert np.array_equal(ta.points, tb.points)
    assert any(
        not np.array_equal(ta.points, tc.points)
        for ta, tc in zip(a.upper.teeth, c.upper.teeth)
    )


def test_constrained_augment_report(corpus):
    case = corpus[9]
    out, report = constrained_augment_case_report(case, seed=5)
    assert report["satisfied"]
    assert set(report["collision_iterations"]) == {"upper", "lower"}
    for side in ("upper", "lower"):
        entry = report["jaws"][side]
        assert entry["collisions"] == 0
        assert entry["max_gap_mm"] <= 2.35 + 1e-9
        assert entry["max_arch_dist_mm"] <= 2.2 + 1e-9
        assert entry["max_angle_deg"] <= 10.0 + 1e-9
    # targets pass through untouched
    for t_in, t_out in zip(
        case.upper.teeth + case.lower.teeth, out.upper.teeth + out.lower.teeth
    ):
        assert np.array_equal(t_in.gt_points, t_out.gt_points)
    assert any(t.moved for t in out.upper.teeth)


def test_ordinary_augment_trigger_rate(corpus):
    case = corpus[0]
    config = AugmentConfig()
    fired = 0
    for seed in range(200):
        out = ordinary_augment(case, seed, config)
        changed = any(
            not np.array_equal(a.points, b.points)
            for a, b in zip(case.upper.teeth, out.upper.teeth)
        )
        fired += changed
        for a, b in zip(
            case.upper.teeth + case.lower.teeth, out.upper.teeth + out.lower.teeth
        ):
            assert np.array_equal(a.gt_points, b.gt_points)
    # binomial(200, 0.62): three sigma is ~0.1
    assert abs(fired / 200.0 - config.ordinary_prob) < 0.11


def test_ordinary_augment_deterministic(corpus):
    case = corpus[1]
    a = ordinary_augment(case, 17)
    b = ordinary_augment(case, 17)
    for ta, tb in zip(a.upper.teeth + a.lower.teeth, b.upper.teeth + b.lower.teeth):
        assert np.array_equal(ta.points, tb.points)


def test_check_constraints_at_targets(corpus):
    report = check_constraints(gt_view(corpus[0]), AugmentConfig())
    assert report["satisfied"]
    for side in ("upper", "lower"):
        entry = report["jaws"][side]
        assert entry["teeth"] == 12
        assert entry["collisions"] == 0
        assert entry["max_angle_deg"] < 1e-6
