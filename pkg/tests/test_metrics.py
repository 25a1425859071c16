import math

import numpy as np
import pytest
from conftest import nan_equal, tiny_behavior_sets, tiny_detection_sets, tiny_tracks

from chimptrack.dataio import TrackedBox
from chimptrack.geometry import BoxXYXY
from chimptrack.metrics import (
    ALPHA_GRID,
    behavior_map,
    clear_metrics,
    detection_ap,
    gated_match,
    hota,
    idf1,
    keypoint_ap,
    oks,
    pck,
)
from chimptrack.oracles import (
    brute_behavior_map,
    brute_clear,
    brute_detection_ap,
    brute_hota,
    brute_idf1,
)
from chimptrack.rng import Xoshiro256

BOX = BoxXYXY(0.0, 0.0, 10.0, 10.0)
# same-size box shifted so IoU is exactly 0.6 (overlap fraction 0.75)
BOX_IOU06 = BoxXYXY(0.0, 2.5, 10.0, 12.5)
FAR = BoxXYXY(200.0, 200.0, 210.0, 210.0)


def track(frame, tid, box=BOX):
    return TrackedBox(frame, tid, box)


# ---------------------------------------------------------------- gated_match


def test_gated_match_maximizes_benefit():
    benefit = np.array([[0.9, 0.8], [0.85, 0.1]])
    valid = np.ones((2, 2), dtype=bool)
    assert gated_match(benefit, valid) == [(0, 1), (1, 0)]


def test_gated_match_prefers_pair_count_over_benefit():
    # only column 0 is valid: one pair max, and it should be the best one
    benefit = np.array([[0.9, 0.8], [0.85, 0.1]])
    valid = np.array([[True, False], [True, False]])
    assert gated_match(benefit, valid) == [(0, 0)]


def test_gated_match_empty():
    assert gated_match(np.zeros((0, 3)), np.zeros((0, 3), dtype=bool)) == []


# -------------------------------------------------------------------- CLEAR


def test_clear_perfect_tracking():
    gt = [track(f, i) for f in range(3) for i in (1, 2)]
    out = clear_metrics(gt, list(gt))
    assert out.mota == 100.0
    assert out.motp == 100.0
    assert (out.fp, out.fn, out.idsw) == (0, 0, 0)
    assert out.matched == 6
    assert out.gt_count == 6


def test_clear_mota_is_identity_of_components():
    gt = [track(0, 1), track(1, 1)]
    pred = [track(0, 1), TrackedBox(1, 9, FAR)]
    out = clear_metrics(gt, pred)
    assert (out.fp, out.fn, out.idsw) == (1, 1, 0)
    assert out.n_fp == 50.0 and out.n_fn == 50.0 and out.n_ids == 0.0
    assert out.mota == 100.0 - out.n_fp - out.n_fn - out.n_ids == 0.0


def test_clear_single_identity_swap_counts_once():
    gt = [track(f, 1) for f in range(10)]
    pred = [track(f, 1) for f in range(5)] + [track(f, 2) for f in range(5, 10)]
    out = clear_metrics(gt, pred)
    assert out.idsw == 1
    assert (out.fp, out.fn) == (0, 0)
    assert out.mota == pytest.approx(90.0)


def test_clear_carryover_keeps_previous_pair():
    # frame 1 offers a better box under a new id; CLEAR keeps the old pair
    gt = [track(0, 1), track(1, 1)]
    pred = [
        TrackedBox(0, 1, BOX_IOU06),
        TrackedBox(1, 1, BOX_IOU06),
        TrackedBox(1, 2, BOX),  # IoU 1.0 but must not steal the match
    ]
    out = clear_metrics(gt, pred)
    assert out.idsw == 0
    assert out.fp == 1
    assert out.matched == 2
    assert out.motp == pytest.approx(60.0)  # mean matched IoU stays 0.6
    assert out.mota == pytest.approx(100.0 - 50.0)


def test_clear_idsw_compares_against_last_known_id():
    gt = [track(0, 1), track(1, 1), track(2, 1)]
    pred = [track(0, 1), track(2, 2)]  # gap at frame 1, then a new id
    out = clear_metrics(gt, pred)
    assert out.fn == 1
    assert out.idsw == 1


def test_clear_motp_modes():
    gt = [track(0, 1), track(1, 1)]
    pred = [TrackedBox(0, 1, BOX_IOU06), TrackedBox(1, 1, BOX_IOU06)]
    assert clear_metrics(gt, pred, motp_mode="iou").motp == pytest.approx(60.0)
    assert clear_metrics(gt, pred, motp_mode="distance").motp == pytest.approx(40.0)
    with pytest.raises(ValueError):
        clear_metrics(gt, pred, motp_mode="euclidean")


def test_clear_threshold_is_inclusive_gate():
    gt = [track(0, 1)]
    pred = [TrackedBox(0, 1, BOX_IOU06)]
    assert clear_metrics(gt, pred, iou_thresh=0.6).matched == 1
    assert clear_metrics(gt, pred, iou_thresh=0.61).matched == 0


def test_clear_rejects_empty_gt_and_duplicates():
    with pytest.raises(ValueError):
        clear_metrics([], [track(0, 1)])
    with pytest.raises(ValueError):
        clear_metrics([track(0, 1), track(0, 1)], [track(0, 1)])
    with pytest.raises(ValueError):
        clear_metrics([track(0, 1)], [track(0, 2), track(0, 2)])


# --------------------------------------------------------------------- IDF1


def test_idf1_perfect():
    gt = [track(f, i) for f in range(4) for i in (1, 2)]
    out = idf1(gt, list(gt))
    assert out.idf1 == 100.0
    assert out.idtp == 8 and out.idfp == 0 and out.idfn == 0


def test_idf1_half_split_identity():
    gt = [track(f, 1) for f in range(10)]
    pred = [track(f, 1) for f in range(5)] + [track(f, 2) for f in range(5, 10)]
    out = idf1(gt, pred)
    assert out.idtp == 5
    assert out.idfp == 5 and out.idfn == 5
    assert out.idf1 == pytest.approx(50.0)


def test_idf1_prefers_longest_joint_coverage():
    # pred id 7 covers gt 1 for 3 frames, pred id 8 covers it for 1 frame
    gt = [track(f, 1) for f in range(4)]
    pred = [track(0, 7), track(1, 7), track(2, 7), track(3, 8)]
    out = idf1(gt, pred)
    assert out.idtp == 3


# --------------------------------------------------------------------- HOTA


def test_hota_perfect():
    gt = [track(f, i) for f in range(5) for i in (1, 2)]
    out = hota(gt, list(gt))
    assert out.hota == pytest.approx(100.0)
    assert out.deta == pytest.approx(100.0)
    assert out.assa == pytest.approx(100.0)
    assert out.alphas == tuple(float(a) for a in ALPHA_GRID)
    assert len(out.hota_alpha) == 19


def test_hota_identity_swap_halves_association():
    gt = [track(f, 1) for f in range(10)]
    pred = [track(f, 1) for f in range(5)] + [track(f, 2) for f in range(5, 10)]
    out = hota(gt, pred)
    assert out.deta == pytest.approx(100.0)
    assert out.assa == pytest.approx(50.0)
    assert out.hota == pytest.approx(100.0 * math.sqrt(0.5))


def test_hota_rejects_empty_gt():
    with pytest.raises(ValueError):
        hota([], [track(0, 1)])


# ------------------------------------------------------------- detection AP


def test_detection_ap_perfect():
    gts = [(0, BOX), (1, FAR)]
    preds = [(0, BOX, 0.9), (1, FAR, 0.8)]
    out = detection_ap(preds, gts)
    assert out.ap == 100.0
    assert out.ap50 == 100.0 and out.ap75 == 100.0
    assert out.ar == 100.0
    assert out.gt_count == 2 and out.pred_count == 2


def test_detection_ap_high_confidence_fp_halves_ap():
    gts = [(0, BOX)]
    preds = [(0, FAR, 0.95), (0, BOX, 0.9)]
    out = detection_ap(preds, gts)
    assert out.ap == pytest.approx(50.0)
    assert out.ap50 == pytest.approx(50.0)


def test_detection_ap_grades_localization_across_thresholds():
    gts = [(0, BOX)]
    preds = [(0, BOX_IOU06, 0.9)]  # IoU exactly 0.6: passes 0.50, 0.55, 0.60
    out = detection_ap(preds, gts)
    assert out.ap50 == 100.0
    assert out.ap75 == 0.0
    assert out.ap == pytest.approx(30.0)
    assert out.ar == pytest.approx(30.0)


def test_detection_ap_area_splits_filter_both_sides():
    medium = BoxXYXY(0.0, 0.0, 40.0, 40.0)       # 1600 in [1024, 9216)
    large = BoxXYXY(100.0, 100.0, 200.0, 200.0)  # 10000 >= 9216
    small = BoxXYXY(50.0, 50.0, 55.0, 55.0)      # 25: excluded from both splits
    gts = [(0, medium), (0, large)]
    preds = [(0, medium, 0.9), (0, small, 0.8)]
    out = detection_ap(preds, gts)
    assert out.ap_medium == pytest.approx(100.0)
    assert out.ap_large == pytest.approx(0.0)  # large gt exists, nothing predicted there
    # recall caps at 0.5, so 51 of the 101 interpolation points score 1.0
    assert out.ap == pytest.approx(100.0 * 51.0 / 101.0)


def test_detection_ap_zero_gt_conventions():
    flagged = detection_ap([(0, BOX, 0.9)], [])
    assert flagged.ap == 0.0
    assert math.isnan(flagged.ar)
    empty = detection_ap([], [])
    assert math.isnan(empty.ap)
    # subranges with no gt are NaN even when the overall has gt
    out = detection_ap([(0, BOX, 0.9)], [(0, BOX)])  # BOX area 100: below medium
    assert math.isnan(out.ap_medium) and math.isnan(out.ap_large)


def test_detection_ap_score_ties_break_by_frame_then_order():
    # both predictions score 0.5; the frame-0 one must rank first and win the gt
    gts = [(0, BOX)]
    preds = [(1, BOX, 0.5), (0, BOX, 0.5)]
    out = detection_ap(preds, gts)
    # TP at rank 1 of 2: precision envelope 1.0 up to recall 1.0
    assert out.ap == pytest.approx(100.0)


# ------------------------------------------------------------------ OKS/PCK


def test_oks_hand_value():
    gt_pose = np.zeros((16, 3))
    gt_pose[0] = (5.0, 5.0, 2)  # one labeled joint
    pred_pose = np.zeros((16, 2))
    pred_pose[0] = (9.0, 5.0)  # displaced by 4
    got = oks(pred_pose, gt_pose, BOX)
    want = math.exp(-16.0 / (2.0 * 100.0 * 0.08**2))
    assert got == pytest.approx(want, rel=1e-12)


def test_oks_ignores_unlabeled_joints():
    gt_pose = np.zeros((16, 3))
    gt_pose[0] = (5.0, 5.0, 1)
    gt_pose[1] = (0.0, 0.0, 0)  # unlabeled, wildly wrong prediction is fine
    pred_pose = np.zeros((16, 2))
    pred_pose[0] = (5.0, 5.0)
    pred_pose[1] = (999.0, 999.0)
    assert oks(pred_pose, gt_pose, BOX) == pytest.approx(1.0)
    assert math.isnan(oks(pred_pose, np.zeros((16, 3)), BOX))
    with pytest.raises(ValueError):
        oks(pred_pose, gt_pose, BoxXYXY(0.0, 0.0, 0.0, 10.0))


def test_keypoint_ap_perfect_and_dropped_unlabeled_gts():
    pose = np.array([[float(j), float(2 * j)] for j in range(16)])
    gt_pose = np.hstack([pose, np.full((16, 1), 2.0)])
    gts = [(0, gt_pose, BOX), (0, np.zeros((16, 3)), FAR)]  # second has no labels
    preds = [(0, pose, 0.9)]
    out = keypoint_ap(preds, gts)
    assert out.gt_count == 1  # unlabeled gt dropped
    assert out.ap == pytest.approx(100.0)


def test_pck_hand_case_with_inclusive_boundary():
    gt_pose = np.zeros((1, 16, 3))
    pred_pose = np.zeros((1, 16, 2))
    gt_pose[0, :, 2] = 0  # default invisible
    gt_pose[0, 0] = (5.0, 5.0, 2)
    gt_pose[0, 1] = (8.0, 8.0, 1)
    gt_pose[0, 2] = (2.0, 2.0, 2)
    gt_pose[0, 3] = (1.0, 1.0, 0)  # not counted
    pred_pose[0, 0] = (5.5, 5.0)   # dist 0.5 < 1.0
    pred_pose[0, 1] = (9.0, 8.0)   # dist 1.0 == threshold: correct (inclusive)
    pred_pose[0, 2] = (3.5, 2.0)   # dist 1.5 > 1.0
    pred_pose[0, 3] = (99.0, 99.0)
    boxes = np.array([[0.0, 0.0, 10.0, 20.0]])  # max dim 20, delta 0.05 -> thresh 1.0
    out = pck(pred_pose, gt_pose, boxes, delta=0.05)
    assert out.mean == pytest.approx(100.0 * 2.0 / 3.0)
    assert out.counted[3] == 0
    assert math.isnan(out.per_joint[3])
    assert out.per_joint[0] == 100.0 and out.per_joint[2] == 0.0


def test_pck_validation():
    with pytest.raises(ValueError):
        pck(np.zeros((2, 16, 2)), np.zeros((1, 16, 3)), np.zeros((1, 4)))
    with pytest.raises(ValueError):
        pck(np.zeros((1, 16, 2)), np.zeros((1, 16, 3)), np.array([[0.0, 0.0, 1.0, 1.0]]), delta=0.0)
    with pytest.raises(ValueError):
        pck(np.zeros((1, 16, 2)), np.zeros((1, 16, 3)), np.array([[0.0, 0.0, 0.0, 1.0]]))


# -------------------------------------------------------------- behavior mAP


def multihot(*indices):
    hot = np.zeros(23, dtype=int)
    for i in indices:
        hot[i] = 1
    return hot


def scores(**kv):
    s = np.zeros(23)
    for k, v in kv.items():
        s[int(k[1:])] = v
    return s


def test_behavior_map_perfect_and_category_means():
    gts = [(0, BOX, multihot(0, 19)), (1, FAR, multihot(5))]
    preds = [
        (0, BOX, scores(c0=0.9, c19=0.8)),
        (1, FAR, scores(c5=0.7)),
    ]
    out = behavior_map(preds, gts)
    assert out.per_class[0] == pytest.approx(100.0)
    assert out.per_class[19] == pytest.approx(100.0)
    assert out.per_class[5] == pytest.approx(100.0)
    assert math.isnan(out.per_class[1])
    assert out.map == pytest.approx(100.0)
    assert out.map_locomotion == pytest.approx(100.0)
    assert out.map_object == pytest.approx(100.0)
    assert out.map_social == pytest.approx(100.0)
    assert math.isnan(out.map_others)  # no class 21/22 ground truth
    assert out.gt_counts[0] == 1 and out.gt_counts[1] == 0


def test_behavior_map_high_scoring_wrong_box_halves_class_ap():
    gts = [(0, BOX, multihot(2))]
    preds = [
        (0, FAR, scores(c2=0.95)),
        (0, BOX, scores(c2=0.9)),
    ]
    out = behavior_map(preds, gts)
    assert out.per_class[2] == pytest.approx(50.0)
    assert out.map == pytest.approx(50.0)


def test_behavior_map_gt_consumed_once_per_class():
    gts = [(0, BOX, multihot(0))]
    preds = [
        (0, BOX, scores(c0=0.9)),
        (0, BOX, scores(c0=0.8)),  # duplicate hit: FP for class 0
    ]
    out = behavior_map(preds, gts)
    # AP stays 100: the TP outranks the duplicate
    assert out.per_class[0] == pytest.approx(100.0)
    flipped = behavior_map(list(reversed(preds)), gts)
    assert flipped.per_class[0] == pytest.approx(100.0)


# -------------------------------------------------- oracle agreement sweeps


def test_clear_agrees_with_oracle():
    for seed in range(40):
        rng = Xoshiro256(1000 + seed)
        gt, pred = tiny_tracks(rng)
        if not gt:
            continue
        got = clear_metrics(gt, pred)
        want = brute_clear(gt, pred)
        for key in ("mota", "motp", "n_fp", "n_fn", "n_ids"):
            assert nan_equal(getattr(got, key), want[key]), (seed, key)
        for key in ("fp", "fn", "idsw", "matched"):
            assert getattr(got, key) == want[key], (seed, key)


def test_idf1_agrees_with_oracle():
    for seed in range(40):
        rng = Xoshiro256(2000 + seed)
        gt, pred = tiny_tracks(rng)
        if not gt:
            continue
        got = idf1(gt, pred)
        want = brute_idf1(gt, pred)
        assert nan_equal(got.idf1, want["idf1"]), seed
        assert got.idtp == want["idtp"]


def test_hota_agrees_with_oracle():
    for seed in range(40):
        rng = Xoshiro256(3000 + seed)
        gt, pred = tiny_tracks(rng)
        if not gt:
            continue
        got = hota(gt, pred)
        want = brute_hota(gt, pred)
        assert nan_equal(got.hota, want["hota"]), seed
        assert nan_equal(got.deta, want["deta"]), seed
        assert nan_equal(got.assa, want["assa"]), seed


def test_detection_ap_agrees_with_oracle():
    for seed in range(40):
        rng = Xoshiro256(4000 + seed)
        gt, pred = tiny_tracks(rng)
        det_pred, det_gt = tiny_detection_sets(rng, gt, pred)
        got = detection_ap(det_pred, det_gt)
        want = brute_detection_ap(det_pred, det_gt)
        for key in ("ap", "ap50", "ap75", "ap_medium", "ap_large", "ar"):
            assert nan_equal(getattr(got, key), getattr(want, key)), (seed, key)


def test_behavior_map_agrees_with_oracle():
    for seed in range(40):
        rng = Xoshiro256(5000 + seed)
        gt, pred = tiny_tracks(rng)
        det_pred, det_gt = tiny_detection_sets(rng, gt, pred)
        beh_pred, beh_gt = tiny_behavior_sets(rng, det_pred, det_gt)
        got = behavior_map(beh_pred, beh_gt)
        want = brute_behavior_map(beh_pred, beh_gt)
        assert nan_equal(got.map, want.map), seed
        for k in range(23):
            assert nan_equal(got.per_class[k], want.per_class[k]), (seed, k)
        for key in ("map_locomotion", "map_object", "map_social", "map_others"):
            assert nan_equal(getattr(got, key), getattr(want, key)), (seed, key)
