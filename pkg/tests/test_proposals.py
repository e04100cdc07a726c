"""Box utilities and proposal provider contracts."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from claripick.errors import ConfigError
from claripick.evaluation import average_precision
from claripick.proposals import (
    ObjectnessScorerParams,
    Proposal,
    iou,
    nms,
    propose_ground_truth,
    propose_objectness,
    train_objectness_scorer,
)
from claripick.scenes import BoundingBox
from claripick.synthetic import GeneratorConfig, generate_synthetic_dataset, grid_boxes, render_objects

boxes_strategy = st.builds(
    lambda x, y, w, h: BoundingBox(x, y, x + w, y + h),
    st.floats(0, 50), st.floats(0, 50), st.floats(1, 60), st.floats(1, 60),
)


# -- iou ----------------------------------------------------------------------


def test_iou_examples():
    a = BoundingBox(0, 0, 2, 2)
    assert iou(a, a) == 1.0
    assert iou(a, BoundingBox(10, 10, 12, 12)) == 0.0
    b = BoundingBox(1, 1, 3, 3)
    assert iou(a, b) == pytest.approx(1.0 / 7.0, abs=1e-12)


def test_iou_shared_edge_is_zero():
    assert iou(BoundingBox(0, 0, 2, 2), BoundingBox(2, 0, 4, 2)) == 0.0


@given(boxes_strategy, boxes_strategy)
def test_iou_symmetric_and_bounded(a, b):
    ab, ba = iou(a, b), iou(b, a)
    assert ab == ba
    assert 0.0 <= ab <= 1.0
    assert iou(a, a) == 1.0


# -- nms ----------------------------------------------------------------------


def test_proposal_score_range():
    with pytest.raises(ConfigError):
        Proposal(BoundingBox(0, 0, 1, 1), 1.5)
    with pytest.raises(ConfigError):
        Proposal(BoundingBox(0, 0, 1, 1), -0.1)


def test_nms_examples():
    b = BoundingBox(0, 0, 10, 10)
    solo = [Proposal(b, 0.7)]
    assert nms(solo, 0.5) == solo

    pair = [Proposal(b, 0.8), Proposal(b, 0.9)]
    kept = nms(pair, 0.5)
    assert len(kept) == 1 and kept[0].objectness == 0.9

    disjoint = [Proposal(b, 0.8), Proposal(BoundingBox(20, 20, 30, 30), 0.9)]
    assert len(nms(disjoint, 0.5)) == 2


def test_nms_tie_break_deterministic():
    props = [
        Proposal(BoundingBox(5, 0, 15, 10), 0.8),
        Proposal(BoundingBox(0, 5, 10, 15), 0.8),
        Proposal(BoundingBox(0, 0, 10, 10), 0.8),
    ]
    kept = nms(props, 0.9)
    assert [(p.bbox.x_min, p.bbox.y_min) for p in kept] == [(0, 0), (0, 5), (5, 0)]


def test_nms_threshold_validation_and_subset():
    b = [Proposal(BoundingBox(i, 0, i + 5, 5), 0.5 + i / 100) for i in range(0, 20, 2)]
    with pytest.raises(ConfigError):
        nms(b, 0.0)
    kept = nms(b, 0.4)
    assert set(id(p) for p in kept) <= set(id(p) for p in b)
    for i, p in enumerate(kept):
        for q in kept[i + 1:]:
            assert iou(p.bbox, q.bbox) <= 0.4


# -- ground-truth provider ----------------------------------------------------


def gen_scenes(n=3, rate=0.0, seed=0):
    cfg = GeneratorConfig(scene_count=n, min_objects=4, max_objects=6,
                          ambiguity_rate=rate, image_size=256)
    return generate_synthetic_dataset(cfg, seed=seed).scenes


def test_ground_truth_provider_basics():
    scene = gen_scenes(1, seed=3)[0]
    props = propose_ground_truth(scene, seed=0)
    assert len(props) == len(scene.objects)
    assert all(p.objectness == 1.0 for p in props)
    truth = {(o.bbox.x_min, o.bbox.y_min, o.bbox.x_max, o.bbox.y_max) for o in scene.objects}
    got = {(p.bbox.x_min, p.bbox.y_min, p.bbox.x_max, p.bbox.y_max) for p in props}
    assert got == truth


def test_ground_truth_provider_seed_permutes_order_only():
    scene = gen_scenes(1, seed=5)[0]
    a = propose_ground_truth(scene, seed=0)
    b = propose_ground_truth(scene, seed=1)
    assert {p.bbox for p in a} == {p.bbox for p in b}


def test_ground_truth_provider_reaches_ap_one():
    scenes = gen_scenes(3, seed=7)
    per_scene = [propose_ground_truth(s, seed=i) for i, s in enumerate(scenes)]
    golds = [[o.bbox for o in s.objects] for s in scenes]
    assert average_precision(per_scene, golds, iou_threshold=0.5) == pytest.approx(1.0)


# -- objectness baseline ------------------------------------------------------


def test_blank_image_yields_nothing():
    blank = np.full((100, 100, 3), 200, dtype=np.uint8)
    assert propose_objectness(blank) == []


def test_box_borders_are_filtered_out():
    empty_scene = render_objects(256, grid_boxes(256), [])
    assert propose_objectness(empty_scene) == []


def test_single_solid_shape_found_with_high_iou():
    image = np.full((120, 120, 3), 236, dtype=np.uint8)
    image[40:80, 30:86] = (200, 40, 40)
    props = propose_objectness(image)
    assert len(props) == 1
    assert iou(props[0].bbox, BoundingBox(30, 40, 86, 80)) >= 0.7
    # untrained scorer emits the prior probability, never blocks emission
    assert props[0].objectness == pytest.approx(0.5)


def test_generated_scene_recall_at_half_iou():
    scenes = gen_scenes(4, seed=11)
    matched = total = 0
    for scene in scenes:
        props = propose_objectness(scene.image)
        for obj in scene.objects:
            total += 1
            if any(iou(p.bbox, obj.bbox) >= 0.5 for p in props):
                matched += 1
    assert total > 0
    assert matched / total >= 0.8, f"recall {matched}/{total}"


def test_trained_scorer_separates_objects_from_noise():
    train_scenes = gen_scenes(6, seed=13)
    params = train_objectness_scorer(train_scenes)
    assert np.all(np.isfinite(params.weights)) and np.isfinite(params.bias)

    held_out = gen_scenes(2, seed=17)
    hit_scores, miss_scores = [], []
    for scene in held_out:
        for p in propose_objectness(scene.image, params):
            best = max(iou(p.bbox, o.bbox) for o in scene.objects)
            (hit_scores if best >= 0.5 else miss_scores).append(p.objectness)
    assert hit_scores
    assert np.mean(hit_scores) > 0.5


def test_scorer_training_requires_proposals():
    from claripick.scenes import ObjectInstance, Scene

    blank = np.full((120, 120, 3), 200, dtype=np.uint8)
    scene = Scene(
        "blank", 120, 120,
        [BoundingBox(0, 0, 50, 50), BoundingBox(60, 0, 110, 50),
         BoundingBox(0, 60, 50, 110), BoundingBox(60, 60, 110, 110)],
        [ObjectInstance("o", BoundingBox(5, 5, 20, 20))],
        image=blank,
    )
    with pytest.raises(ConfigError, match="no proposals"):
        train_objectness_scorer([scene])
