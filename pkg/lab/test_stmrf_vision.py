"""
Tests for the synthetic video, frame differencing, the motion conditional,
DynBP detection and frame files
"""
import numpy as np
import pytest

from inference.dynbp import dynbp_step
from inference.path_engine import layout_for
from lab.frames_io import read_frame_file, read_pgm, write_frame_file, write_pgm
from lab.stmrf_vision import (
    MOTION_SOLVER,
    FrameSequence,
    MotionModelParams,
    build_motion_conditional,
    detect_motion,
    difference_masks,
    frame_difference,
    grid_edges,
    mask_iou,
    masks_iou,
    motion_metrics_frame,
    pixel_beliefs,
    pixel_tables,
    point_mass_marginals,
    psi_table,
    quantize,
    synth_random_patch_video,
)
from model.temporal import priors_from_marginals


def blank_video(frames=4, height=4, width=4):
    return FrameSequence(np.zeros((frames, height, width)), np.zeros((frames, height, width), dtype=bool))


# ---------- synthetic video ----------

def test_patch_mask_size_and_walk():
    fs = synth_random_patch_video(width=30, height=20, frames=25, patch=5, seed=0)
    assert fs.frames.shape == (25, 20, 30)
    assert np.all(fs.masks.sum(axis=(1, 2)) == 25)
    corners = [np.argwhere(mask)[0] for mask in fs.masks]
    steps = [int(np.abs(b - a).sum()) for a, b in zip(corners, corners[1:])]
    assert steps == [1] * 24


def test_video_is_seeded():
    a = synth_random_patch_video(20, 20, 6, seed=3)
    b = synth_random_patch_video(20, 20, 6, seed=3)
    c = synth_random_patch_video(20, 20, 6, seed=4)
    assert np.array_equal(a.frames, b.frames) and np.array_equal(a.masks, b.masks)
    assert not np.array_equal(a.frames, c.frames)


def test_patch_is_camouflaged():
    fs = synth_random_patch_video(frames=60, seed=0)
    inside = fs.frames[fs.masks].mean()
    outside = fs.frames[~fs.masks].mean()
    n_out = 50 * 50 - 25
    sigma = np.sqrt((1 / 12) * (1 / (25 * 60) + 1 / n_out))
    assert abs(inside - outside) < 3 * sigma


def test_background_variants():
    static = synth_random_patch_video(20, 20, 4, seed=2)
    still = ~(static.masks[0] | static.masks[3])
    assert np.array_equal(static.frames[3][still], static.frames[0][still])

    redrawn = synth_random_patch_video(20, 20, 4, seed=2, background="redrawn")
    moved = ~(redrawn.masks[0] | redrawn.masks[1])
    assert np.mean(redrawn.frames[1][moved] != redrawn.frames[0][moved]) > 0.99
    # differences no longer single out the patch
    d = frame_difference(redrawn)
    assert d[0][moved].mean() > 0.5

    with pytest.raises(ValueError):
        synth_random_patch_video(20, 20, 4, background="flicker")


def test_patch_must_fit():
    with pytest.raises(ValueError):
        synth_random_patch_video(width=5, height=10, patch=5)


# ---------- differencing ----------

def test_quantize():
    assert np.allclose(quantize([0.0, 0.124, 0.125, 0.999, 1.0]), [0.0, 0.0, 0.125, 0.875, 0.875])


def test_identical_frames_give_no_difference():
    d = frame_difference(FrameSequence(np.full((3, 4, 4), 0.4)))
    assert d.shape == (2, 4, 4)
    assert not d.any()


def test_single_pixel_jump():
    frames = np.zeros((2, 5, 5))
    frames[1, 2, 3] = 1.0
    d = frame_difference(FrameSequence(frames))
    assert d.sum() == 1 and d[0, 2, 3]


def test_one_bin_jitter_is_ignored():
    frames = np.zeros((2, 3, 3))
    frames[1] = 0.13  # one bin up
    assert not frame_difference(FrameSequence(frames)).any()


def test_difference_follows_the_patch():
    fs = synth_random_patch_video(30, 30, 12, seed=1)
    d = frame_difference(fs)
    on_patch = d[fs.masks[1:]].mean()
    off_patch = d[~(fs.masks[1:] | fs.masks[:-1])].mean()
    assert on_patch > 0.5
    assert off_patch == 0.0


def test_difference_needs_two_frames():
    with pytest.raises(ValueError):
        frame_difference(blank_video(frames=1))


# ---------- model ----------

def test_psi_table():
    assert np.allclose(psi_table(0.99, 2), [[0.99, 0.01], [0.01, 0.99]])
    table = psi_table(0.6, 3)
    assert np.allclose(table.sum(axis=1), 1.0)
    assert table[0, 2] == pytest.approx(0.2)


def test_params_validation():
    with pytest.raises(ValueError):
        MotionModelParams(theta_s=0.4)
    with pytest.raises(ValueError):
        MotionModelParams(states=1)
    with pytest.raises(ValueError):
        MotionModelParams(diff_threshold=1.5)
    MotionModelParams(theta_t=0.4, states=3)


def test_pixel_tables():
    clamp, decay = pixel_tables(MotionModelParams())
    assert np.allclose(clamp, [[0.0, 1.0], [0.0, 1.0]])
    assert np.allclose(decay, [[0.3, 0.2], [0.3, 0.2]])
    # no evidence: the measurement term is 1/C for every state
    assert np.allclose(decay.sum(axis=1), 0.5)
    _, decay3 = pixel_tables(MotionModelParams(theta_t=0.6, states=3))
    assert np.allclose(decay3[2], psi_table(0.6, 3)[1] / 3)
    assert np.allclose(decay3[0], decay3[1])


def test_motion_conditional_layout():
    d = np.zeros((3, 4), dtype=bool)
    d[1, 2] = True
    tm = build_motion_conditional(d, MotionModelParams())
    edges = grid_edges(3, 4)
    assert len(edges) == 17
    assert len(tm.factors) == 17 + 12
    assert tm.factor(0).past_scope == () and tm.factor(0).future_scope == (0, 1)
    assert np.allclose(tm.factor_table(17 + 6), [[0.0, 1.0], [0.0, 1.0]])
    assert np.allclose(tm.factor_table(17 + 5), [[0.3, 0.2], [0.3, 0.2]])
    again = build_motion_conditional(np.zeros((3, 4), dtype=bool), MotionModelParams(), tm.region_graph)
    assert again.region_graph is tm.region_graph


def test_motion_regions_are_not_degenerate():
    tm = build_motion_conditional(np.zeros((3, 3), dtype=bool), MotionModelParams())
    assert layout_for(tm).degenerate_children == []


# ---------- detection ----------

def test_evidence_pins_the_moving_state():
    params = MotionModelParams()
    tm = build_motion_conditional(np.ones((3, 3), dtype=bool), params)
    priors = priors_from_marginals(tm, point_mass_marginals(9, 2))
    result = dynbp_step(tm, priors, MOTION_SOLVER)
    beliefs = pixel_beliefs(tm, result.next_priors)
    assert np.all(beliefs[:, 1] >= 1 - 1e-9)


def test_evidence_is_monotone():
    params = MotionModelParams()
    quiet = np.zeros((3, 3), dtype=bool)
    fired = quiet.copy()
    fired[1, 1] = True
    marginals = point_mass_marginals(9, 2)
    beliefs = []
    for d in (quiet, fired):
        tm = build_motion_conditional(d, params)
        result = dynbp_step(tm, priors_from_marginals(tm, marginals), MOTION_SOLVER)
        beliefs.append(pixel_beliefs(tm, result.next_priors)[4, 1])
    assert beliefs[1] >= beliefs[0]


def test_static_scene_decays_to_rest():
    fs = blank_video(frames=4)
    result = detect_motion(fs, init_state=1)
    assert result.masks[0].all()
    assert not result.masks[1:].any()
    assert all(result.converged)


def test_constant_evidence_gives_full_masks():
    fs = blank_video(frames=3)
    result = detect_motion(fs, d=np.ones((2, 4, 4), dtype=bool))
    assert result.masks[1:].all()
    assert not result.masks[0].any()


def test_dynbp_beats_frame_differencing():
    fs = synth_random_patch_video(20, 20, 16, seed=0)
    d = frame_difference(fs)
    result = detect_motion(fs, d=d)
    metrics = motion_metrics_frame(fs, result, d)
    assert list(metrics.columns) == ["frame", "iou_dynbp", "iou_difference", "iou_dilated", "converged"]
    late = metrics[metrics["frame"] >= 2]
    assert late["iou_dynbp"].mean() > late["iou_difference"].mean()
    assert late["iou_dynbp"].mean() > late["iou_dilated"].mean()
    assert result.mean_iou(start=2) == pytest.approx(late["iou_dynbp"].mean())


@pytest.mark.slow
def test_full_size_detection_over_several_seeds():
    dynbp_iou, difference_iou = [], []
    for seed in range(5):
        fs = synth_random_patch_video(50, 50, 60, seed=seed)
        d = frame_difference(fs)
        metrics = motion_metrics_frame(fs, detect_motion(fs, d=d), d)
        late = metrics[metrics["frame"] >= 10]
        dynbp_iou.append(late["iou_dynbp"].mean())
        difference_iou.append(late["iou_difference"].mean())
    assert np.mean(dynbp_iou) > np.mean(difference_iou)


def test_mask_iou():
    a = np.zeros((4, 4), dtype=bool)
    assert mask_iou(a, a) == 1.0
    b = a.copy()
    b[0, :2] = True
    c = a.copy()
    c[0, 1:3] = True
    assert mask_iou(b, c) == pytest.approx(1 / 3)
    assert np.allclose(masks_iou(np.stack([b, a]), np.stack([c, a])), [1 / 3, 1.0])


def test_difference_masks():
    d = np.zeros((1, 5, 5), dtype=bool)
    d[0, 2, 2] = True
    raw = difference_masks(d)
    dilated = difference_masks(d, dilate=True)
    assert raw.shape == (2, 5, 5) and not raw[0].any()
    assert raw[1].sum() == 1
    assert dilated[1].sum() == 9


# ---------- frame files ----------

def test_pgm_round_trip(tmp_path):
    mask = np.zeros((6, 7), dtype=bool)
    mask[2:4, 3:5] = True
    path = write_pgm(tmp_path / "masks" / "m.pgm", mask)
    assert path.read_bytes().startswith(b"P5")
    assert np.array_equal(read_pgm(path) == 1.0, mask)
    image = np.linspace(0, 1, 42).reshape(6, 7)
    assert np.allclose(read_pgm(write_pgm(tmp_path / "i.pgm", image)), image, atol=0.5 / 255 + 1e-12)


def test_frame_file_round_trip(tmp_path):
    frames = np.random.default_rng(0).random((3, 4, 5))
    path = write_frame_file(tmp_path / "clip.stmf", frames)
    raw = path.read_bytes()
    assert raw[:4] == b"STMF" and len(raw) == 16 + 60 * 4
    assert np.allclose(read_frame_file(path), frames, atol=1e-6)


def test_frame_file_errors(tmp_path):
    bad = tmp_path / "bad.stmf"
    bad.write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(ValueError):
        read_frame_file(bad)
    short = tmp_path / "short.stmf"
    short.write_bytes(b"STMF" + np.array([1, 2, 2], dtype="<u4").tobytes() + bytes(4))
    with pytest.raises(ValueError):
        read_frame_file(short)
    with pytest.raises(FileNotFoundError):
        read_pgm(tmp_path / "missing.pgm")
