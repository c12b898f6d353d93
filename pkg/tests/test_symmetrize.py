import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capiso.errors import DomainError, PreconditionError
from capiso.functionals import capillarity_perimeter, deficit, hausdorff_boundary_distance, measures
from capiso.geometry import (
    Bubble, CapillarityParams, ProfileSet, VoxelSet, bubble_profile, bubble_slice_radius, voxelize,
)
from capiso.harness import random_voxel_set
from capiso.symmetrize import (
    bisect_reflect, four_reflections, median_cut, normalize, reduction_pipeline, schwarz_symmetrize,
    small_deficit_gate, symmetrize_axes, truncate_and_rescale,
)

P0 = CapillarityParams(0.0, 2)
CONE = ProfileSet(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
TWO_SQUARES = VoxelSet(np.array([[1], [0], [0], [1]], bool), 1.0)


def energy(s, p):
    return capillarity_perimeter(measures(s, p), p.lam)


def mirrored(v: VoxelSet, axis: int, plane: float) -> bool:
    """True when occupancy and cell edges are symmetric about ``x_axis = plane``."""
    e = v.edges(axis)
    if not np.allclose(e + e[::-1], 2 * plane, atol=1e-9):
        return False
    return bool(np.array_equal(v.occupancy, np.flip(v.occupancy, axis=axis)))


@st.composite
def voxel_sets(draw, dim=2):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_voxel_set(np.random.default_rng(seed), dim, h=1.0, max_side=6)


lams = st.floats(-0.9, 0.9)


# ---------------------------------------------------------------- normalize

def test_normalize_examples():
    p = CapillarityParams(0.4, 3)
    b = normalize(Bubble(p, 1.0), p)
    assert measures(b, p).volume == pytest.approx(p.cap_volume, rel=1e-14)
    assert abs(deficit(b, p)) < 1e-12
    c = normalize(CONE, P0)
    assert deficit(c, P0) == pytest.approx(deficit(CONE, P0), abs=1e-9)
    sq = normalize(VoxelSet(np.ones((3, 3)), 1.0), P0)
    # scaling the spacing is exact: zero drift, well inside 2h/side
    assert deficit(sq, P0) == pytest.approx(deficit(VoxelSet(np.ones((3, 3)), 1.0), P0), abs=1e-12)
    assert measures(sq, P0).volume == pytest.approx(P0.cap_volume, rel=1e-14)


# ---------------------------------------------------------------- Schwarz

@pytest.mark.parametrize("lam", [-0.5, 0.0, 0.5])
def test_schwarz_two_squares(lam):
    p = CapillarityParams(lam, 2)
    prof = schwarz_symmetrize(TWO_SQUARES)
    m = measures(prof, p)
    # hand count: centred 2 x 1 slab, sides 1 + 1, top 2, wetted 2
    assert (m.volume, m.rel_perimeter, m.wetted_area) == pytest.approx((2, 4, 2))
    assert energy(prof, p) == pytest.approx(4 - 2 * lam)
    assert energy(TWO_SQUARES, p) == pytest.approx(6 - 2 * lam)


def test_schwarz_bubble_raster():
    h = 0.02
    b = Bubble(P0, P0.cap_volume)
    v = voxelize(bubble_profile(b), 2, h)
    prof = schwarz_symmetrize(v)
    assert energy(prof, P0) <= energy(v, P0) + 1e-12
    # rows follow the bubble to within one cell diagonal
    assert hausdorff_boundary_distance(prof, b, h / 10) <= math.sqrt(2) * h
    t = np.linspace(0.001, 0.6, 100)
    assert np.max(np.abs(prof.rho(t) - bubble_slice_radius(b, t))) <= h


def test_schwarz_l_shape():
    occ = np.zeros((4, 3), bool)
    occ[:, 0] = True
    occ[0, 1:] = True
    v = VoxelSet(occ, 0.5)
    prof = schwarz_symmetrize(v)
    assert measures(prof, P0).volume == pytest.approx(measures(v, P0).volume, rel=1e-14)
    assert energy(prof, P0) <= energy(v, P0)
    # per-row recentred intervals: half widths 1, 0.25, 0.25
    assert prof.rho(0.1) == pytest.approx(1.0) and prof.rho(0.6) == pytest.approx(0.25)


@given(voxel_sets(), lams)
def test_schwarz_monotone_2d(v, lam):
    p = CapillarityParams(lam, 2)
    prof = schwarz_symmetrize(v)
    assert measures(prof, p).volume == pytest.approx(measures(v, p).volume, rel=1e-12)
    assert energy(prof, p) <= energy(v, p) + 1e-12


@settings(max_examples=40)
@given(voxel_sets(3), lams)
def test_schwarz_monotone_3d(v, lam):
    p = CapillarityParams(lam, 3)
    prof = schwarz_symmetrize(v)
    assert measures(prof, p).volume == pytest.approx(measures(v, p).volume, rel=1e-12)
    assert energy(prof, p) <= energy(v, p) + 1e-12


def test_schwarz_empty():
    with pytest.raises(DomainError):
        schwarz_symmetrize(VoxelSet(np.zeros((2, 2), bool), 1.0))


# ---------------------------------------------------------------- reflection

def test_bisect_symmetric_input():
    occ = np.array([[1, 0], [1, 1], [1, 1], [1, 0]], bool)
    v = VoxelSet(occ, 1.0, (-2.0, 0.0))
    minus, plus = bisect_reflect(v, 0)
    for s in (minus, plus):
        assert np.array_equal(s.occupancy, occ) and s.is_uniform
        assert s.origin == pytest.approx(v.origin)


def test_bisect_square_cut_in_half():
    v = VoxelSet(np.ones((1, 1)), 1.0, (-0.5, 0.0))
    k, f, a = median_cut(v, 0)
    assert (k, f, a) == (0, 0.5, 0.0)
    for s in bisect_reflect(v, 0):
        m = measures(s, P0)
        assert (m.volume, m.rel_perimeter, m.wetted_area) == pytest.approx((1, 3, 1))
        assert s.edges(0) == pytest.approx([-0.5, 0.5])


def test_bisect_unequal_rectangles():
    # a 1 x 1 square and a 3 x 2 block with a gap, lambda = 0.3
    p = CapillarityParams(0.3, 2)
    occ = np.zeros((6, 2), bool)
    occ[0, 0] = True
    occ[3:6, :] = True
    v = VoxelSet(occ, 1.0)
    minus, plus = bisect_reflect(v, 0)
    d, dm, dp = deficit(v, p), deficit(minus, p), deficit(plus, p)
    a = median_cut(v, 0)[2]
    assert mirrored(minus, 0, a) and mirrored(plus, 0, a)
    for s in (minus, plus):
        assert measures(s, p).volume == pytest.approx(7.0)
    # hand count of the halves: volume split 3.5 / 3.5 at a = 4 + 1/4
    assert a == pytest.approx(4.25)
    assert dm <= 2 * d + 1e-12 and dp <= 2 * d + 1e-12
    assert dm + dp == pytest.approx(2 * d, rel=1e-12)


@given(voxel_sets(), lams)
def test_bisect_reflect_bound_2d(v, lam):
    p = CapillarityParams(lam, 2)
    d = deficit(v, p)
    a = median_cut(v, 0)[2]
    vol = measures(v, p).volume
    tot = 0.0
    for s in bisect_reflect(v, 0):
        assert mirrored(s, 0, a)
        assert measures(s, p).volume == pytest.approx(vol, rel=1e-12)
        ds = deficit(s, p)
        assert ds <= 2 * d + 1e-6
        tot += ds
    # halves of a set double their own perimeter, minus faces on the plane
    assert tot <= 2 * d + 1e-9


@settings(max_examples=30)
@given(voxel_sets(3), lams, st.sampled_from([0, 1]))
def test_bisect_reflect_bound_3d(v, lam, axis):
    p = CapillarityParams(lam, 3)
    d = deficit(v, p)
    for s in bisect_reflect(v, axis):
        assert deficit(s, p) <= 2 * d + 1e-6


def test_bisect_vertical_axis_refused():
    with pytest.raises(DomainError):
        bisect_reflect(TWO_SQUARES, 1)


def test_symmetrize_axes_3d():
    p = CapillarityParams(0.2, 3)
    v = random_voxel_set(np.random.default_rng(3), 3, h=1.0, max_side=5)
    out, steps = symmetrize_axes(v, p)
    assert len(steps) == 2
    assert mirrored(out, 0, steps[0].plane)
    assert mirrored(out, 1, steps[1].plane)
    assert deficit(out, p) <= 4 * max(deficit(v, p), 0) + 1e-6
    for s in steps:
        kept = s.alpha_minus if s.chosen == "minus" else s.alpha_plus
        assert s.meets_third == (kept >= s.alpha_parent / 3)


def test_four_reflections():
    p = CapillarityParams(0.0, 3)
    v = random_voxel_set(np.random.default_rng(7), 3, h=1.0, max_side=5)
    cands = four_reflections(v, p)
    assert len(cands) == 4
    alphas = [c[3] for c in cands]
    assert alphas == sorted(alphas, reverse=True)
    d = deficit(v, p)
    assert all(deficit(c[2], p) <= 2 * d + 1e-6 for c in cands)
    with pytest.raises(DomainError):
        four_reflections(TWO_SQUARES, P0)


# ---------------------------------------------------------------- truncation

def test_gate_values():
    assert small_deficit_gate(2) == pytest.approx((math.sqrt(2) - 1) / 4)
    assert small_deficit_gate(3) == pytest.approx((2 ** (1 / 3) - 1) / 4)


def test_truncate_bubble_noop():
    for lam in (-0.3, 0.0, 0.6):
        p = CapillarityParams(lam, 2)
        prof = normalize(bubble_profile(Bubble(p, p.cap_volume)), p)
        out, rec = truncate_and_rescale(prof, p)
        assert rec.noop and rec.sigma == 1.0
        assert out is prof


def _with_blob(params, frac):
    # square blob of area frac |B| well above the bubble (n = 2)
    b = Bubble(params, params.cap_volume)
    prof = bubble_profile(b, 4096)
    t0 = b.top + 1.0
    w = math.sqrt(frac * params.cap_volume) / 2
    hgt = 2 * w
    t = np.concatenate([prof.heights, [t0, t0, t0 + hgt, t0 + hgt]])
    r = np.concatenate([prof.radii, [0.0, w, w, 0.0]])
    return normalize(ProfileSet(t, r), params)


def test_truncate_removes_remote_blob():
    frac = 0.001
    e = _with_blob(P0, frac)
    vol = measures(e, P0).volume
    out, rec = truncate_and_rescale(e, P0)
    assert not rec.noop
    removed = rec.axes[0]["removed_volume"]
    blob = frac / (1 + frac) * vol
    assert removed >= blob * (1 - 1e-9)
    # exact bookkeeping of the rescale
    assert rec.sigma ** 2 == pytest.approx(vol / (vol - removed), rel=1e-12)
    # the cut also shaves the bubble top, so the textbook value is approximate
    assert rec.sigma ** 2 == pytest.approx(1 / (1 - frac), rel=1e-3)
    assert out.top < e.top / 2
    assert rec.post_volume == pytest.approx(P0.cap_volume, rel=1e-12)
    assert rec.post_deficit < rec.pre_deficit


def test_truncate_clips_spike():
    # thin needle of radius 0.01 on the apex of a 3-d bubble, reaching height 2
    p = CapillarityParams(0.0, 3)
    b = Bubble(p, p.cap_volume)
    prof = bubble_profile(b, 4096)
    keep = prof.radii > 0.01
    tk = float(np.interp(0.01, prof.radii[::-1], prof.heights[::-1]))
    t = np.concatenate([prof.heights[keep], [tk, 2.0, 2.0]])
    r = np.concatenate([prof.radii[keep], [0.01, 0.01, 0.0]])
    spike = normalize(ProfileSet(t, r), p)
    assert deficit(spike, p) < small_deficit_gate(3)
    out, rec = truncate_and_rescale(spike, p)
    assert rec.axes[0]["tau2"] >= rec.axes[0]["t2"]
    assert out.top < spike.top * 0.6


def test_truncate_preconditions():
    with pytest.raises(PreconditionError):
        truncate_and_rescale(CONE, P0)
    big = normalize(TWO_SQUARES, P0)
    with pytest.raises(PreconditionError, match="gate"):
        truncate_and_rescale(big, P0)


def test_truncate_voxel_blob_bypass():
    # the best 2:1 rectangle plus a remote cell; staircases sit above the gate
    occ = np.zeros((60, 24), bool)
    occ[0:40, 0:20] = True
    occ[55, 22] = True
    v = normalize(VoxelSet(occ, 1.0), P0)
    with pytest.raises(PreconditionError):
        truncate_and_rescale(v, P0)
    out, rec = truncate_and_rescale(v, P0, enforce_gate=False)
    assert any("bypassed" in n for n in rec.notes)
    assert measures(out, P0).volume == pytest.approx(P0.cap_volume, rel=1e-12)
    assert out.occupancy.sum() == 800
    assert rec.post_deficit <= rec.pre_deficit


# ---------------------------------------------------------------- pipeline

def test_pipeline_bubble_identity():
    p = CapillarityParams(0.5, 2)
    res = reduction_pipeline(bubble_profile(Bubble(p, 1.0)), p)
    st_ = {r.stage: r for r in res["stages"]}
    assert list(st_) == ["input", "normalized", "truncated", "final"]
    for r in res["stages"]:
        assert abs(r.deficit) < 1e-6
    assert res["truncation"].noop


def test_pipeline_two_squares():
    res = reduction_pipeline(TWO_SQUARES, P0)
    st_ = {r.stage: r for r in res["stages"]}
    assert st_["schwarz"].p_lambda < st_["reflected"].p_lambda
    assert "gate" in res["refusal"]
    assert st_["final"].volume == pytest.approx(P0.cap_volume)
    with pytest.raises(PreconditionError):
        reduction_pipeline(TWO_SQUARES, P0, truncate="require")
    with pytest.raises(DomainError):
        reduction_pipeline(TWO_SQUARES, P0, truncate="sometimes")
