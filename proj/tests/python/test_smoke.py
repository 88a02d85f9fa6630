"""Smoke tests for the python bindings: numpy round trips, the main
operations end to end, and error mapping."""

import numpy as np
import pytest

import mamreg


def test_image_numpy_round_trip():
    arr = np.random.default_rng(1).random((20, 30))
    img = mamreg.Image(arr, spacing_x=0.5, spacing_y=0.25)
    assert img.width == 30
    assert img.height == 20
    assert img.spacing_x == 0.5
    np.testing.assert_array_equal(img.array, arr)


def test_pgm_round_trip(tmp_path):
    arr = np.random.default_rng(2).random((16, 12))
    img = mamreg.Image(arr, spacing_x=0.1, spacing_y=0.2)
    path = str(tmp_path / "img.pgm")
    mamreg.save_pgm(img, path, bit_depth=16)
    back = mamreg.load_pgm(path)
    assert back.spacing_x == pytest.approx(0.1)
    assert np.max(np.abs(back.array - arr)) <= 0.5 / 65535 + 1e-12


def test_phantom_segmentation():
    img = mamreg.make_breast_phantom("RCC", 96, 64, 1.0, seed=7)
    mask = mamreg.segment_breast(img)
    assert 0.15 * 96 * 64 < mask.count() < 0.9 * 96 * 64


def test_metrics_identity():
    arr = np.random.default_rng(3).random((12, 12))
    img = mamreg.Image(arr, 1.0, 1.0)
    mask = mamreg.Mask(np.ones((12, 12), dtype=bool))
    assert mamreg.ssd(img, img, mask) == 0.0
    assert mamreg.correlation(img, img, mask) == pytest.approx(1.0)
    report = mamreg.metrics(img, img, mask, bins=16)
    assert report["mi"] == pytest.approx(report["mi"])
    assert report["n_pixels"] == 144


def test_demons_recovers_translation():
    fixed = mamreg.make_breast_phantom("RCC", 96, 64, 1.0, seed=9)
    moving = mamreg.apply_affine(fixed, translation_mm=(-3.0, 0.0))
    mask = mamreg.segment_breast(fixed)
    field, info = mamreg.register_demons(
        fixed, moving, mask, working_width=96, working_height=64
    )
    warped = mamreg.warp(moving, field)
    assert mamreg.ssd(fixed, warped, mask) < 0.3 * mamreg.ssd(fixed, moving, mask)
    assert info["iterations"] >= 1
    assert field.array.shape == (64, 96, 2)


def test_bspline_improves_mi():
    fixed = mamreg.make_breast_phantom("RCC", 96, 64, 1.0, seed=11)
    moving = mamreg.apply_affine(fixed, matrix=(0.96, 0.0, 0.0, 1.0))
    mask = mamreg.segment_breast(fixed)
    grid, info = mamreg.register_bspline(
        fixed,
        moving,
        mask,
        levels=2,
        grid_schedule=[(4, 4), (6, 5)],
        max_iterations_per_level=15,
        mi_bins=32,
        working_width=96,
        working_height=64,
    )
    field = grid.to_field(96, 64, 1.0, 1.0)
    warped = mamreg.warp(moving, field)
    pre = mamreg.mutual_information(fixed, moving, mask)
    post = mamreg.mutual_information(fixed, warped, mask)
    assert post > pre
    assert info["levels"][0]["width"] == 48


def test_error_mapping(tmp_path):
    with pytest.raises(mamreg.IoError):
        mamreg.load_pgm(str(tmp_path / "missing.pgm"))
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P6\n1 1\n255\n\x00")
    with pytest.raises(mamreg.FormatError):
        mamreg.load_pgm(str(bad))
