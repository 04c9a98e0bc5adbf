import numpy as np
import pytest

import bsda


def square(size=9, lo=2, hi=7):
    m = np.zeros((size, size), dtype=np.uint8)
    m[lo:hi, lo:hi] = 1
    return m


def brute_edt(mask):
    pts = np.argwhere(mask)
    rr, cc = np.indices(mask.shape)
    d = np.sqrt((rr[..., None] - pts[:, 0]) ** 2 + (cc[..., None] - pts[:, 1]) ** 2)
    return d.min(axis=-1)


def test_edt_matches_numpy_oracle():
    rng = np.random.default_rng(0)
    for _ in range(10):
        m = (rng.random((12, 15)) < 0.2).astype(np.uint8)
        m[0, 0] = 1
        np.testing.assert_allclose(bsda.edt(m), brute_edt(m), atol=1e-12)


def test_sdm_signs_and_normalisation():
    m = square()
    sdm = bsda.compute_sdm(m)
    assert sdm.shape == m.shape
    assert sdm[4, 4] < 0 and sdm[0, 0] > 0 and sdm[2, 2] == 0
    np.testing.assert_allclose(sdm, bsda.brute_force_sdm(m), atol=1e-9)
    n = bsda.normalize_sdm(sdm)
    assert n.min() == -1.0 and n.max() == 1.0


def test_heatmap_range_and_heatsum_identity():
    h = bsda.boundary_heatmap(square())
    assert h.max() == 1.0 and h.min() >= 0.0
    a = np.array([[0.3, 0.9]])
    np.testing.assert_array_equal(bsda.heatsum([a, np.zeros_like(a)]), a)
    assert bsda.heatsum([np.array([[0.5]]), np.array([[0.5]])])[0, 0] == 0.75


def test_metrics():
    a = square()
    dice, jac = bsda.dice_jaccard(a, a)
    assert dice == 100.0 and jac == 100.0
    b = np.roll(a, 1, axis=1)
    s = bsda.score(a, b)
    d = s["dice"] / 100.0
    assert s["jaccard"] / 100.0 == pytest.approx(d / (2 - d), abs=1e-9)
    assert s["hd95"] == 1.0
    pg, gp = bsda.surface_distances(a, b)
    assert len(pg) == len(gp) == 16
    assert bsda.score(np.zeros((4, 4)), a[:4, :4])["asd"] is None


def test_synthetic_sample_is_deterministic():
    img1, m1 = bsda.synthetic_sample("reduced", seed=3)
    img2, m2 = bsda.synthetic_sample("reduced", seed=3)
    assert img1.shape == (64, 64) and m1.dtype == bool
    np.testing.assert_array_equal(img1, img2)
    np.testing.assert_array_equal(m1, m2)
    assert 0 < m1.sum() < m1.size


def test_errors_become_python_exceptions():
    with pytest.raises(bsda.BsdaError, match="EmptyForeground"):
        bsda.compute_sdm(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        bsda.boundary_heatmap(square(), sigma=0.0)
    with pytest.raises(bsda.BsdaError):
        bsda.synthetic_sample("oval")
