"""
Tests for forward and bidirectional matching.
"""
import math
import time

import numpy as np
import pytest
import torch

from oneshot_landmarks.errors import MatchingError, SimilarityError
from oneshot_landmarks.matching import argmax_match, bdm_match, inverse_match, top_k_candidates
from oneshot_landmarks.models.geometry import GridIndex
from oneshot_landmarks.models.grids import FeatureMap, SimilarityMap
from oneshot_landmarks.models.specs import MatchConfig


def _random_map(rng: np.random.Generator, dim: int, h: int, w: int) -> FeatureMap:
    # small integer levels make ties frequent; the 0.5 shift keeps every vector non-zero
    values = rng.integers(-2, 2, size=(dim, h, w)).astype(np.float64) + 0.5
    return FeatureMap(data=torch.from_numpy(values))


def _angle_map(degrees) -> FeatureMap:
    """2-D unit descriptors at the given angles, laid out as a square grid."""
    radians = np.radians(np.asarray(degrees, dtype=np.float64))
    side = int(math.isqrt(radians.size))
    values = np.stack([np.cos(radians), np.sin(radians)]).reshape(2, side, side)
    return FeatureMap(data=torch.from_numpy(values))


def _cosine(f: FeatureMap, anchor: torch.Tensor) -> list:
    data = f.data.numpy()
    a = anchor.numpy()
    dots = np.einsum("chw,c->hw", data, a)
    norms = np.sqrt((data * data).sum(axis=0)) * np.sqrt((a * a).sum())
    return np.clip(dots / norms, -1.0, 1.0).tolist()


def _brute_force(f_t: FeatureMap, f_q: FeatureMap, p_t: GridIndex, k: int):
    """Enumerate the selection rule directly over all cells."""
    forward = _cosine(f_q, f_t.vector_at(p_t))
    cells = [GridIndex(r, c) for r in range(f_q.grid_h) for c in range(f_q.grid_w)]
    candidates = sorted(cells, key=lambda c: (-forward[c.row][c.col], c.row, c.col))[:k]

    template_cells = [GridIndex(r, c) for r in range(f_t.grid_h) for c in range(f_t.grid_w)]
    best = None
    for c_q in candidates:
        back = _cosine(f_t, f_q.vector_at(c_q))
        c_t = min(template_cells, key=lambda c: (-back[c.row][c.col], c.row, c.col))
        dist = math.hypot(c_t.col - p_t.col, c_t.row - p_t.row)
        key = (dist, -forward[c_q.row][c_q.col], c_q.row, c_q.col)
        if best is None or key < best[0]:
            best = (key, c_q, c_t)
    return candidates, best[1], best[2], best[0][0]


class TestTopK:
    """Candidate ranking."""

    def test_ties_resolve_row_major(self):
        s = SimilarityMap(values=torch.tensor([[0.5, 0.9], [0.9, 0.1]]))
        assert top_k_candidates(s, 3) == [GridIndex(0, 1), GridIndex(1, 0), GridIndex(0, 0)]

    def test_k_too_large(self):
        s = SimilarityMap(values=torch.zeros(2, 2))
        with pytest.raises(MatchingError) as exc_info:
            top_k_candidates(s, 5)
        assert exc_info.value.code == "k-too-large"

    def test_k_clamped_when_requested(self):
        s = SimilarityMap(values=torch.zeros(2, 2))
        assert len(top_k_candidates(s, 5, clamp=True)) == 4


class TestBidirectionalMatching:
    """Bidirectional matching against a brute-force enumeration."""

    def test_matches_brute_force_on_random_fixtures(self):
        rng = np.random.default_rng(2024)
        start = time.perf_counter()
        for _ in range(1000):
            dim = int(rng.integers(1, 9))
            h_t, w_t = int(rng.integers(1, 17)), int(rng.integers(1, 17))
            h_q, w_q = int(rng.integers(1, 17)), int(rng.integers(1, 17))
            k = int(rng.choice([1, 2, 3, 5]))
            if k > h_q * w_q:
                k = h_q * w_q
            f_t = _random_map(rng, dim, h_t, w_t)
            f_q = _random_map(rng, dim, h_q, w_q)
            p_t = GridIndex(int(rng.integers(0, h_t)), int(rng.integers(0, w_t)))

            result = bdm_match(f_t, f_q, p_t, MatchConfig(k=k))
            candidates, c_q, c_t, dist = _brute_force(f_t, f_q, p_t, k)
            assert result.candidates == candidates
            assert result.query_point == c_q
            assert result.template_point == c_t
            assert result.inverse_error == dist
        assert time.perf_counter() - start < 30.0

    def test_k1_equals_argmax(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            dim = int(rng.integers(1, 9))
            h, w = int(rng.integers(1, 17)), int(rng.integers(1, 17))
            f_t = _random_map(rng, dim, h, w)
            f_q = _random_map(rng, dim, int(rng.integers(1, 17)), int(rng.integers(1, 17)))
            p_t = GridIndex(int(rng.integers(0, h)), int(rng.integers(0, w)))
            result = bdm_match(f_t, f_q, p_t, MatchConfig(k=1))
            assert result.query_point == argmax_match(f_q, f_t.vector_at(p_t))

    def test_prefers_candidate_that_matches_back(self):
        # Template (0, 2) at 12 degrees duplicates the landmark patch at 0 degrees. Query (0, 1)
        # at 7 degrees wins forward but matches back to the duplicate; query (1, 1) at -8
        # degrees comes second and matches back home.
        f_t = _angle_map([0, 60, 12, 120, 180, 240, 300, 90, 150])
        f_q = _angle_map([200, 7, 100, 250, -8, 130, 170, 280, 45])
        p_t = GridIndex(0, 0)
        assert argmax_match(f_q, f_t.vector_at(p_t)) == GridIndex(0, 1)
        assert inverse_match(f_t, f_q.vector_at(GridIndex(0, 1))) == GridIndex(0, 2)

        result = bdm_match(f_t, f_q, p_t, MatchConfig(k=2))
        assert result.candidates == [GridIndex(0, 1), GridIndex(1, 1)]
        assert result.query_point == GridIndex(1, 1)
        assert result.template_point == GridIndex(0, 0)
        assert result.inverse_error == 0.0
        assert result.pairs[0] == (GridIndex(0, 1), GridIndex(0, 2))
        assert _brute_force(f_t, f_q, p_t, 2) == (result.candidates, GridIndex(1, 1), GridIndex(0, 0), 0.0)

        forward_only = bdm_match(f_t, f_q, p_t, MatchConfig(k=1))
        assert forward_only.query_point == GridIndex(0, 1)
        assert forward_only.inverse_error == 2.0

    def test_point_out_of_bounds(self):
        f = FeatureMap(data=torch.ones(2, 3, 3))
        with pytest.raises(MatchingError) as exc_info:
            bdm_match(f, f, GridIndex(3, 0), MatchConfig(k=1))
        assert exc_info.value.code == "point-out-of-bounds"

    def test_dim_mismatch(self):
        with pytest.raises(MatchingError) as exc_info:
            bdm_match(FeatureMap(data=torch.ones(2, 3, 3)), FeatureMap(data=torch.ones(3, 3, 3)),
                      GridIndex(0, 0), MatchConfig(k=1))
        assert exc_info.value.code == "dim-mismatch"

    def test_zero_anchor(self):
        data = torch.ones(2, 3, 3)
        data[:, 1, 1] = 0.0
        f = FeatureMap(data=data)
        with pytest.raises(SimilarityError) as exc_info:
            bdm_match(f, f, GridIndex(1, 1), MatchConfig(k=1))
        assert exc_info.value.code == "zero-anchor"
