"""
Landmark correspondence by forward argmax and by bidirectional matching.

Bidirectional matching takes the top-k forward candidates on the query, matches each back
onto the template, and keeps the candidate whose back-match lands closest to the known
template landmark. Ties resolve by distance, then higher forward similarity, then
row-major order of the candidate.
"""
from typing import List

import torch

from oneshot_landmarks.core import euclidean_dist
from oneshot_landmarks.errors import MatchingError
from oneshot_landmarks.models.geometry import GridIndex
from oneshot_landmarks.models.grids import FeatureMap, SimilarityMap
from oneshot_landmarks.models.results import MatchResult
from oneshot_landmarks.models.specs import MatchConfig
from oneshot_landmarks.simloss import cosine_similarity_map
from oneshot_landmarks.utils.logger import Logger

logger = Logger(__name__)


def _ranked(values: torch.Tensor) -> torch.Tensor:
    """Flat indices by descending value, equal values in row-major order."""
    return torch.sort(values.reshape(-1), descending=True, stable=True).indices


def top_k_candidates(s: SimilarityMap, k: int, clamp: bool = False) -> List[GridIndex]:
    """
    The k highest-valued cells of a similarity map.

    Args:
        s: Similarity map
        k: Number of candidates
        clamp: Reduce k to the cell count instead of failing

    Returns:
        Cells ordered by descending value, then row-major

    Raises:
        MatchingError: ``k-too-large`` when k exceeds the cell count and clamp is off
    """
    h, w = s.shape
    if k > h * w:
        if not clamp:
            raise MatchingError("k-too-large", f"k={k} exceeds the {h}x{w} grid")
        logger.warning(f"Clamping k={k} to the {h * w} cells of a {h}x{w} grid")
        k = h * w
    order = _ranked(s.values)[:k].tolist()
    return [GridIndex(i // w, i % w) for i in order]


def argmax_match(f_q: FeatureMap, anchor: torch.Tensor) -> GridIndex:
    """
    Query cell with the highest cosine similarity to an anchor, first in row-major order on ties.

    Raises:
        SimilarityError: ``zero-anchor``
    """
    return top_k_candidates(cosine_similarity_map(f_q, anchor), 1)[0]


def inverse_match(f_t: FeatureMap, query_feature: torch.Tensor) -> GridIndex:
    """Template cell best matching a query descriptor."""
    return argmax_match(f_t, query_feature)


def bdm_match(f_t: FeatureMap, f_q: FeatureMap, p_t: GridIndex, cfg: MatchConfig) -> MatchResult:
    """
    Bidirectional matching of one template landmark onto a query.

    Args:
        f_t: Template feature map
        f_q: Query feature map
        p_t: Template landmark cell on f_t
        cfg: Matching parameters

    Returns:
        The selected (query, template) pair with candidates and diagnostics

    Raises:
        MatchingError: ``point-out-of-bounds``, ``dim-mismatch`` or ``k-too-large``
    """
    if not (0 <= p_t.row < f_t.grid_h and 0 <= p_t.col < f_t.grid_w):
        raise MatchingError(
            "point-out-of-bounds",
            f"landmark cell {tuple(p_t)} lies outside the {f_t.grid_h}x{f_t.grid_w} template grid",
        )
    if f_t.dim != f_q.dim:
        raise MatchingError("dim-mismatch", f"template has {f_t.dim} channels, query has {f_q.dim}")

    forward = cosine_similarity_map(f_q, f_t.vector_at(p_t))
    candidates = top_k_candidates(forward, cfg.k, clamp=cfg.clamp_k)
    target = p_t.as_point()

    pairs = []
    best = None
    for c_q in candidates:
        c_t = inverse_match(f_t, f_q.vector_at(c_q))
        pairs.append((c_q, c_t))
        dist = euclidean_dist(c_t.as_point(), target)
        similarity = float(forward.values[c_q.row, c_q.col])
        key = (dist, -similarity, c_q.row, c_q.col)
        if best is None or key < best[0]:
            best = (key, c_q, c_t)

    (dist, neg_similarity, _, _), c_q, c_t = best
    return MatchResult(
        query_point=c_q,
        template_point=c_t,
        candidates=candidates,
        pairs=pairs,
        inverse_error=dist,
        forward_similarity=-neg_similarity,
    )
