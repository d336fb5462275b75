"""Feature-space discretization: threshold grids and bin lookup.

A grid stores, per feature, an ascending array of finite thresholds; a
feature with m finite thresholds has m+1 bins (the trailing +inf bound
is implicit).  Bins are right-closed: bin 0 is (-inf, t_0], bin k is
(t_{k-1}, t_k], and the last bin is (t_last, +inf).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class ThresholdGrid:
    thresholds: tuple[np.ndarray, ...]

    def __post_init__(self):
        cleaned = []
        for a, th in enumerate(self.thresholds):
            th = np.asarray(th, dtype=np.float64)
            if th.ndim != 1:
                raise ConfigError(f"thresholds for feature {a} must be a 1-D array")
            if th.size and not np.isfinite(th).all():
                raise ConfigError(f"thresholds for feature {a} must be finite")
            if th.size > 1 and not np.all(np.diff(th) > 0):
                raise ConfigError(f"thresholds for feature {a} must be strictly ascending")
            cleaned.append(th)
        object.__setattr__(self, "thresholds", tuple(cleaned))

    @property
    def d(self) -> int:
        return len(self.thresholds)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(th.size + 1 for th in self.thresholds)


def bin_index(grid: ThresholdGrid, x) -> tuple[int, ...]:
    """Map one feature vector to its grid cell (binary search per feature)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (grid.d,):
        raise DataError(f"feature vector of length {x.shape} for a {grid.d}-feature grid")
    if not np.isfinite(x).all():
        raise DataError("feature vector contains NaN or infinite entries")
    return tuple(
        int(np.searchsorted(th, xi, side="left")) for th, xi in zip(grid.thresholds, x)
    )


def bin_indices(grid: ThresholdGrid, x: np.ndarray) -> np.ndarray:
    """Vectorized `bin_index` over the rows of a data matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != grid.d:
        raise DataError(f"data matrix of shape {x.shape} for a {grid.d}-feature grid")
    if not np.isfinite(x).all():
        raise DataError("data matrix contains NaN or infinite entries")
    out = np.empty(x.shape, dtype=np.int64)
    for a, th in enumerate(grid.thresholds):
        out[:, a] = np.searchsorted(th, x[:, a], side="left")
    return out


def _useful(th: np.ndarray, col: np.ndarray) -> np.ndarray:
    """Drop thresholds that do not separate any data."""
    if th.size == 0:
        return th
    lo, hi = col.min(), col.max()
    return th[(th >= lo) & (th < hi)]


def quantile_thresholds(x: np.ndarray, n_per_feature: int) -> ThresholdGrid:
    """Thresholds at empirical quantiles k/n so the bins hold roughly
    equal numbers of training points.

    Quantiles use midpoint interpolation between order statistics.
    Duplicates (from ties in the data) are removed, so a feature may end
    up with fewer bins than requested.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise DataError("cannot build a grid from empty data")
    if n_per_feature < 1:
        raise ConfigError("need at least one bin per feature")
    grids = []
    qs = np.arange(1, n_per_feature) / n_per_feature
    for a in range(x.shape[1]):
        col = x[:, a]
        if qs.size == 0:
            grids.append(np.empty(0))
            continue
        th = np.unique(np.quantile(col, qs, method="midpoint"))
        grids.append(_useful(th, col))
    return ThresholdGrid(tuple(grids))


def _kmeans_1d(col: np.ndarray, k: int, rng: np.random.Generator,
               max_iter: int = 100, tol: float = 1e-8) -> np.ndarray:
    """Plain 1-D k-means with k-means++ seeding; returns sorted centroids."""
    uniq = np.unique(col)
    k = min(k, uniq.size)
    if k <= 1:
        return np.array([col.mean()])
    # k-means++ on the unique values
    centers = [uniq[rng.integers(uniq.size)]]
    for _ in range(k - 1):
        d2 = np.min((uniq[:, None] - np.array(centers)[None, :]) ** 2, axis=1)
        total = d2.sum()
        if total == 0:
            centers.append(uniq[rng.integers(uniq.size)])
            continue
        centers.append(uniq[np.searchsorted(np.cumsum(d2 / total), rng.random())])
    centers = np.sort(np.array(centers, dtype=np.float64))
    for _ in range(max_iter):
        # assign by nearest boundary between sorted centers
        bounds = (centers[:-1] + centers[1:]) / 2
        lab = np.searchsorted(bounds, col, side="left")
        new = centers.copy()
        for j in range(k):
            sel = col[lab == j]
            if sel.size:
                new[j] = sel.mean()
        new = np.sort(new)
        if np.max(np.abs(new - centers)) <= tol:
            centers = new
            break
        centers = new
    return np.unique(centers)


def kmeans_thresholds(x: np.ndarray, n_per_feature: int, seed: int) -> ThresholdGrid:
    """One-dimensional k-means clustering per feature; thresholds are the
    midpoints between adjacent sorted centroids."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise DataError("cannot build a grid from empty data")
    if n_per_feature < 1:
        raise ConfigError("need at least one bin per feature")
    grids = []
    for a in range(x.shape[1]):
        col = x[:, a]
        rng = np.random.default_rng([seed, a])
        centers = _kmeans_1d(col, n_per_feature, rng)
        th = (centers[:-1] + centers[1:]) / 2 if centers.size > 1 else np.empty(0)
        grids.append(_useful(np.unique(th), col))
    return ThresholdGrid(tuple(grids))


def tree_thresholds(model, max_per_feature: int | None = None,
                    n_features: int | None = None) -> ThresholdGrid:
    """Grid from the split boundaries of a fitted tree model.

    The union of split thresholds per feature is deduplicated; when it
    exceeds `max_per_feature` it is thinned by rank selection over the
    threshold multiset (so the kept thresholds are actual split values).
    """
    try:
        per_feature = model.split_points()
    except AttributeError:
        raise ConfigError("model does not expose split points; is it a fitted tree model?")
    if n_features is None:
        n_features = getattr(model, "n_features", len(per_feature))
    grids = []
    for a in range(n_features):
        multiset = np.sort(np.asarray(per_feature.get(a, ()), dtype=np.float64))
        th = np.unique(multiset)
        if max_per_feature is not None and th.size > max_per_feature:
            picks = np.round(
                (np.arange(max_per_feature) + 0.5) * multiset.size / max_per_feature - 0.5
            ).astype(int)
            sel = np.unique(multiset[picks])
            if sel.size < max_per_feature:
                # rank picks collided on repeated split values; top up with
                # the most frequent thresholds not selected yet
                counts = {v: int(np.sum(multiset == v)) for v in th}
                rest = sorted(
                    (v for v in th if v not in set(sel)),
                    key=lambda v: (-counts[v], v),
                )
                extra = rest[: max_per_feature - sel.size]
                sel = np.unique(np.concatenate([sel, extra]))
            th = sel
        grids.append(th)
    return ThresholdGrid(tuple(grids))
