"""Input coercion and checking for the estimator API.

The estimators accept images in any of the usual layouts and normalize
them to the (N, 1, H, W) float32 stack the networks consume.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, ValidationError


def as_image_batch(X, image_size: int) -> np.ndarray:
    """Coerce to (N, 1, side, side) float32.

    Accepts flat rows (N, side*side), grayscale stacks (N, side, side),
    or channeled stacks (N, 1, side, side).
    """
    arr = np.asarray(X, dtype=np.float32)
    side = int(image_size)
    if arr.ndim == 2:
        if arr.shape[1] != side * side:
            raise ShapeError(
                f"flat rows must have {side * side} features for {side}x{side} images, got {arr.shape[1]}"
            )
        arr = arr.reshape(arr.shape[0], 1, side, side)
    elif arr.ndim == 3:
        arr = arr[:, None]
    elif arr.ndim != 4:
        raise ShapeError(f"expected 2-4 dimensional image input, got shape {arr.shape}")
    if arr.shape[1:] != (1, side, side):
        raise ShapeError(f"expected images of shape (1, {side}, {side}), got {arr.shape[1:]}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("image input contains non-finite values")
    return arr


def encode_labels(y) -> tuple[np.ndarray, np.ndarray]:
    """(classes, integer-encoded labels) for an arbitrary label vector."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ShapeError(f"labels must be one-dimensional, got shape {y.shape}")
    classes, encoded = np.unique(y, return_inverse=True)
    if len(classes) < 2:
        raise ValidationError(f"need at least 2 classes, got {len(classes)}")
    return classes, encoded.astype(np.int64)


def stratified_holdout(labels: np.ndarray, fraction: float, rng: np.random.Generator):
    """(fit indices, holdout indices) with per-class proportions preserved.

    Every class keeps at least one sample on each side when it has two or
    more members.
    """
    if not 0.0 < fraction < 1.0:
        raise ValidationError(f"holdout fraction must be in (0, 1), got {fraction}")
    fit_idx: list[int] = []
    hold_idx: list[int] = []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(len(members))]
        n_hold = int(round(fraction * len(members)))
        if len(members) >= 2:
            n_hold = min(max(n_hold, 1), len(members) - 1)
        else:
            n_hold = 0
        hold_idx.extend(members[:n_hold])
        fit_idx.extend(members[n_hold:])
    return np.array(sorted(fit_idx)), np.array(sorted(hold_idx))
