"""Relative error metrics on the u-field."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

# references below this Euclidean u-norm are treated as the trivial state
ZERO_REFERENCE = 1e-8


class Errors(NamedTuple):
    l2: float
    linf: float
    absolute: bool  # reference numerically zero, errors are plain norms


def relative_errors(approx: np.ndarray, reference: np.ndarray, *, full_state: bool = False) -> Errors:
    """Relative discrete L2 and max-norm errors over the u-block (or the whole state)."""
    approx = np.asarray(approx, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if approx.shape != reference.shape:
        raise ValueError(f"shape mismatch {approx.shape} vs {reference.shape}")
    n = reference.shape[-1] if full_state else reference.shape[-1] // 2
    diff = approx[:n] - reference[:n]
    ref = reference[:n]
    e2, einf = np.linalg.norm(diff), np.max(np.abs(diff))
    r2, rinf = np.linalg.norm(ref), np.max(np.abs(ref))
    if r2 <= ZERO_REFERENCE:
        return Errors(float(e2), float(einf), True)
    return Errors(float(e2 / r2), float(einf / rinf), False)
