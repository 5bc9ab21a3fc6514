"""Digamma and log-gamma for strictly positive arguments.

Both functions use upward recurrence to push the argument into the range
where a truncated Stirling-type asymptotic series is accurate:

    psi(x)      = psi(x + 1) - 1/x
    log_gamma(x) = log_gamma(x + 1) - log(x)

The series are truncated so that the remaining term is below ~2e-13 at the
recurrence thresholds (x >= 6 for digamma, x >= 10 for log-gamma) and far
below that for larger arguments.  Absolute accuracy is 1e-12 or better
wherever the result itself is representable to that accuracy in float64;
for |result| above ~1e4 the unit of last place exceeds 1e-12 and accuracy
is a few ulp instead.

Scalar inputs return a ``float``; array inputs return an ``ndarray`` of the
same shape.
"""

from __future__ import annotations

import numpy as np

_HALF_LOG_TWO_PI = 0.9189385332046727


def _validated(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.size and not np.all(arr > 0.0):
        raise ValueError(f"{name} is defined for strictly positive arguments only")
    return arr


def digamma(x):
    """psi(x) = d/dx log Gamma(x) for x > 0."""
    arr = _validated(x, "digamma")
    z = np.array(arr, copy=True)
    acc = np.zeros_like(z)
    # at most six recurrence steps are needed to reach z >= 6
    for _ in range(6):
        small = z < 6.0
        if not small.any():
            break
        acc[small] -= 1.0 / z[small]
        z[small] += 1.0
    inv = 1.0 / z
    inv2 = inv * inv
    tail = inv2 * (
        1.0 / 12.0
        - inv2 * (
            1.0 / 120.0
            - inv2 * (
                1.0 / 252.0
                - inv2 * (
                    1.0 / 240.0
                    - inv2 * (
                        1.0 / 132.0
                        - inv2 * (691.0 / 32760.0 - inv2 / 12.0)
                    )
                )
            )
        )
    )
    out = acc + np.log(z) - 0.5 * inv - tail
    if np.ndim(x) == 0:
        return float(out)
    return out


def log_gamma(x):
    """log Gamma(x) for x > 0, without forming Gamma(x) itself."""
    arr = _validated(x, "log_gamma")
    z = np.array(arr, copy=True)
    acc = np.zeros_like(z)
    for _ in range(10):
        small = z < 10.0
        if not small.any():
            break
        acc[small] -= np.log(z[small])
        z[small] += 1.0
    inv = 1.0 / z
    inv2 = inv * inv
    series = inv * (
        1.0 / 12.0
        - inv2 * (
            1.0 / 360.0
            - inv2 * (
                1.0 / 1260.0
                - inv2 * (
                    1.0 / 1680.0
                    - inv2 * (
                        1.0 / 1188.0
                        - inv2 * (691.0 / 360360.0 - inv2 / 156.0)
                    )
                )
            )
        )
    )
    out = acc + (z - 0.5) * np.log(z) - z + _HALF_LOG_TWO_PI + series
    if np.ndim(x) == 0:
        return float(out)
    return out
