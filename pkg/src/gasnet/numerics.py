"""Small dense linear algebra and order statistics used by the trainer and sweep harness.

All routines are pure functions over float64 numpy arrays: identical inputs
give bit-identical outputs, so they are safe to call from parallel workers.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class DimensionMismatch(ValueError):
    """Array shapes are inconsistent with the requested operation."""


class NotPositiveDefinite(ArithmeticError):
    """Factorization hit a non-positive pivot; the caller owns the remedy
    (the LM loop raises its damping factor and retries)."""


class EmptyData(ValueError):
    """Statistic requested on an empty sequence."""


class QOutOfRange(ValueError):
    """Quantile fraction outside [0, 1]."""


SYMMETRY_TOL = 1e-9

_MASK64 = (1 << 64) - 1


def solve_spd(A, b):
    """Solve A x = b for symmetric positive-definite A via Cholesky.

    Args:
        A: (n, n) symmetric matrix (|A_ij - A_ji| <= 1e-9 required).
        b: (n,) right-hand side.

    Raises:
        DimensionMismatch: A not square or b length wrong.
        NotPositiveDefinite: A has a non-positive pivot.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {A.shape}")
    if b.ndim != 1 or b.shape[0] != A.shape[0]:
        raise DimensionMismatch(
            f"rhs length {b.shape} does not match matrix of order {A.shape[0]}"
        )
    if A.size and np.max(np.abs(A - A.T)) > SYMMETRY_TOL:
        raise ValueError("matrix is not symmetric within 1e-9")
    try:
        c, low = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    return scipy.linalg.cho_solve((c, low), b, check_finite=False)


def quantile(data, q):
    """Linear-interpolation quantile of a nonempty sequence.

    With sorted data d of length n and h = (n-1)*q, returns
    d[floor(h)] + (h - floor(h)) * (d[floor(h)+1] - d[floor(h)]).
    """
    data = np.asarray(data, dtype=np.float64)
    if data.size == 0:
        raise EmptyData("quantile of empty data")
    if not 0.0 <= q <= 1.0:
        raise QOutOfRange(f"q={q} outside [0, 1]")
    return float(np.quantile(data, q))


@dataclass(frozen=True)
class BoxStats:
    """Five-number summary with 1.5*IQR whiskers and flagged outliers."""

    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    whisker_low: float
    whisker_high: float
    outliers: tuple

    def as_dict(self):
        return {
            "min": self.minimum,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "max": self.maximum,
            "whisker_low": self.whisker_low,
            "whisker_high": self.whisker_high,
            "outliers": list(self.outliers),
        }


def box_stats(data):
    """Box-plot statistics of a nonempty sequence.

    Whiskers reach the most extreme data within 1.5*IQR of the quartiles;
    anything beyond is an outlier. When no datum falls inside a fence the
    whisker collapses to the quartile itself (same convention as the usual
    plotting tools), which keeps whisker_low <= q1 <= q3 <= whisker_high.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.size == 0:
        raise EmptyData("box_stats of empty data")
    q1 = quantile(data, 0.25)
    med = quantile(data, 0.5)
    q3 = quantile(data, 0.75)
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    in_lo = data[data >= lo_fence]
    in_hi = data[data <= hi_fence]
    whisker_low = float(np.min(in_lo)) if in_lo.size else q1
    whisker_high = float(np.max(in_hi)) if in_hi.size else q3
    whisker_low = min(whisker_low, q1)
    whisker_high = max(whisker_high, q3)
    outliers = data[(data < whisker_low) | (data > whisker_high)]
    return BoxStats(
        minimum=float(np.min(data)),
        q1=q1,
        median=med,
        q3=q3,
        maximum=float(np.max(data)),
        whisker_low=whisker_low,
        whisker_high=whisker_high,
        outliers=tuple(float(v) for v in outliers),
    )


def derive_seed(master, index):
    """Derive the seed of substream `index` from a 64-bit master seed.

    splitmix64 finalizer over master + index * odd constant: a bijection of
    the 64-bit index space, so distinct indices never collide for a fixed
    master seed.
    """
    z = (int(master) + 0x9E3779B97F4A7C15 * int(index)) & _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def make_rng(seed):
    """Deterministic numpy Generator for a derived 64-bit seed."""
    return np.random.Generator(np.random.PCG64(seed))
