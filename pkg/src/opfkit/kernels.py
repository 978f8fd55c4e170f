"""Angle coupling kernels: exact trigonometric and all-pass surrogate.

The power flow equations couple bus pairs through cos(delta) and sin(delta)
of an angle argument delta.  The surrogate replaces both with the real and
imaginary parts of the first-order all-pass fraction

    r(delta) = (1 + j a delta) / (1 - j a delta),

which gives the rational pair

    c(delta) = (1 - (a delta)**2) / (1 + (a delta)**2)
    s(delta) = 2 a delta / (1 + (a delta)**2).

The pair sits exactly on the unit circle for every real delta, and for
a = 0.5 matches sin at the origin to first order.  Accuracy degrades with
|delta|, so production use pre-rotates the argument: delta is split into a
fixed reference angle (from a DC solve) handled with exact trig constants
and a small live remainder handled by the surrogate.

All evaluators accept scalars or arrays, validate finiteness, and return
value, first, and second derivatives with respect to the live angle.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class KernelParam:
    """All-pass sharpness parameter.  a = 0.5 matches sin'(0) = 1."""

    a: float = 0.5

    def __post_init__(self):
        if not np.isfinite(self.a) or self.a <= 0.0:
            raise ValueError(f"kernel parameter a must be positive, got {self.a}")


@dataclass(frozen=True)
class KernelEval:
    """Cosine-like and sine-like kernel values with derivatives.

    c, s are the values; dc, ds the first and d2c, d2s the second
    derivatives with respect to the (live) angle argument.
    """

    c: np.ndarray
    s: np.ndarray
    dc: np.ndarray
    ds: np.ndarray
    d2c: np.ndarray
    d2s: np.ndarray


@dataclass(frozen=True)
class RotationRef:
    """Frozen rotation reference: exact cos/sin of a fixed angle."""

    delta_dc: np.ndarray
    cos_dc: np.ndarray
    sin_dc: np.ndarray

    @classmethod
    def from_angle(cls, delta_dc) -> "RotationRef":
        d = np.asarray(delta_dc, dtype=float)
        if not np.all(np.isfinite(d)):
            raise ValueError("non-finite rotation reference angle")
        return cls(delta_dc=d, cos_dc=np.cos(d), sin_dc=np.sin(d))


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite {what}")


def eval_trig(delta) -> KernelEval:
    """Exact trigonometric kernel: c = cos, s = sin."""
    d = np.asarray(delta, dtype=float)
    _check_finite(d, "kernel angle")
    c = np.cos(d)
    s = np.sin(d)
    return KernelEval(c=c, s=s, dc=-s, ds=c.copy(), d2c=-c, d2s=-s)


def eval_allpass(delta, param: KernelParam = KernelParam()) -> KernelEval:
    """All-pass surrogate kernel with closed-form derivatives.

    With u = a * delta and D = 1 + u**2:

        c    = (1 - u**2) / D          s    = 2 u / D
        dc   = -4 a**2 delta / D**2    ds   = 2 a (1 - u**2) / D**2
        d2c  = -4 a**2 (1 - 3 u**2) / D**3
        d2s  = -4 a**3 delta (3 - u**2) / D**3
    """
    a = param.a
    d = np.asarray(delta, dtype=float)
    _check_finite(d, "kernel angle")
    u = a * d
    u2 = u * u
    den = 1.0 + u2
    den2 = den * den
    den3 = den2 * den
    c = (1.0 - u2) / den
    s = 2.0 * u / den
    dc = -4.0 * a * a * d / den2
    ds = 2.0 * a * (1.0 - u2) / den2
    d2c = -4.0 * a * a * (1.0 - 3.0 * u2) / den3
    d2s = -4.0 * a**3 * d * (3.0 - u2) / den3
    return KernelEval(c=c, s=s, dc=dc, ds=ds, d2c=d2c, d2s=d2s)


def eval_rotated(
    ref: RotationRef, delta_live, param: KernelParam = KernelParam()
) -> KernelEval:
    """Surrogate kernel of (delta_dc + delta_live), rotated exactly.

    The fixed part uses exact cos/sin constants from ref; only the live
    remainder goes through the all-pass pair.  Because the rotation is an
    exact rotation of an on-circle pair, the result stays on the unit
    circle, and at delta_live = 0 it reproduces cos/sin of delta_dc to
    machine precision.  Derivatives are with respect to delta_live.
    """
    base = eval_allpass(delta_live, param)
    co, si = ref.cos_dc, ref.sin_dc
    return KernelEval(
        c=co * base.c - si * base.s,
        s=si * base.c + co * base.s,
        dc=co * base.dc - si * base.ds,
        ds=si * base.dc + co * base.ds,
        d2c=co * base.d2c - si * base.d2s,
        d2s=si * base.d2c + co * base.d2s,
    )


KERNEL_CSV_COLUMNS = (
    "delta_deg",
    "trig_c",
    "trig_s",
    "ap_c",
    "ap_s",
    "trig_dc",
    "trig_ds",
    "ap_dc",
    "ap_ds",
)


def write_kernel_samples(
    dest,
    param: KernelParam = KernelParam(),
    lo_deg: float = -180.0,
    hi_deg: float = 180.0,
    n: int = 721,
) -> None:
    """Write a CSV comparing trig and all-pass kernels over an angle sweep.

    dest may be a path or a writable text file object.  Columns:
    delta_deg, trig_c, trig_s, ap_c, ap_s, trig_dc, trig_ds, ap_dc, ap_ds.
    """
    if n < 2:
        raise ValueError("need at least two samples")
    if not hi_deg > lo_deg:
        raise ValueError("empty sweep range")
    deg = np.linspace(lo_deg, hi_deg, n)
    rad = np.radians(deg)
    tr = eval_trig(rad)
    ap = eval_allpass(rad, param)

    def emit(fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(KERNEL_CSV_COLUMNS)
        for k in range(n):
            w.writerow(
                [
                    repr(float(v))
                    for v in (
                        deg[k], tr.c[k], tr.s[k], ap.c[k], ap.s[k],
                        tr.dc[k], tr.ds[k], ap.dc[k], ap.ds[k],
                    )
                ]
            )

    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            emit(fh)
    elif isinstance(dest, io.TextIOBase) or hasattr(dest, "write"):
        emit(dest)
    else:
        raise TypeError(f"cannot write CSV to {type(dest)!r}")
