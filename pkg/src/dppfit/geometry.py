"""Rectangular observation windows and point patterns.

Windows are axis-aligned boxes. Erosion and translation overlap have
closed forms for boxes, which is all the edge corrections need.
"""

from dataclasses import dataclass

import numpy as np

from .errors import PatternFormatError, PointOutsideWindow

__all__ = [
    "Window",
    "PointPattern",
    "volume",
    "erode",
    "shift_overlap_volume",
    "read_pattern",
    "write_pattern",
]


@dataclass(frozen=True)
class Window:
    """Closed box ``[lo_1, hi_1] x ... x [lo_d, hi_d]``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) == 0 or len(lo) != len(hi):
            raise ValueError("lo and hi must be nonempty and of equal length")
        if not all(np.isfinite(lo + hi)):
            raise ValueError("window bounds must be finite")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError(f"degenerate window bounds lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_bounds(cls, bounds):
        """Build from a flat ``(lo1, hi1, lo2, hi2, ...)`` sequence."""
        b = [float(v) for v in bounds]
        if len(b) == 0 or len(b) % 2:
            raise ValueError("bounds must hold an even, nonzero number of values")
        return cls(tuple(b[0::2]), tuple(b[1::2]))

    @classmethod
    def cube(cls, side, dim=2, origin=0.0):
        return cls((origin,) * dim, (origin + side,) * dim)

    @property
    def dim(self):
        return len(self.lo)

    @property
    def sides(self):
        return np.subtract(self.hi, self.lo)

    @property
    def bounds(self):
        """Flat ``(lo1, hi1, ..., lod, hid)`` tuple."""
        return tuple(v for pair in zip(self.lo, self.hi) for v in pair)

    @property
    def volume(self):
        return float(np.prod(self.sides))

    def contains(self, points):
        """Boolean mask of rows of ``points`` lying in the closed box."""
        x = np.asarray(points, dtype=float).reshape(-1, self.dim)
        return np.all((x >= self.lo) & (x <= self.hi), axis=1)

    def border_distance(self, points):
        """Distance from each point to the complement of the window."""
        x = np.asarray(points, dtype=float).reshape(-1, self.dim)
        return np.minimum(x - self.lo, np.subtract(self.hi, x)).min(axis=1)

    def translate(self, shift):
        s = np.broadcast_to(np.asarray(shift, dtype=float), (self.dim,))
        return Window(tuple(np.add(self.lo, s)), tuple(np.add(self.hi, s)))

    def __str__(self):
        return "x".join(f"[{l:g},{h:g}]" for l, h in zip(self.lo, self.hi))


def volume(w):
    """Lebesgue measure of the window."""
    return w.volume


def erode(w, t):
    """Window of points whose closed ``t``-ball lies in ``w``.

    Returns ``None`` when the eroded set has no interior.
    """
    t = float(t)
    if t < 0:
        raise ValueError("erosion distance must be nonnegative")
    lo = np.add(w.lo, t)
    hi = np.subtract(w.hi, t)
    if np.any(hi <= lo):
        return None
    return Window(tuple(lo), tuple(hi))


def eroded_volume(w, t):
    """Volume of ``erode(w, t)``, vectorized over ``t``; zero when empty."""
    t = np.asarray(t, dtype=float)
    sides = np.maximum(w.sides - 2.0 * t[..., None], 0.0)
    return np.prod(sides, axis=-1)


def shift_overlap_volume(w, z):
    """Volume of ``w`` intersected with ``w`` shifted by ``z``.

    ``z`` may be a single d-vector or an array of shape ``(..., d)``.
    """
    z = np.asarray(z, dtype=float)
    overlap = np.maximum(w.sides - np.abs(z), 0.0)
    out = np.prod(overlap, axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class PointPattern:
    """Finite simple point pattern observed in a window."""

    window: Window
    points: np.ndarray

    def __post_init__(self):
        d = self.window.dim
        x = np.array(self.points, dtype=float).reshape(-1, d)
        if not np.all(np.isfinite(x)):
            raise ValueError("point coordinates must be finite")
        inside = self.window.contains(x)
        if not np.all(inside):
            bad = x[np.argmin(inside)]
            raise PointOutsideWindow(f"point {tuple(bad)} lies outside {self.window}")
        if len(x) > 1 and len(np.unique(x, axis=0)) < len(x):
            raise ValueError("pattern contains duplicate points")
        x.setflags(write=False)
        object.__setattr__(self, "points", x)

    def __len__(self):
        return len(self.points)

    @property
    def n(self):
        return len(self.points)

    def translate(self, shift):
        s = np.broadcast_to(np.asarray(shift, dtype=float), (self.window.dim,))
        return PointPattern(self.window.translate(s), self.points + s)


def write_pattern(p, path):
    """Write ``p`` as a plain-text pattern file.

    Coordinates use ``repr`` so reading the file back is exact.
    """
    with open(path, "w") as fh:
        fh.write("window " + " ".join(repr(v) for v in p.window.bounds) + "\n")
        for row in p.points:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_pattern(path):
    """Parse a pattern file written by :func:`write_pattern`.

    The first non-comment line is ``window lo1 hi1 ... lod hid``; every
    further line holds one point. Lines starting with ``#`` and blank
    lines are skipped.
    """
    window = None
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if window is None:
                if fields[0] != "window":
                    raise PatternFormatError("expected 'window' header", lineno)
                try:
                    window = Window.from_bounds(float(v) for v in fields[1:])
                except ValueError as exc:
                    raise PatternFormatError(f"bad window header: {exc}", lineno)
                continue
            if len(fields) != window.dim:
                raise PatternFormatError(
                    f"expected {window.dim} coordinates, got {len(fields)}", lineno
                )
            try:
                pt = [float(v) for v in fields]
            except ValueError:
                raise PatternFormatError(f"non-numeric coordinate in {line!r}", lineno)
            if not np.all(np.isfinite(pt)):
                raise PatternFormatError("non-finite coordinate", lineno)
            if not window.contains(pt)[0]:
                raise PointOutsideWindow(f"point {tuple(pt)} lies outside {window}", lineno)
            rows.append(pt)
    if window is None:
        raise PatternFormatError("missing 'window' header", 1)
    return PointPattern(window, np.array(rows, dtype=float).reshape(-1, window.dim))
