"""Finitely supported walks on Z^d and truncated lattice distributions."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

# cells allowed in a working array before srw_pmf starts cropping
DEFAULT_MAX_CELLS = 4_000_000


@dataclass(frozen=True, eq=False)
class LatticeWalk:
    """Random walk on Z^d with a finitely supported step law."""

    d: int
    step_pmf: dict
    is_simple: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        pmf = {}
        for pt, w in self.step_pmf.items():
            pt = (int(pt),) if np.ndim(pt) == 0 else tuple(int(c) for c in pt)
            if len(pt) != self.d:
                raise ValueError(f"point {pt} has wrong dimension")
            if w < 0:
                raise ValueError("negative step mass")
            if w > 0:
                pmf[pt] = pmf.get(pt, 0.0) + float(w)
        total = math.fsum(pmf.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"step masses sum to {total!r}, not 1")
        object.__setattr__(self, "step_pmf", dict(sorted(pmf.items())))

    @classmethod
    def simple(cls, d):
        """Simple symmetric walk: mass 1/(2d) on each of the +-e_j."""
        pmf = {}
        for j in range(d):
            for s in (1, -1):
                e = [0] * d
                e[j] = s
                pmf[tuple(e)] = 1.0 / (2 * d)
        return cls(d, pmf, is_simple=True)

    @property
    def points(self):
        return np.array(list(self.step_pmf), dtype=np.int64).reshape(-1, self.d)

    @property
    def masses(self):
        return np.array(list(self.step_pmf.values()))

    @property
    def reach(self):
        """Largest max-norm of a step."""
        return int(np.max(np.abs(self.points)))

    @property
    def symmetric(self):
        return all(abs(self.step_pmf.get(tuple(-c for c in p), 0.0) - w) <= 1e-15
                   for p, w in self.step_pmf.items())

    def chf(self, theta):
        """E exp(i theta . step); ``theta`` has shape (..., d)."""
        theta = np.asarray(theta, dtype=float)
        if self.d == 1 and theta.ndim == 0:
            theta = theta[None]
        phase = theta @ self.points.T.astype(float)
        if self.symmetric:
            return np.cos(phase) @ self.masses + 0j
        return np.exp(1j * phase) @ self.masses


@dataclass(eq=False)
class LatticeDistribution:
    """Nonnegative masses on the box ``[-radius, radius]^d``.

    ``mass[i_1, ..., i_d]`` is the mass at point ``(i_1 - radius, ...)``.
    Used both for probability laws (``captured_mass <= 1``) and for finite
    jump measures.
    """

    d: int
    radius: int
    mass: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.mass = np.asarray(self.mass, dtype=float)
        shape = (2 * self.radius + 1,) * self.d
        if self.mass.shape != shape:
            raise ValueError(f"mass array has shape {self.mass.shape}, expected {shape}")
        if np.any(self.mass < 0) or not np.all(np.isfinite(self.mass)):
            raise ValueError("masses must be finite and nonnegative")

    @classmethod
    def zeros(cls, d, radius):
        return cls(d, radius, np.zeros((2 * radius + 1,) * d))

    @classmethod
    def from_dict(cls, d, radius, entries):
        out = cls.zeros(d, radius)
        for pt, w in entries.items():
            out.add(pt, w)
        return out

    @property
    def captured_mass(self):
        return math.fsum(self.mass.ravel())

    def _index(self, point):
        point = (point,) if np.ndim(point) == 0 else tuple(point)
        if len(point) != self.d:
            raise ValueError("point has wrong dimension")
        if any(abs(int(c)) > self.radius for c in point):
            return None
        return tuple(int(c) + self.radius for c in point)

    def at(self, point):
        idx = self._index(point)
        return 0.0 if idx is None else float(self.mass[idx])

    def add(self, point, w):
        idx = self._index(point)
        if idx is None:
            raise ValueError(f"{point} lies outside radius {self.radius}")
        self.mass[idx] += w

    def coords(self):
        """Coordinates of every cell, shape ``(cells, d)``, C order."""
        ax = np.arange(-self.radius, self.radius + 1)
        grids = np.meshgrid(*([ax] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def entries(self):
        """List of ``(point, mass)`` for the nonzero cells, lexicographic order."""
        flat = self.mass.ravel()
        nz = np.flatnonzero(flat)
        pts = self.coords()[nz]
        return [(tuple(int(c) for c in p), float(flat[i])) for p, i in zip(pts, nz)]

    def restrict(self, radius):
        """Crop (or zero-pad) to a new radius."""
        out = LatticeDistribution.zeros(self.d, radius)
        r = min(radius, self.radius)
        src = tuple(slice(self.radius - r, self.radius + r + 1) for _ in range(self.d))
        dst = tuple(slice(radius - r, radius + r + 1) for _ in range(self.d))
        out.mass[dst] = self.mass[src]
        return out

    def scaled(self, k):
        return LatticeDistribution(self.d, self.radius, self.mass * k, dict(self.meta))

    def without_origin(self):
        out = LatticeDistribution(self.d, self.radius, self.mass.copy(), dict(self.meta))
        out.mass[(self.radius,) * self.d] = 0.0
        return out

    def mirrored(self):
        """Law of ``-X``."""
        return LatticeDistribution(self.d, self.radius,
                                   self.mass[(slice(None, None, -1),) * self.d].copy(),
                                   dict(self.meta))

    def to_csv(self, fh=None):
        """Rows ``x1, ..., xd, mass`` for the nonzero cells.  Returns text if ``fh`` is None."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(self.d)] + ["mass"])
        for pt, m in self.entries():
            w.writerow(list(pt) + [repr(m)])
        return buf.getvalue() if fh is None else None

    def to_json(self):
        return {"d": self.d, "radius": self.radius, "captured_mass": self.captured_mass,
                "entries": [{"point": list(p), "mass": m} for p, m in self.entries()]}

    @classmethod
    def from_json(cls, obj):
        out = cls.zeros(int(obj["d"]), int(obj["radius"]))
        for e in obj["entries"]:
            out.add(e["point"], e["mass"])
        return out


def _shift_add(out, arr, shift, w):
    """``out[x + shift] += w * arr[x]`` inside the common box."""
    src, dst = [], []
    n = arr.shape[0]
    for s in shift:
        if s >= 0:
            src.append(slice(0, n - s))
            dst.append(slice(s, n))
        else:
            src.append(slice(-s, n))
            dst.append(slice(0, n + s))
    out[tuple(dst)] += w * arr[tuple(src)]


def _binomial_walk_1d(m, radius):
    k = np.arange(-radius, radius + 1)
    out = np.zeros(k.shape)
    ok = (np.abs(k) <= m) & ((m + k) % 2 == 0)
    out[ok] = binom.pmf((m + k[ok]) // 2, m, 0.5)
    out[:radius] = out[:radius:-1]
    return out


def walk_pmf(walk, m, radius=None, max_cells=DEFAULT_MAX_CELLS):
    """Law of ``Z_m`` restricted to the box of the given radius.

    ``Z_m`` is built by m-fold convolution of the step law.  The working
    box is the full reachable box ``m * reach`` when it fits in
    ``max_cells``; otherwise it is the largest box that does (but at least
    ``radius``), mass leaving it is dropped at every step and
    ``captured_mass < 1`` reports the loss.  For the simple walk in d=1 the
    binomial closed form is used instead.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    full = m * walk.reach
    radius = full if radius is None else int(radius)
    if walk.is_simple and walk.d == 1:
        out = LatticeDistribution(1, radius, _binomial_walk_1d(m, radius))
        out.meta.update(steps=m, exact=True)
        return out
    limit = int((max_cells ** (1.0 / walk.d) - 1) // 2)
    work = full if (2 * full + 1) ** walk.d <= max_cells else max(radius, limit)
    arr = np.zeros((2 * work + 1,) * walk.d)
    arr[(work,) * walk.d] = 1.0
    pts, ws = walk.points, walk.masses
    for _ in range(m):
        nxt = np.zeros_like(arr)
        for p, w in zip(pts, ws):
            _shift_add(nxt, arr, p, w)
        arr = nxt
    out = LatticeDistribution(walk.d, work, arr).restrict(radius)
    out.meta.update(steps=m, exact=work >= full)
    return out


def srw_pmf(d, m, radius=None, max_cells=DEFAULT_MAX_CELLS):
    """Exact law of the simple symmetric walk after ``m`` steps."""
    return walk_pmf(LatticeWalk.simple(d), m, radius, max_cells)


def _walk_1d_table(ms, kmax):
    """``P(S_m = k)`` for the 1d simple walk, rows ``ms``, columns ``-kmax..kmax``."""
    ms = np.asarray(ms, dtype=np.int64)[:, None]
    k = np.arange(-kmax, kmax + 1)[None, :]
    ok = (np.abs(k) <= ms) & ((ms + k) % 2 == 0)
    mm = np.broadcast_to(ms, ok.shape)[ok]
    out = np.zeros(ok.shape)
    out[ok] = binom.pmf((mm + np.broadcast_to(k, ok.shape)[ok]) // 2, mm, 0.5)
    # exact mirror symmetry (binom.pmf is not bitwise symmetric)
    out[:, :kmax] = out[:, :kmax:-1]
    return out


def srw_point_table(d, ms, radius):
    """``P(Z_m = z)`` for the simple walk, shape ``(len(ms), (2r+1)**d)``.

    Columns follow :meth:`LatticeDistribution.coords` order.  d=1 is the
    binomial law; d=2 uses the 45-degree rotation, under which the two
    rotated coordinates ``x+y`` and ``x-y`` are independent 1d walks.
    """
    ms = np.asarray(ms, dtype=np.int64)
    if d == 1:
        return _walk_1d_table(ms, radius)
    if d == 2:
        a = _walk_1d_table(ms, 2 * radius)
        ax = np.arange(-radius, radius + 1)
        x, y = np.meshgrid(ax, ax, indexing="ij")
        u = (x + y).ravel() + 2 * radius
        v = (x - y).ravel() + 2 * radius
        return a[:, u] * a[:, v]
    raise NotImplementedError("point tables are available for d <= 2")


def walk_point_table(walk, ms, radius, max_cells=DEFAULT_MAX_CELLS):
    """``P(Z_m = z)`` on the box for each m in ``ms`` (any finitely supported walk)."""
    ms = np.asarray(ms, dtype=np.int64)
    if walk.is_simple and walk.d <= 2:
        return srw_point_table(walk.d, ms, radius)
    if ms.size == 0:
        return np.zeros((0, (2 * radius + 1) ** walk.d))
    top = int(ms.max())
    full = top * walk.reach
    work = full if (2 * full + 1) ** walk.d <= max_cells else None
    if work is None:
        raise MemoryError(f"convolution box for m={top} exceeds {max_cells} cells")
    rows = {}
    wanted = set(int(m) for m in ms)
    arr = np.zeros((2 * work + 1,) * walk.d)
    arr[(work,) * walk.d] = 1.0
    pts, ws = walk.points, walk.masses
    for step in range(top + 1):
        if step in wanted:
            rows[step] = LatticeDistribution(walk.d, work, arr).restrict(radius).mass.ravel()
        if step == top:
            break
        nxt = np.zeros_like(arr)
        for p, w in zip(pts, ws):
            _shift_add(nxt, arr, p, w)
        arr = nxt
    return np.array([rows[int(m)] for m in ms])

