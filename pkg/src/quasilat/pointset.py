"""Finite patches of point sets in a central extension group.

A PointPatch is an array-backed finite set of group elements together
with the box it was generated in (window) and the smaller box on which
it is certified complete (core).  All set-level operations (Minkowski
products, inversion, translation) keep track of how the trusted core
shrinks, and carry exact quadratic-integer coordinates along whenever
the inputs have them, so membership questions never depend on floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    BoundaryUnsoundError,
    CoefficientOverflowError,
    InsufficientWindowError,
)
from .group import CentralExtensionGroup, GroupElement
from .ring import COEFF_LIMIT, QuadInt

QUANT = 1e-9  # float coordinates closer than this collapse to one key
_PAIR_GUARD = 2 ** 30  # inputs to exact products stay below this


@dataclass(frozen=True)
class ExactCoords:
    """Per-point integer pairs (a, b) meaning a + b*sqrt(d), per coordinate."""

    za: np.ndarray
    zb: np.ndarray
    qa: np.ndarray
    qb: np.ndarray
    d: int = 2

    def __post_init__(self) -> None:
        for name in ("za", "zb", "qa", "qb"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.za.shape != self.zb.shape or self.qa.shape != self.qb.shape:
            raise ValueError("mismatched exact coordinate shapes")
        if len(self.za) != len(self.qa):
            raise ValueError("z and q exact blocks disagree on point count")

    @classmethod
    def from_quadints_z(cls, points: Sequence[QuadInt]) -> "ExactCoords":
        d = points[0].d if points else 2
        za = np.array([[p.a] for p in points], dtype=np.int64).reshape(len(points), 1)
        zb = np.array([[p.b] for p in points], dtype=np.int64).reshape(len(points), 1)
        empty = np.zeros((len(points), 0), dtype=np.int64)
        return cls(za=za, zb=zb, qa=empty, qb=empty, d=d)

    @classmethod
    def from_int_rows(cls, z: np.ndarray, q: np.ndarray, d: int = 2) -> "ExactCoords":
        z = np.asarray(z, dtype=np.int64)
        q = np.asarray(q, dtype=np.int64)
        return cls(za=z, zb=np.zeros_like(z), qa=q, qb=np.zeros_like(q), d=d)

    @property
    def n(self) -> int:
        return len(self.za)

    def take(self, idx: np.ndarray) -> "ExactCoords":
        return ExactCoords(self.za[idx], self.zb[idx], self.qa[idx], self.qb[idx], self.d)

    def neg(self) -> "ExactCoords":
        return ExactCoords(-self.za, -self.zb, -self.qa, -self.qb, self.d)

    def embed_z(self) -> np.ndarray:
        return self.za + self.zb * math.sqrt(self.d)

    def embed_q(self) -> np.ndarray:
        return self.qa + self.qb * math.sqrt(self.d)

    def key_columns(self) -> list[np.ndarray]:
        cols: list[np.ndarray] = []
        for k in range(self.za.shape[1]):
            cols.extend((self.za[:, k], self.zb[:, k]))
        for k in range(self.qa.shape[1]):
            cols.extend((self.qa[:, k], self.qb[:, k]))
        return cols

    def q_key_columns(self) -> list[np.ndarray]:
        cols: list[np.ndarray] = []
        for k in range(self.qa.shape[1]):
            cols.extend((self.qa[:, k], self.qb[:, k]))
        return cols

    def max_abs(self) -> int:
        vals = [int(np.abs(a).max()) for a in (self.za, self.zb, self.qa, self.qb) if a.size]
        return max(vals) if vals else 0

    def point(self, i: int) -> tuple[tuple[QuadInt, ...], tuple[QuadInt, ...]]:
        zx = tuple(QuadInt(int(self.za[i, k]), int(self.zb[i, k]), self.d) for k in range(self.za.shape[1]))
        qx = tuple(QuadInt(int(self.qa[i, k]), int(self.qb[i, k]), self.d) for k in range(self.qa.shape[1]))
        return zx, qx


def _quant_keys(arr: np.ndarray) -> np.ndarray:
    return np.round(arr / QUANT).astype(np.int64)


def _as_block(arr, width: int) -> np.ndarray:
    """Contiguous float (n, width) view; width 0 keeps the row count."""
    out = np.ascontiguousarray(arr, dtype=float)
    out = out.reshape(-1, width) if width else out.reshape(len(out), 0)
    return out


def _stack_columns(cols: Sequence[np.ndarray]) -> np.ndarray:
    if not cols:
        return np.zeros((0, 0), dtype=np.int64)
    return np.column_stack([np.asarray(c, dtype=np.int64) for c in cols])


@dataclass(frozen=True)
class PointPatch:
    """Finite patch with declared generation window and trusted core.

    Windows and cores are half-widths of sup-norm boxes, one number for
    the z block and one for the q block.  Points are stored in canonical
    order (sorted by q columns then z columns) with duplicates removed.
    """

    group: CentralExtensionGroup
    z: np.ndarray
    q: np.ndarray
    window_z: float
    window_q: float
    core_z: float
    core_q: float
    provenance: str = ""
    exact: Optional[ExactCoords] = None

    def __post_init__(self) -> None:
        z = _as_block(self.z, self.group.dim_z)
        q = _as_block(self.q, self.group.dim_q)
        if len(z) != len(q):
            raise ValueError("z and q blocks disagree on point count")
        z.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "q", q)
        for name in ("window_z", "window_q", "core_z", "core_q"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.core_z > self.window_z + 1e-12 or self.core_q > self.window_q + 1e-12:
            raise ValueError("core box cannot exceed the window box")
        if z.size and np.abs(z).max() > self.window_z + 1e-9:
            raise ValueError("points fall outside the declared z window")
        if q.size and np.abs(q).max() > self.window_q + 1e-9:
            raise ValueError("points fall outside the declared q window")
        if self.exact is not None and self.exact.n != len(z):
            raise ValueError("exact coordinates disagree on point count")

    @property
    def n(self) -> int:
        return len(self.z)

    @property
    def dim_z(self) -> int:
        return self.group.dim_z

    @property
    def dim_q(self) -> int:
        return self.group.dim_q

    @cached_property
    def key_matrix(self) -> np.ndarray:
        """Integer identity per point: exact pairs when present, else
        coordinates quantized at 1e-9."""
        if self.exact is not None:
            return _stack_columns(self.exact.key_columns())
        return _stack_columns(
            [_quant_keys(self.z[:, k]) for k in range(self.dim_z)]
            + [_quant_keys(self.q[:, k]) for k in range(self.dim_q)]
        )

    @cached_property
    def q_key_matrix(self) -> np.ndarray:
        if self.exact is not None:
            return _stack_columns(self.exact.q_key_columns())
        return _stack_columns([_quant_keys(self.q[:, k]) for k in range(self.dim_q)])

    @cached_property
    def key_set(self) -> set[tuple[int, ...]]:
        return {tuple(row) for row in self.key_matrix.tolist()}

    def element(self, i: int) -> GroupElement:
        z_exact = q_exact = None
        if self.exact is not None:
            z_exact, q_exact = self.exact.point(i)
        return GroupElement(
            z=tuple(self.z[i]), q=tuple(self.q[i]), z_exact=z_exact, q_exact=q_exact
        )

    def __iter__(self) -> Iterator[GroupElement]:
        return (self.element(i) for i in range(self.n))

    def core_mask(self) -> np.ndarray:
        m = np.ones(self.n, dtype=bool)
        if self.dim_z:
            m &= np.all(np.abs(self.z) <= self.core_z + 1e-12, axis=1)
        if self.dim_q:
            m &= np.all(np.abs(self.q) <= self.core_q + 1e-12, axis=1)
        return m

    def take(self, idx: np.ndarray, **overrides) -> "PointPatch":
        exact = self.exact.take(idx) if self.exact is not None else None
        kw = dict(
            group=self.group,
            z=self.z[idx],
            q=self.q[idx],
            window_z=self.window_z,
            window_q=self.window_q,
            core_z=self.core_z,
            core_q=self.core_q,
            provenance=self.provenance,
            exact=exact,
        )
        kw.update(overrides)
        return PointPatch(**kw)

    def restrict(self, z_box: Optional[float] = None, q_box: Optional[float] = None) -> "PointPatch":
        """Clip to a smaller box; windows and cores shrink accordingly."""
        zb = self.window_z if z_box is None else min(float(z_box), self.window_z)
        qb = self.window_q if q_box is None else min(float(q_box), self.window_q)
        m = np.ones(self.n, dtype=bool)
        if self.dim_z:
            m &= np.all(np.abs(self.z) <= zb + 1e-12, axis=1)
        if self.dim_q:
            m &= np.all(np.abs(self.q) <= qb + 1e-12, axis=1)
        return self.take(
            np.flatnonzero(m),
            window_z=zb,
            window_q=qb,
            core_z=min(self.core_z, zb),
            core_q=min(self.core_q, qb),
        )


def _short(text: str, limit: int = 60) -> str:
    return text if len(text) <= limit else text[: limit - 1] + "~"


def _canonical_perm(z: np.ndarray, q: np.ndarray, keys: np.ndarray) -> np.ndarray:
    cols: list[np.ndarray] = [keys[:, k] for k in range(keys.shape[1] - 1, -1, -1)]
    cols.extend(z[:, k] for k in range(z.shape[1] - 1, -1, -1))
    cols.extend(q[:, k] for k in range(q.shape[1] - 1, -1, -1))
    if not cols:
        return np.arange(len(z))
    return np.lexsort(tuple(cols))


def make_patch(
    group: CentralExtensionGroup,
    z: np.ndarray,
    q: np.ndarray,
    window_z: float,
    window_q: float,
    core_z: float,
    core_q: float,
    provenance: str = "",
    exact: Optional[ExactCoords] = None,
) -> PointPatch:
    """Assemble a patch: deduplicate by exact (or quantized) keys and
    store points in canonical order."""
    z = _as_block(z, group.dim_z)
    q = _as_block(q, group.dim_q)
    if exact is not None:
        keys = _stack_columns(exact.key_columns())
    else:
        keys = _stack_columns(
            [_quant_keys(z[:, k]) for k in range(group.dim_z)]
            + [_quant_keys(q[:, k]) for k in range(group.dim_q)]
        )
    if len(z):
        perm = _canonical_perm(z, q, keys)
        keys = keys[perm]
        if keys.shape[1]:
            changed = np.ones(len(keys), dtype=bool)
            changed[1:] = np.any(keys[1:] != keys[:-1], axis=1)
            perm = perm[changed]
        z = z[perm]
        q = q[perm]
        exact = exact.take(perm) if exact is not None else None
    return PointPatch(
        group=group,
        z=z,
        q=q,
        window_z=window_z,
        window_q=window_q,
        core_z=core_z,
        core_q=core_q,
        provenance=provenance,
        exact=exact,
    )


def patch_from_exact(
    group: CentralExtensionGroup,
    exact: ExactCoords,
    window_z: float,
    window_q: float,
    core_z: float,
    core_q: float,
    provenance: str = "",
) -> PointPatch:
    return make_patch(
        group=group,
        z=exact.embed_z(),
        q=exact.embed_q(),
        window_z=window_z,
        window_q=window_q,
        core_z=core_z,
        core_q=core_q,
        provenance=provenance,
        exact=exact,
    )


def integer_lattice_patch(
    group: CentralExtensionGroup,
    window_z: float,
    window_q: float = 0.0,
    core_z: Optional[float] = None,
    core_q: Optional[float] = None,
    provenance: str = "",
) -> PointPatch:
    """All integer points of the window boxes, with exact coordinates."""
    wz = int(math.floor(window_z + 1e-9))
    wq = int(math.floor(window_q + 1e-9))
    axes = [np.arange(-wz, wz + 1, dtype=np.int64)] * group.dim_z
    axes += [np.arange(-wq, wq + 1, dtype=np.int64)] * group.dim_q
    if not axes:
        raise ValueError("group has no coordinates")
    count = 1
    for a in axes:
        count *= len(a)
    if count > 50_000_000:
        raise ValueError("lattice window too large")
    mesh = np.meshgrid(*axes, indexing="ij")
    cols = np.stack([m.ravel() for m in mesh], axis=1)
    zc = cols[:, : group.dim_z]
    qc = cols[:, group.dim_z :]
    exact = ExactCoords.from_int_rows(zc, qc)
    return patch_from_exact(
        group=group,
        exact=exact,
        window_z=float(window_z),
        window_q=float(window_q),
        core_z=float(window_z) if core_z is None else float(core_z),
        core_q=float(window_q) if core_q is None else float(core_q),
        provenance=provenance or f"integer_lattice(window_z={window_z:g},window_q={window_q:g})",
    )


def _exact_pair_product(p1: PointPatch, p2: PointPatch) -> Optional[ExactCoords]:
    """Exact coordinates of all pairwise products x*y, or None when the
    inputs cannot support them."""
    e1, e2 = p1.exact, p2.exact
    if e1 is None or e2 is None or e1.d != e2.d:
        return None
    if not p1.group.cocycle.is_integral:
        return None
    if max(e1.max_abs(), e2.max_abs()) > _PAIR_GUARD:
        raise CoefficientOverflowError("exact coordinates too large for pairwise products")
    n, m = e1.n, e2.n
    dz, dq = p1.dim_z, p1.dim_q
    za = (e1.za[:, None, :] + e2.za[None, :, :]).reshape(n * m, dz)
    zb = (e1.zb[:, None, :] + e2.zb[None, :, :]).reshape(n * m, dz)
    qa = (e1.qa[:, None, :] + e2.qa[None, :, :]).reshape(n * m, dq)
    qb = (e1.qb[:, None, :] + e2.qb[None, :, :]).reshape(n * m, dq)
    if dq and dz:
        M = p1.group.cocycle.stack.astype(np.int64)
        d = e1.d
        # (a1 + b1 rt)(a2 + b2 rt) = (a1 a2 + d b1 b2) + (a1 b2 + b1 a2) rt
        beta_a = np.einsum("kij,ni,mj->nmk", M, e1.qa, e2.qa) + d * np.einsum(
            "kij,ni,mj->nmk", M, e1.qb, e2.qb
        )
        beta_b = np.einsum("kij,ni,mj->nmk", M, e1.qa, e2.qb) + np.einsum(
            "kij,ni,mj->nmk", M, e1.qb, e2.qa
        )
        za = za + beta_a.reshape(n * m, dz)
        zb = zb + beta_b.reshape(n * m, dz)
    out = ExactCoords(za=za, zb=zb, qa=qa, qb=qb, d=e1.d)
    if out.max_abs() > COEFF_LIMIT:
        raise CoefficientOverflowError("product coordinates exceed the safe limit")
    return out


def minkowski(p1: PointPatch, p2: PointPatch) -> PointPatch:
    """Pointwise product set {x*y : x in p1, y in p2}.

    The window grows by the cocycle drift; the trusted core follows
    core' = max(core(p1) - window(p2), 0) per block, which degenerates
    to zero for self-products.  Callers that need gap statistics on a
    meaningful region restrict to the base patch core themselves.
    """
    if p1.group != p2.group:
        raise ValueError("patches live in different groups")
    g = p1.group
    n, m = p1.n, p2.n
    if n * m > 50_000_000:
        raise InsufficientWindowError(
            f"pairwise product of {n} x {m} points is too large; restrict the patches first"
        )
    q = (p1.q[:, None, :] + p2.q[None, :, :]).reshape(n * m, g.dim_q)
    z = (p1.z[:, None, :] + p2.z[None, :, :]).reshape(n * m, g.dim_z)
    if g.dim_q and g.dim_z:
        z = z + g.cocycle.beta_pairs(p1.q, p2.q).reshape(n * m, g.dim_z)
    exact = _exact_pair_product(p1, p2)
    drift = g.cocycle.box_drift(p1.window_q, p2.window_q)
    return make_patch(
        group=g,
        z=z,
        q=q,
        window_z=p1.window_z + p2.window_z + drift,
        window_q=p1.window_q + p2.window_q,
        core_z=max(p1.core_z - p2.window_z - drift, 0.0),
        core_q=max(p1.core_q - p2.window_q, 0.0),
        provenance=f"minkowski({_short(p1.provenance)},{_short(p2.provenance)})",
        exact=exact,
    )


def inverse_set(p: PointPatch) -> PointPatch:
    """{x^-1 : x in p}; inversion negates both blocks, windows are kept."""
    return make_patch(
        group=p.group,
        z=-p.z,
        q=-p.q,
        window_z=p.window_z,
        window_q=p.window_q,
        core_z=p.core_z,
        core_q=p.core_q,
        provenance=f"inverse({_short(p.provenance)})",
        exact=p.exact.neg() if p.exact is not None else None,
    )


def translate(p: PointPatch, g_elt: GroupElement) -> PointPatch:
    """Left translate {g*x : x in p} with honest core shrinkage."""
    g = p.group
    gz = np.asarray(g_elt.z, dtype=float)
    gq = np.asarray(g_elt.q, dtype=float)
    q = p.q + gq[None, :]
    z = p.z + gz[None, :]
    if g.dim_q and g.dim_z:
        z = z + np.einsum("kij,i,nj->nk", g.cocycle.stack, gq, p.q)
    exact = None
    if (
        p.exact is not None
        and g_elt.is_exact
        and g.cocycle.is_integral
        and all(x.d == p.exact.d for x in g_elt.z_exact + g_elt.q_exact)
    ):
        e = p.exact
        ga = np.array([x.a for x in g_elt.q_exact], dtype=np.int64)
        gb = np.array([x.b for x in g_elt.q_exact], dtype=np.int64)
        za = e.za + np.array([x.a for x in g_elt.z_exact], dtype=np.int64)[None, :]
        zb = e.zb + np.array([x.b for x in g_elt.z_exact], dtype=np.int64)[None, :]
        qa = e.qa + ga[None, :]
        qb = e.qb + gb[None, :]
        if g.dim_q and g.dim_z:
            M = g.cocycle.stack.astype(np.int64)
            beta_a = np.einsum("kij,i,nj->nk", M, ga, e.qa) + e.d * np.einsum(
                "kij,i,nj->nk", M, gb, e.qb
            )
            beta_b = np.einsum("kij,i,nj->nk", M, ga, e.qb) + np.einsum(
                "kij,i,nj->nk", M, gb, e.qa
            )
            za = za + beta_a
            zb = zb + beta_b
        exact = ExactCoords(za=za, zb=zb, qa=qa, qb=qb, d=e.d)
    shift_z = float(np.max(np.abs(gz))) if g.dim_z else 0.0
    shift_q = float(np.max(np.abs(gq))) if g.dim_q else 0.0
    drift = g.cocycle.box_drift(shift_q, p.window_q)
    return make_patch(
        group=g,
        z=z,
        q=q,
        window_z=p.window_z + shift_z + drift,
        window_q=p.window_q + shift_q,
        core_z=max(p.core_z - shift_z - drift, 0.0),
        core_q=max(p.core_q - shift_q, 0.0),
        provenance=f"translate({_short(p.provenance)})",
        exact=exact,
    )


def _flat_min_gap(coords: np.ndarray) -> float:
    if len(coords) < 2:
        return math.inf
    if coords.shape[1] == 1:
        vals = np.sort(coords[:, 0])
        return float(np.min(np.diff(vals)))
    tree = cKDTree(coords)
    dist, _ = tree.query(coords, k=2)
    return float(np.min(dist[:, 1]))


def min_gap(p: PointPatch) -> float:
    """Minimum left-invariant distance gauge(x^-1 y) over distinct pairs."""
    if p.n < 2:
        return math.inf
    g = p.group
    if g.dim_q == 0:
        return _flat_min_gap(p.z)
    if g.dim_z == 0:
        return _flat_min_gap(p.q)
    if p.n > 20_000:
        raise InsufficientWindowError(
            "min_gap on mixed patches is quadratic; restrict below 20000 points"
        )
    best = math.inf
    block = max(1, 2_000_000 // max(p.n, 1))
    for i0 in range(0, p.n, block):
        i1 = min(i0 + block, p.n)
        dq = p.q[None, :, :] - p.q[i0:i1, None, :]
        dz = p.z[None, :, :] - p.z[i0:i1, None, :]
        if np.any(g.cocycle.stack != 0.0):
            dz = dz - np.einsum("kij,ni,nmj->nmk", g.cocycle.stack, p.q[i0:i1], dq)
        gq = np.sqrt(np.sum(dq * dq, axis=2))
        gz = np.sqrt(np.sum(dz * dz, axis=2))
        dist = np.maximum(gq, np.sqrt(gz))
        rows = np.arange(i0, i1) - i0
        dist[rows, np.arange(i0, i1)] = math.inf
        best = min(best, float(dist.min()))
    return best


@dataclass(frozen=True)
class CoveringReport:
    """Grid estimate of sup_x min_p d(x, p) over a probe box."""

    estimate: float
    grid_max: float
    slack: float
    h: float
    z_radius: float
    q_radius: float
    n_probes: int


def _axis_grid(radius: float, step: float) -> np.ndarray:
    if radius <= 0:
        return np.zeros(1)
    k = int(math.floor(radius / step + 1e-9))
    return np.arange(-k, k + 1, dtype=float) * step


def covering_radius(
    p: PointPatch,
    z_radius: Optional[float] = None,
    q_radius: Optional[float] = None,
    h: float = 0.01,
) -> CoveringReport:
    """Covering radius of the patch over a centered probe box, estimated
    on a grid of spacing h and padded by the grid slack.

    The probe box must sit inside the trusted core; outside it the patch
    may simply be missing points and the estimate would be meaningless.
    """
    g = p.group
    if p.n == 0:
        raise InsufficientWindowError("empty patch has no covering radius")
    z_radius = p.core_z if z_radius is None else float(z_radius)
    q_radius = p.core_q if q_radius is None else float(q_radius)
    if z_radius > p.core_z + 1e-12 or q_radius > p.core_q + 1e-12:
        raise BoundaryUnsoundError(
            f"probe box ({z_radius:.6g}, {q_radius:.6g}) exceeds the trusted core "
            f"({p.core_z:.6g}, {p.core_q:.6g})"
        )
    if g.dim_q == 0 or g.dim_z == 0:
        dim = g.dim_z or g.dim_q
        pts = p.z if g.dim_q == 0 else p.q
        radius = z_radius if g.dim_q == 0 else q_radius
        axes = [_axis_grid(radius, h)] * dim
        n_probes = int(np.prod([len(a) for a in axes]))
        if n_probes > 5_000_000:
            raise ValueError("probe grid too fine; increase h")
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        dist, _ = cKDTree(pts).query(grid)
        grid_max = float(dist.max())
        slack = h * math.sqrt(dim) / 2.0
        return CoveringReport(
            estimate=grid_max + slack,
            grid_max=grid_max,
            slack=slack,
            h=h,
            z_radius=z_radius,
            q_radius=q_radius,
            n_probes=n_probes,
        )
    # Mixed case: z probes step h^2 so the gauge offset stays O(h).
    hz = h * h
    z_axes = [_axis_grid(z_radius, hz)] * g.dim_z
    q_axes = [_axis_grid(q_radius, h)] * g.dim_q
    n_probes = int(np.prod([len(a) for a in z_axes + q_axes]))
    if n_probes * p.n > 200_000_000:
        raise ValueError("mixed probe grid too fine for this patch; increase h")
    zq = np.stack(np.meshgrid(*(z_axes + q_axes), indexing="ij"), axis=-1).reshape(n_probes, -1)
    probe_z, probe_q = zq[:, : g.dim_z], zq[:, g.dim_z :]
    grid_max = 0.0
    block = max(1, 50_000_000 // max(p.n, 1))
    for i0 in range(0, n_probes, block):
        pz = probe_z[i0 : i0 + block]
        pq = probe_q[i0 : i0 + block]
        dq = pq[:, None, :] - p.q[None, :, :]
        dz = pz[:, None, :] - p.z[None, :, :] - np.einsum(
            "kij,mi,bmj->bmk", g.cocycle.stack, p.q, dq
        )
        gq = np.sqrt(np.sum(dq * dq, axis=2))
        gz = np.sqrt(np.sum(dz * dz, axis=2))
        dist = np.maximum(gq, np.sqrt(gz)).min(axis=1)
        grid_max = max(grid_max, float(dist.max()))
    # Probe offsets: q moves h*sqrt(dq)/2, z moves hz*sqrt(dz)/2 plus the
    # commutator drift from recentering at a probe with |q| <= q_radius.
    dz_off = hz * math.sqrt(g.dim_z) / 2.0 + g.cocycle.box_drift(q_radius, h * math.sqrt(g.dim_q) / 2.0)
    slack = max(h * math.sqrt(g.dim_q) / 2.0, math.sqrt(dz_off))
    return CoveringReport(
        estimate=grid_max + slack,
        grid_max=grid_max,
        slack=slack,
        h=h,
        z_radius=z_radius,
        q_radius=q_radius,
        n_probes=n_probes,
    )


@dataclass(frozen=True)
class MeyerianReport:
    """Uniform-discreteness record for iterated difference sets."""

    gaps: tuple[float, ...]
    passed: bool
    k_max: int
    threshold: float
    core_z: float
    core_q: float
    counts: tuple[int, ...]


def check_meyerian(p: PointPatch, k_max: int = 3, threshold: float = 1e-6) -> MeyerianReport:
    """Min gaps of D, D^2, ..., D^k_max for D = p^-1 * p, measured on the
    base patch core.

    Intermediate products are complete on shrinking boxes; each D^k is
    clipped so that every realized point of the next power inside the
    measurement region is still produced.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if p.n < 2:
        raise InsufficientWindowError("need at least two points to form difference sets")
    diff = minkowski(inverse_set(p), p)
    w_z, w_q = diff.window_z, diff.window_q
    gaps: list[float] = []
    counts: list[int] = []
    current = diff
    for k in range(1, k_max + 1):
        measured = current.restrict(z_box=p.core_z, q_box=p.core_q)
        if measured.n < 2:
            raise InsufficientWindowError(
                f"difference set D^{k} has {measured.n} points on the core; "
                f"generate the patch with a larger window"
            )
        gaps.append(min_gap(measured))
        counts.append(measured.n)
        if k < k_max:
            keep_z = p.core_z + (k_max - k) * w_z
            keep_q = p.core_q + (k_max - k) * w_q
            current = minkowski(current.restrict(z_box=keep_z, q_box=keep_q), diff)
    return MeyerianReport(
        gaps=tuple(gaps),
        passed=all(g >= threshold for g in gaps),
        k_max=k_max,
        threshold=threshold,
        core_z=p.core_z,
        core_q=p.core_q,
        counts=tuple(counts),
    )


@dataclass(frozen=True)
class CoverReport:
    """Certificate that p*p sits inside p*F on the measurement region."""

    translators: PointPatch
    size: int
    max_residual: float
    cluster_radius: float
    n_covered: int


def _nearest_in_patch(p: PointPatch, z: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of the patch point nearest to each query row in the
    left-invariant metric, plus the distances."""
    g = p.group
    if g.dim_q == 0:
        dist, idx = cKDTree(p.z).query(z)
        return np.atleast_1d(idx), np.atleast_1d(dist)
    if g.dim_z == 0:
        dist, idx = cKDTree(p.q).query(q)
        return np.atleast_1d(idx), np.atleast_1d(dist)
    m = len(z)
    if m * p.n > 200_000_000:
        raise InsufficientWindowError("nearest-point search too large; restrict the patch")
    idx = np.empty(m, dtype=np.int64)
    dist = np.empty(m)
    block = max(1, 50_000_000 // max(p.n, 1))
    for i0 in range(0, m, block):
        dq = q[i0 : i0 + block, None, :] - p.q[None, :, :]
        dz = z[i0 : i0 + block, None, :] - p.z[None, :, :] - np.einsum(
            "kij,mi,bmj->bmk", g.cocycle.stack, p.q, dq
        )
        gq = np.sqrt(np.sum(dq * dq, axis=2))
        gz = np.sqrt(np.sum(dz * dz, axis=2))
        d = np.maximum(gq, np.sqrt(gz))
        idx[i0 : i0 + block] = np.argmin(d, axis=1)
        dist[i0 : i0 + block] = d[np.arange(len(d)), idx[i0 : i0 + block]]
    return idx, dist


def approximate_group_cover(p: PointPatch, cluster_radius: float = 1e-6) -> CoverReport:
    """Finite translator set F with p*p covered by p*F on the base core.

    Requires a symmetric patch containing the identity.  Each product
    point y gets quotient x^-1 y against its nearest patch point x; the
    quotients are clustered at cluster_radius and the representatives
    form F.  The reported residual is the largest snap distance.
    """
    g = p.group
    ident_key = tuple(np.zeros(p.key_matrix.shape[1], dtype=np.int64).tolist())
    if ident_key not in p.key_set:
        raise ValueError("patch must contain the identity")
    inv_keys = {tuple(row) for row in inverse_set(p).key_matrix.tolist()}
    if inv_keys != p.key_set:
        raise ValueError("patch must be symmetric (closed under inversion)")
    prod = minkowski(p, p).restrict(z_box=p.core_z, q_box=p.core_q)
    if prod.n == 0:
        raise InsufficientWindowError("no product points on the core")
    idx, dist = _nearest_in_patch(p, prod.z, prod.q)
    max_window_gauge = max(p.window_q, math.sqrt(p.window_z * max(p.dim_z, 1)))
    if float(dist.max()) > 2.0 * max_window_gauge:
        raise InsufficientWindowError("a product point is farther than the patch window")
    # Quotients r = x^-1 y, one per product point.
    rq = prod.q - p.q[idx]
    rz = prod.z - p.z[idx]
    if g.dim_q and g.dim_z:
        rz = rz - np.einsum("kij,ni,nj->nk", g.cocycle.stack, p.q[idx], rq)
    order = np.lexsort(
        tuple(rz[:, k] for k in range(g.dim_z - 1, -1, -1))
        + tuple(rq[:, k] for k in range(g.dim_q - 1, -1, -1))
    )
    reps_z: list[np.ndarray] = []
    reps_q: list[np.ndarray] = []
    max_residual = 0.0
    for i in order:
        best = math.inf
        for fz, fq in zip(reps_z, reps_q):
            dq = rq[i] - fq
            dz = rz[i] - fz
            if g.dim_q and g.dim_z:
                dz = dz - g.cocycle.beta(fq, dq)
            qn = math.sqrt(float(np.dot(dq, dq)))
            zn = math.sqrt(float(np.dot(dz, dz)))
            d = max(qn, math.sqrt(zn)) if (g.dim_q and g.dim_z) else (zn if g.dim_q == 0 else qn)
            best = min(best, d)
        if best > cluster_radius:
            reps_z.append(rz[i].copy())
            reps_q.append(rq[i].copy())
        else:
            max_residual = max(max_residual, best)
    wz = float(max(np.max(np.abs(np.array(reps_z))), 0.0)) if reps_z and g.dim_z else 0.0
    wq = float(max(np.max(np.abs(np.array(reps_q))), 0.0)) if reps_q and g.dim_q else 0.0
    translators = make_patch(
        group=g,
        z=_as_block(np.array(reps_z, dtype=float), g.dim_z),
        q=_as_block(np.array(reps_q, dtype=float), g.dim_q),
        window_z=wz,
        window_q=wq,
        core_z=0.0,
        core_q=0.0,
        provenance=f"cover({_short(p.provenance)})",
    )
    return CoverReport(
        translators=translators,
        size=translators.n,
        max_residual=max_residual,
        cluster_radius=cluster_radius,
        n_covered=prod.n,
    )


def patch_density(p: PointPatch) -> float:
    """Points per unit volume counted on the core box."""
    vol = 1.0
    if p.dim_z:
        if p.core_z <= 0:
            raise InsufficientWindowError("core box has no z volume")
        vol *= (2.0 * p.core_z) ** p.dim_z
    if p.dim_q:
        if p.core_q <= 0:
            raise InsufficientWindowError("core box has no q volume")
        vol *= (2.0 * p.core_q) ** p.dim_q
    return float(np.count_nonzero(p.core_mask())) / vol
