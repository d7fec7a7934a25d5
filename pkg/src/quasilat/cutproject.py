"""Cut-and-project schemes, symplectic products, and fiber machinery.

Model sets are enumerated from a higher-dimensional lattice with a
closed internal window.  Products Xi (+)_beta Delta assemble patches in
a central extension and certify the bilinear compatibility condition
beta(Delta + Delta, Delta) inside the k-fold sum of Xi on the patch.
Fibers {z : (z, q) in P} are extracted over projected points and graded
by how densely they fill the trusted z-core.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    BoundaryUnsoundError,
    InsufficientWindowError,
    ThresholdTooSmallError,
)
from .group import CentralExtensionGroup, Cocycle, abelian_group
from .pointset import ExactCoords, PointPatch, make_patch, min_gap, minkowski
from .ring import silver_points

MATCH_TOL = 1e-9


@dataclass(frozen=True)
class CutProjectScheme:
    """Lattice-and-window data for a cut-and-project construction.

    kind "silver" is the arithmetic scheme {(a + b*sqrt(2), a - b*sqrt(2))}
    in R x R; kind "matrix" takes an explicit nonsingular basis whose
    columns generate the lattice, with the first physical_dim rows read
    as physical coordinates and the rest as internal ones.
    """

    kind: str
    physical_dim: int
    internal_dim: int
    window: tuple[tuple[float, float], ...]
    basis: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.kind not in ("silver", "matrix"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if len(self.window) != self.internal_dim:
            raise ValueError("need one closed interval per internal dimension")
        for lo, hi in self.window:
            if not (hi > lo):
                raise ValueError(f"degenerate window [{lo}, {hi}]")
        if self.kind == "silver":
            if (self.physical_dim, self.internal_dim) != (1, 1):
                raise ValueError("the silver scheme is one dimensional on both sides")
            if self.basis is not None:
                raise ValueError("the silver scheme carries no explicit basis")
        else:
            n = self.physical_dim + self.internal_dim
            basis = np.asarray(self.basis, dtype=float)
            if basis.shape != (n, n):
                raise ValueError(f"basis must be {n} x {n}")
            if abs(np.linalg.det(basis)) < 1e-12:
                raise ValueError("basis is singular")
            basis = basis.copy()
            basis.setflags(write=False)
            object.__setattr__(self, "basis", basis)
        object.__setattr__(
            self, "window", tuple((float(lo), float(hi)) for lo, hi in self.window)
        )


def silver_scheme(lo: float = -1.0, hi: float = 1.0) -> CutProjectScheme:
    return CutProjectScheme(kind="silver", physical_dim=1, internal_dim=1, window=((lo, hi),))


def matrix_scheme(
    basis: Sequence[Sequence[float]],
    physical_dim: int,
    window: Sequence[tuple[float, float]],
) -> CutProjectScheme:
    basis = np.asarray(basis, dtype=float)
    internal = basis.shape[0] - physical_dim
    return CutProjectScheme(
        kind="matrix",
        physical_dim=physical_dim,
        internal_dim=internal,
        window=tuple((float(lo), float(hi)) for lo, hi in window),
        basis=basis,
    )


def generate_model_set(scheme: CutProjectScheme, T: float) -> PointPatch:
    """Physical projections of lattice points with physical part in
    [-T, T]^physical_dim and internal part in the closed window.

    The silver scheme decides window membership with exact integer
    arithmetic; matrix schemes enumerate integer combinations inside a
    padded coefficient box and filter with plain float comparisons.
    The enumeration is complete on the physical box, so core == window.
    """
    T = float(T)
    if T < 0:
        raise ValueError("physical radius must be nonnegative")
    if scheme.kind == "silver":
        lo, hi = scheme.window[0]
        pts = silver_points(lo, hi, T)
        exact = ExactCoords.from_quadints_z(pts)
        return make_patch(
            group=abelian_group(dim_z=1, dim_q=0),
            z=exact.embed_z(),
            q=np.zeros((exact.n, 0)),
            window_z=T,
            window_q=0.0,
            core_z=T,
            core_q=0.0,
            provenance=f"model_set(silver,W=[{lo:.12g},{hi:.12g}],T={T:.12g})",
            exact=exact,
        )
    basis = scheme.basis
    p, i = scheme.physical_dim, scheme.internal_dim
    n = p + i
    lo = np.array([-T] * p + [w[0] for w in scheme.window])
    hi = np.array([T] * p + [w[1] for w in scheme.window])
    corners = np.array(
        [[lo[j] if (m >> j) & 1 else hi[j] for j in range(n)] for m in range(1 << n)]
    )
    coeff_corners = corners @ np.linalg.inv(basis).T
    c_lo = np.floor(coeff_corners.min(axis=0)).astype(int) - 1
    c_hi = np.ceil(coeff_corners.max(axis=0)).astype(int) + 1
    counts = c_hi - c_lo + 1
    total = int(np.prod(counts.astype(float)))
    if total > 20_000_000:
        raise InsufficientWindowError(
            f"coefficient box holds {total} candidates; shrink T or the window"
        )
    axes = [np.arange(c_lo[j], c_hi[j] + 1) for j in range(n)]
    coeffs = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    x = coeffs @ basis.T
    mask = np.all(x >= lo[None, :], axis=1) & np.all(x <= hi[None, :], axis=1)
    phys = x[mask][:, :p]
    exact = None
    if np.array_equal(basis, np.round(basis)):
        exact_z = np.round(phys).astype(np.int64)
        if np.array_equal(exact_z, phys):
            exact = ExactCoords.from_int_rows(exact_z, np.zeros((len(phys), 0)))
    return make_patch(
        group=abelian_group(dim_z=p, dim_q=0),
        z=phys,
        q=np.zeros((len(phys), 0)),
        window_z=T,
        window_q=0.0,
        core_z=T,
        core_q=0.0,
        provenance=f"model_set(matrix,p={p},i={i},T={T:.12g})",
        exact=exact,
    )


def cartesian_flat(p1: PointPatch, p2: PointPatch) -> PointPatch:
    """Direct product of two flat patches, concatenating z coordinates."""
    if p1.dim_q or p2.dim_q:
        raise ValueError("cartesian_flat expects flat patches")
    n, m = p1.n, p2.n
    z = np.concatenate(
        [
            np.repeat(p1.z, m, axis=0),
            np.tile(p2.z, (n, 1)),
        ],
        axis=1,
    )
    exact = None
    if p1.exact is not None and p2.exact is not None and p1.exact.d == p2.exact.d:
        za = np.concatenate([np.repeat(p1.exact.za, m, axis=0), np.tile(p2.exact.za, (n, 1))], axis=1)
        zb = np.concatenate([np.repeat(p1.exact.zb, m, axis=0), np.tile(p2.exact.zb, (n, 1))], axis=1)
        empty = np.zeros((n * m, 0), dtype=np.int64)
        exact = ExactCoords(za=za, zb=zb, qa=empty, qb=empty, d=p1.exact.d)
    return make_patch(
        group=abelian_group(dim_z=p1.dim_z + p2.dim_z, dim_q=0),
        z=z,
        q=np.zeros((n * m, 0)),
        window_z=max(p1.window_z, p2.window_z),
        window_q=0.0,
        core_z=min(p1.core_z, p2.core_z),
        core_q=0.0,
        provenance=f"cartesian({p1.provenance[:40]},{p2.provenance[:40]})",
        exact=exact,
    )


def _is_symmetric_with_identity(p: PointPatch) -> bool:
    from .pointset import inverse_set

    ident = tuple(np.zeros(p.key_matrix.shape[1], dtype=np.int64).tolist())
    if ident not in p.key_set:
        return False
    return {tuple(r) for r in inverse_set(p).key_matrix.tolist()} == p.key_set


@dataclass(frozen=True)
class ConditionReport:
    """Patch-level verdict on beta(Delta^2, Delta) subset of Xi^k."""

    holds: bool
    k: int
    n_checked: int
    max_abs_beta: float
    coverage: float
    witness: Optional[tuple[float, ...]]


def check_symplectic_condition(
    Xi: PointPatch, Delta: PointPatch, cocycle: Cocycle, k: int
) -> ConditionReport:
    """Verify every beta(d1 + d2, d3) over Delta lands in the k-fold sum
    of Xi, exactly when both sides carry exact coordinates, else within
    1e-9.

    Values are only certifiable inside the region the k-fold sum patch
    covers (k times the Xi window); a larger value raises an
    insufficient-window error rather than a verdict.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if Delta.n == 0:
        raise ValueError("empty Delta")
    if Delta.n ** 3 > 50_000_000:
        raise ValueError("Delta too large for the exhaustive condition check")
    # Pairwise beta values; triples follow from bilinearity.
    B = cocycle.beta_pairs(Delta.z, Delta.z)  # Delta is flat: its z block is q
    n = Delta.n
    dz = cocycle.dim_z
    triple = (B[:, None, :, :] + B[None, :, :, :]).reshape(n * n * n, dz)
    sum_patch = Xi
    for _ in range(k - 1):
        sum_patch = minkowski(sum_patch, Xi)
    coverage = k * Xi.window_z
    max_abs = float(np.abs(triple).max()) if triple.size else 0.0
    if max_abs > coverage + 1e-12:
        raise InsufficientWindowError(
            f"beta values reach {max_abs:.6g} but the {k}-fold sum only covers "
            f"[-{coverage:.6g}, {coverage:.6g}]; enlarge the Xi window"
        )
    exact_ok = (
        Xi.exact is not None
        and Delta.exact is not None
        and Xi.exact.d == Delta.exact.d
        and cocycle.is_integral
    )
    if exact_ok:
        M = cocycle.stack.astype(np.int64)
        ea, eb, d = Delta.exact.za, Delta.exact.zb, Delta.exact.d
        Ba = np.einsum("kij,ni,mj->nmk", M, ea, ea) + d * np.einsum("kij,ni,mj->nmk", M, eb, eb)
        Bb = np.einsum("kij,ni,mj->nmk", M, ea, eb) + np.einsum("kij,ni,mj->nmk", M, eb, ea)
        ta = (Ba[:, None, :, :] + Ba[None, :, :, :]).reshape(n * n * n, dz)
        tb = (Bb[:, None, :, :] + Bb[None, :, :, :]).reshape(n * n * n, dz)
        cols = []
        for c in range(dz):
            cols.extend((ta[:, c], tb[:, c]))
        keys = np.column_stack(cols)
        uniq = np.unique(keys, axis=0)
        member = {tuple(r) for r in sum_patch.key_matrix.tolist()}
        for row in uniq.tolist():
            if tuple(row) not in member:
                a = np.array(row[0::2], dtype=float)
                b = np.array(row[1::2], dtype=float)
                wit = tuple((a + b * math.sqrt(d)).tolist())
                return ConditionReport(
                    holds=False, k=k, n_checked=n ** 3, max_abs_beta=max_abs,
                    coverage=coverage, witness=wit,
                )
        return ConditionReport(
            holds=True, k=k, n_checked=n ** 3, max_abs_beta=max_abs,
            coverage=coverage, witness=None,
        )
    uniq = np.unique(triple, axis=0)
    if sum_patch.n == 0:
        return ConditionReport(
            holds=False, k=k, n_checked=n ** 3, max_abs_beta=max_abs,
            coverage=coverage, witness=tuple(uniq[0].tolist()),
        )
    dist, _ = cKDTree(sum_patch.z).query(uniq)
    bad = np.flatnonzero(dist > MATCH_TOL)
    if len(bad):
        return ConditionReport(
            holds=False, k=k, n_checked=n ** 3, max_abs_beta=max_abs,
            coverage=coverage, witness=tuple(uniq[bad[0]].tolist()),
        )
    return ConditionReport(
        holds=True, k=k, n_checked=n ** 3, max_abs_beta=max_abs,
        coverage=coverage, witness=None,
    )


def symplectic_product(
    Xi: PointPatch, Delta: PointPatch, G: CentralExtensionGroup, k: int = 2
) -> PointPatch:
    """Assemble the product set {(xi, delta)} in G = Z x_beta Q and attach
    the patch verdict on beta(Delta^2, Delta) subset of Xi^k to the
    provenance.

    Xi and Delta arrive as flat patches (Xi in the central block, Delta
    in the horizontal one); both must be symmetric and contain 0.
    """
    if Xi.dim_q or Delta.dim_q:
        raise ValueError("Xi and Delta must be flat patches")
    if Xi.dim_z != G.dim_z or Delta.dim_z != G.dim_q:
        raise ValueError("patch dimensions do not match the group")
    if not _is_symmetric_with_identity(Xi):
        raise ValueError("Xi must be symmetric and contain 0")
    if not _is_symmetric_with_identity(Delta):
        raise ValueError("Delta must be symmetric and contain 0")
    report = check_symplectic_condition(Xi, Delta, G.cocycle, k)
    n, m = Xi.n, Delta.n
    z = np.repeat(Xi.z, m, axis=0)
    q = np.tile(Delta.z, (n, 1))
    exact = None
    if Xi.exact is not None and Delta.exact is not None and Xi.exact.d == Delta.exact.d:
        exact = ExactCoords(
            za=np.repeat(Xi.exact.za, m, axis=0),
            zb=np.repeat(Xi.exact.zb, m, axis=0),
            qa=np.tile(Delta.exact.za, (n, 1)),
            qb=np.tile(Delta.exact.zb, (n, 1)),
            d=Xi.exact.d,
        )
    tag = f"beta_cond={'ok' if report.holds else 'fail'}(k={k})"
    return make_patch(
        group=G,
        z=z,
        q=q,
        window_z=Xi.window_z,
        window_q=Delta.window_z,
        core_z=Xi.core_z,
        core_q=Delta.core_z,
        provenance=f"symplectic({Xi.provenance[:30]},{Delta.provenance[:30]},{tag})",
        exact=exact,
    )


def project(P: PointPatch) -> PointPatch:
    """Projection to the q block, returned as a flat patch (deduplicated)."""
    if P.dim_q == 0:
        raise ValueError("patch has no q block to project to")
    exact = None
    if P.exact is not None:
        e = P.exact
        empty = np.zeros((e.n, 0), dtype=np.int64)
        exact = ExactCoords(za=e.qa, zb=e.qb, qa=empty, qb=empty, d=e.d)
    return make_patch(
        group=abelian_group(dim_z=P.dim_q, dim_q=0),
        z=P.q,
        q=np.zeros((P.n, 0)),
        window_z=P.window_q,
        window_q=0.0,
        core_z=P.core_q,
        core_q=0.0,
        provenance=f"project({P.provenance[:50]})",
        exact=exact,
    )


def fiber(P: PointPatch, delta: Sequence[float], tol: float = MATCH_TOL) -> np.ndarray:
    """z-parts of the points of P sitting over delta, as an (n, dim_z)
    array in canonical order.  An unmatched delta gives an empty array."""
    d = np.asarray(delta, dtype=float).reshape(P.dim_q)
    if P.n == 0:
        return np.zeros((0, P.dim_z))
    mask = np.all(np.abs(P.q - d[None, :]) <= tol, axis=1)
    return P.z[mask]


def _grid_covering(points: np.ndarray, radius: float, h: float) -> float:
    """sup over the box [-radius, radius]^dim of the distance to the point
    set, estimated on a grid of spacing h and padded by the grid slack."""
    dim = points.shape[1]
    if len(points) == 0:
        return math.inf
    k = int(math.floor(radius / h + 1e-9))
    axis = np.arange(-k, k + 1, dtype=float) * h
    if (len(axis)) ** dim > 5_000_000:
        raise ValueError("probe grid too fine; increase h")
    grid = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    dist, _ = cKDTree(points).query(grid)
    return float(dist.max()) + h * math.sqrt(dim) / 2.0


@dataclass(frozen=True)
class FiberReport:
    delta: tuple[float, ...]
    cardinality: int
    covering_estimate: float
    essential: bool


@dataclass(frozen=True)
class AlignmentReport:
    projection_min_gap: float
    fibers: tuple[FiberReport, ...]
    uniformly_large: bool
    essential_fraction: float
    R_threshold: float
    z_radius: float
    h: float


def alignment_report(
    P: PointPatch,
    R_threshold: float,
    h: float = 0.01,
    z_radius: Optional[float] = None,
) -> AlignmentReport:
    """Classify every fiber over the q-core as essential (covering
    estimate at most R_threshold on the z probe box) or not, and report
    the projection's minimum gap alongside.
    """
    if P.dim_q == 0 or P.dim_z == 0:
        raise ValueError("alignment needs both a z block and a q block")
    z_radius = P.core_z if z_radius is None else float(z_radius)
    if z_radius > P.core_z + 1e-12:
        raise BoundaryUnsoundError("z probe box exceeds the trusted z-core")
    if z_radius < R_threshold:
        raise InsufficientWindowError(
            f"z-core {z_radius:.6g} cannot witness denseness at scale {R_threshold:.6g}"
        )
    proj = project(P)
    gap = min_gap(proj)
    qkeys = P.q_key_matrix
    in_qcore = np.all(np.abs(P.q) <= P.core_q + 1e-12, axis=1)
    idx = np.flatnonzero(in_qcore)
    if len(idx) == 0:
        raise InsufficientWindowError("no points over the q-core")
    order = idx[np.lexsort(tuple(qkeys[idx][:, c] for c in range(qkeys.shape[1] - 1, -1, -1)))]
    keys_sorted = qkeys[order]
    starts = np.flatnonzero(
        np.concatenate([[True], np.any(keys_sorted[1:] != keys_sorted[:-1], axis=1)])
    )
    bounds = np.append(starts, len(order))
    reports: list[FiberReport] = []
    for s, e in zip(bounds[:-1], bounds[1:]):
        rows = order[s:e]
        delta = tuple(float(v) for v in P.q[rows[0]])
        zs = P.z[rows]
        est = _grid_covering(zs, z_radius, h)
        reports.append(
            FiberReport(
                delta=delta,
                cardinality=len(rows),
                covering_estimate=est,
                essential=bool(est <= R_threshold),
            )
        )
    ess = sum(1 for r in reports if r.essential)
    return AlignmentReport(
        projection_min_gap=gap,
        fibers=tuple(reports),
        uniformly_large=bool(ess == len(reports)),
        essential_fraction=ess / len(reports),
        R_threshold=float(R_threshold),
        z_radius=z_radius,
        h=h,
    )


def enforce_uniform_fibers(P: PointPatch, R: float, h: float = 0.01) -> PointPatch:
    """Keep only the columns of P*P whose fiber is R-relatively dense on
    the base core.

    The square is clipped back to the base patch's boxes (where products
    of core points fill it out) before fibers are classified; the result
    passes alignment_report at threshold R by construction.
    """
    if not _is_symmetric_with_identity(P):
        raise ValueError("patch must be symmetric and contain the identity")
    square = minkowski(P, P).restrict(z_box=P.window_z, q_box=P.window_q)
    square = square.take(
        np.arange(square.n), core_z=min(P.core_z, square.window_z),
        core_q=min(P.core_q, square.window_q),
    )
    rep = alignment_report(square, R, h=h)
    kept = {r.delta: r.essential for r in rep.fibers}
    keep_mask = np.zeros(square.n, dtype=bool)
    in_qcore = np.all(np.abs(square.q) <= square.core_q + 1e-12, axis=1)
    for i in np.flatnonzero(in_qcore):
        if kept.get(tuple(float(v) for v in square.q[i]), False):
            keep_mask[i] = True
    if not np.any(keep_mask):
        raise ThresholdTooSmallError(
            f"no fiber of the square is {R:.6g}-relatively dense on the core"
        )
    out = square.take(
        np.flatnonzero(keep_mask),
        window_z=square.window_z,
        window_q=square.core_q,
        core_z=square.core_z,
        core_q=square.core_q,
        provenance=f"uniform_fibers(R={R:.6g})({P.provenance[:40]})",
    )
    return out


def fiber_cardinality_profile(P: PointPatch, k_max: int) -> tuple[int, ...]:
    """Max fiber cardinality of P^k on the base core, for k = 1..k_max."""
    if k_max < 1:
        raise ValueError("k_max must be positive")
    if P.n == 0:
        raise InsufficientWindowError("empty patch")
    out: list[int] = []
    current = P
    for k in range(1, k_max + 1):
        clipped = current.restrict(z_box=P.window_z, q_box=P.window_q)
        mask = np.ones(clipped.n, dtype=bool)
        if clipped.dim_z:
            mask &= np.all(np.abs(clipped.z) <= P.core_z + 1e-12, axis=1)
        if clipped.dim_q:
            mask &= np.all(np.abs(clipped.q) <= P.core_q + 1e-12, axis=1)
        rows = np.flatnonzero(mask)
        if len(rows) == 0:
            raise InsufficientWindowError(f"P^{k} has no points on the base core")
        qk = clipped.q_key_matrix[rows]
        if qk.shape[1] == 0:
            out.append(len(rows))
        else:
            _, counts = np.unique(qk, axis=0, return_counts=True)
            out.append(int(counts.max()))
        if k < k_max:
            current = minkowski(clipped, P)
    return tuple(out)
