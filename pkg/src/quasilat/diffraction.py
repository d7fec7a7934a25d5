"""Finite-volume autocorrelation and central diffraction.

The autocorrelation of a patch accumulates the differences x^-1 y with
x running over a gauge ball and gauge(x^-1 y) capped at a range cutoff;
atoms are keyed by exact coordinates whenever the patch carries them,
so one Bragg atom never splits under float fuzz.  The central slice
(atoms over q = 0) is a positive-definite measure on the z block, and
its Wiener average against a character estimates the diffraction atom
at that frequency, which Palm coefficients must reproduce.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateDensityError, InsufficientWindowError, WindowShortfallError
from .group import ball_volume, gauge_ball_volume
from .pointset import ExactCoords, PointPatch, _as_block
from .spectral import Character, SampledFunction, palm_profile, twisted_density


@dataclass(frozen=True)
class WeightedPointMeasure:
    """Finitely many weighted atoms in R^dim_z x R^dim_q."""

    dim_z: int
    dim_q: int
    z: np.ndarray
    q: np.ndarray
    weights: np.ndarray
    range_: float
    normalization: float
    exact: Optional[ExactCoords] = None

    def __post_init__(self) -> None:
        z = _as_block(self.z, self.dim_z)
        q = _as_block(self.q, self.dim_q)
        w = np.ascontiguousarray(self.weights, dtype=float).reshape(len(z))
        for arr in (z, q, w):
            arr.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "weights", w)
        if len(q) != len(z):
            raise ValueError("z and q atom blocks disagree")
        if self.exact is not None and self.exact.n != len(z):
            raise ValueError("exact keys disagree with atom count")

    @property
    def n_atoms(self) -> int:
        return len(self.weights)

    def weight_at(self, z: Sequence[float], q: Sequence[float] = (), tol: float = 1e-9) -> float:
        zq = np.asarray(z, dtype=float).reshape(self.dim_z)
        qq = np.asarray(q, dtype=float).reshape(self.dim_q)
        mask = np.all(np.abs(self.z - zq[None, :]) <= tol, axis=1)
        if self.dim_q:
            mask &= np.all(np.abs(self.q - qq[None, :]) <= tol, axis=1)
        idx = np.flatnonzero(mask)
        return float(self.weights[idx].sum()) if len(idx) else 0.0


def _expand_ranges(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row indices (repeated) and flat column indices for slices
    [lo[i], hi[i]) of a sorted array."""
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    rows = np.repeat(np.arange(len(lo), dtype=np.int64), counts)
    offsets = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(counts) - counts, counts)
    cols = np.repeat(lo, counts) + offsets
    return rows, cols


def _aggregate_keys(keys: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum counts over equal key rows; returns (unique keys, summed counts)."""
    if len(keys) == 0:
        return keys, counts
    order = np.lexsort(tuple(keys[:, c] for c in range(keys.shape[1] - 1, -1, -1)))
    ks = keys[order]
    cs = counts[order]
    new = np.concatenate([[True], np.any(ks[1:] != ks[:-1], axis=1)])
    starts = np.flatnonzero(new)
    summed = np.add.reduceat(cs, starts)
    return ks[starts], summed


def _flat_autocorrelation(P: PointPatch, T: float, range_: float) -> WeightedPointMeasure:
    dz = P.dim_z
    vol = ball_volume(dz, T)
    if dz == 1:
        zs = P.z[:, 0]
        x_idx = np.flatnonzero(np.abs(zs) <= T + 1e-12)
        lo = np.searchsorted(zs, zs[x_idx] - range_ - 1e-9)
        hi = np.searchsorted(zs, zs[x_idx] + range_ + 1e-9, side="right")
        rows, cols = _expand_ranges(lo, hi)
        i_idx = x_idx[rows]
        dvals = zs[cols] - zs[i_idx]
        keep = np.abs(dvals) <= range_ + 1e-12
        i_idx, cols, dvals = i_idx[keep], cols[keep], dvals[keep]
        if P.exact is not None:
            dza = P.exact.za[cols, 0] - P.exact.za[i_idx, 0]
            dzb = P.exact.zb[cols, 0] - P.exact.zb[i_idx, 0]
            keys = np.column_stack([dza, dzb])
            uniq, counts = np.unique(keys, axis=0, return_counts=True)
            z_atoms = (uniq[:, 0] + uniq[:, 1] * math.sqrt(P.exact.d)).reshape(-1, 1)
            exact = ExactCoords(
                za=uniq[:, :1], zb=uniq[:, 1:2],
                qa=np.zeros((len(uniq), 0), dtype=np.int64),
                qb=np.zeros((len(uniq), 0), dtype=np.int64),
                d=P.exact.d,
            )
        else:
            keys = np.round(dvals / 1e-9).astype(np.int64).reshape(-1, 1)
            uniq, counts = np.unique(keys, axis=0, return_counts=True)
            z_atoms = (uniq[:, 0] * 1e-9).reshape(-1, 1)
            exact = None
        return WeightedPointMeasure(
            dim_z=1, dim_q=0, z=z_atoms, q=np.zeros((len(z_atoms), 0)),
            weights=counts / vol, range_=range_, normalization=vol, exact=exact,
        )
    tree = cKDTree(P.z)
    norms = np.sqrt(np.sum(P.z * P.z, axis=1))
    x_idx = np.flatnonzero(norms <= T + 1e-12)
    key_rows: list[np.ndarray] = []
    for i in x_idx:
        js = np.asarray(tree.query_ball_point(P.z[i], range_ + 1e-9), dtype=np.int64)
        d = P.z[js] - P.z[i][None, :]
        keep = np.sqrt(np.sum(d * d, axis=1)) <= range_ + 1e-12
        key_rows.append(np.round(d[keep] / 1e-9).astype(np.int64))
    keys = np.concatenate(key_rows, axis=0) if key_rows else np.zeros((0, dz), dtype=np.int64)
    uniq, counts = np.unique(keys, axis=0, return_counts=True)
    return WeightedPointMeasure(
        dim_z=dz, dim_q=0, z=uniq * 1e-9, q=np.zeros((len(uniq), 0)),
        weights=counts / vol, range_=range_, normalization=vol, exact=None,
    )


def _mixed_autocorrelation(P: PointPatch, T: float, range_: float) -> WeightedPointMeasure:
    if P.dim_z != 1:
        raise NotImplementedError("mixed autocorrelation implemented for one central dimension")
    g = P.group
    vol = gauge_ball_volume(P.dim_z, P.dim_q, T)
    from .spectral import fiber_partition

    order, bounds = fiber_partition(P)
    n_fib = len(bounds) - 1
    deltas = P.q[order[bounds[:-1]]]
    fiber_z = []
    fiber_za = []
    fiber_zb = []
    fiber_rows = []
    for s, e in zip(bounds[:-1], bounds[1:]):
        rows = order[s:e]
        zvals = P.z[rows, 0]
        srt = np.argsort(zvals, kind="stable")
        fiber_rows.append(rows[srt])
        fiber_z.append(zvals[srt])
        if P.exact is not None:
            fiber_za.append(P.exact.za[rows[srt], 0])
            fiber_zb.append(P.exact.zb[rows[srt], 0])
    exact_mode = P.exact is not None and g.cocycle.is_integral
    dnorm = np.sqrt(np.sum(deltas * deltas, axis=1))
    x_fibers = np.flatnonzero(dnorm <= T + 1e-12)
    center_tree = cKDTree(deltas)
    r2 = range_ * range_
    all_keys: list[np.ndarray] = []
    all_counts: list[np.ndarray] = []
    M_int = g.cocycle.stack.astype(np.int64)
    d_rad = P.exact.d if P.exact is not None else 2
    for fi in x_fibers:
        z1 = fiber_z[fi]
        x_mask = np.abs(z1) <= T * T + 1e-12
        if not np.any(x_mask):
            continue
        z1m = z1[x_mask]
        neighbors = sorted(center_tree.query_ball_point(deltas[fi], range_ + 1e-9))
        for fj in neighbors:
            dq = deltas[fj] - deltas[fi]
            if math.sqrt(float(np.dot(dq, dq))) > range_ + 1e-12:
                continue
            c = float(g.cocycle.beta(deltas[fi], deltas[fj])[0])
            z2 = fiber_z[fj]
            lo = np.searchsorted(z2, z1m + c - r2 - 1e-9)
            hi = np.searchsorted(z2, z1m + c + r2 + 1e-9, side="right")
            rows, cols = _expand_ranges(lo, hi)
            if len(rows) == 0:
                continue
            dz = z2[cols] - z1m[rows] - c
            keep = np.abs(dz) <= r2 + 1e-12
            rows, cols, dz = rows[keep], cols[keep], dz[keep]
            if len(rows) == 0:
                continue
            if exact_mode:
                qa_i = P.exact.qa[fiber_rows[fi][0]]
                qb_i = P.exact.qb[fiber_rows[fi][0]]
                qa_j = P.exact.qa[fiber_rows[fj][0]]
                qb_j = P.exact.qb[fiber_rows[fj][0]]
                ca = int(np.einsum("kij,i,j->k", M_int, qa_i, qa_j)[0]) + d_rad * int(
                    np.einsum("kij,i,j->k", M_int, qb_i, qb_j)[0]
                )
                cb = int(np.einsum("kij,i,j->k", M_int, qa_i, qb_j)[0]) + int(
                    np.einsum("kij,i,j->k", M_int, qb_i, qa_j)[0]
                )
                x_rows = np.flatnonzero(x_mask)[rows]
                dza = fiber_za[fj][cols] - fiber_za[fi][x_rows] - ca
                dzb = fiber_zb[fj][cols] - fiber_zb[fi][x_rows] - cb
                dqa = qa_j - qa_i
                dqb = qb_j - qb_i
                pair_keys = np.column_stack([dza, dzb])
                uniqk, cnt = np.unique(pair_keys, axis=0, return_counts=True)
                fixed = np.empty(2 * len(dqa), dtype=np.int64)
                fixed[0::2] = dqa
                fixed[1::2] = dqb
                full = np.column_stack([uniqk, np.tile(fixed, (len(uniqk), 1))])
                all_keys.append(full)
                all_counts.append(cnt)
            else:
                keyz = np.round(dz / 1e-9).astype(np.int64).reshape(-1, 1)
                uniqk, cnt = np.unique(keyz, axis=0, return_counts=True)
                keyq = np.round(dq / 1e-9).astype(np.int64)
                full = np.column_stack(
                    [uniqk, np.repeat(keyq[None, :], len(uniqk), axis=0)]
                )
                all_keys.append(full)
                all_counts.append(cnt)
    if not all_keys:
        empty = np.zeros((0, P.dim_q))
        return WeightedPointMeasure(
            dim_z=1, dim_q=P.dim_q, z=np.zeros((0, 1)), q=empty,
            weights=np.zeros(0), range_=range_, normalization=vol, exact=None,
        )
    keys = np.concatenate(all_keys, axis=0)
    counts = np.concatenate(all_counts, axis=0).astype(np.int64)
    keys, counts = _aggregate_keys(keys, counts)
    if exact_mode:
        dq_cols = keys[:, 2:]
        z_atoms = (keys[:, 0] + keys[:, 1] * math.sqrt(d_rad)).reshape(-1, 1)
        qa = dq_cols[:, 0::2]
        qb = dq_cols[:, 1::2]
        q_atoms = qa + qb * math.sqrt(d_rad)
        exact = ExactCoords(za=keys[:, :1], zb=keys[:, 1:2], qa=qa, qb=qb, d=d_rad)
    else:
        z_atoms = (keys[:, 0] * 1e-9).reshape(-1, 1)
        q_atoms = keys[:, 1:] * 1e-9
        exact = None
    return WeightedPointMeasure(
        dim_z=1, dim_q=P.dim_q, z=z_atoms, q=q_atoms,
        weights=counts / vol, range_=range_, normalization=vol, exact=exact,
    )


def autocorrelation(P: PointPatch, T: float, range_: float) -> WeightedPointMeasure:
    """eta_T = (1/vol(B_T)) sum_{x in P, gauge(x) <= T}
                sum_{y in P, gauge(x^-1 y) <= range} delta_{x^-1 y}.

    B_T is the gauge ball of the group.  The patch core must support
    every y reachable from the ball within the range cutoff.
    """
    if P.n == 0:
        raise InsufficientWindowError("empty patch")
    T = float(T)
    range_ = float(range_)
    if T <= 0 or range_ <= 0:
        raise ValueError("T and range must be positive")
    if P.dim_q == 0:
        need = T + range_
        if P.core_z + 1e-9 < need:
            raise WindowShortfallError(
                f"averaging to T={T:.6g} with range {range_:.6g} needs core "
                f"{need:.6g}, patch has {P.core_z:.6g}"
            )
        return _flat_autocorrelation(P, T, range_)
    drift = P.group.cocycle.drift_bound
    need_q = T + range_
    need_z = T * T + range_ * range_ + drift * T * range_
    if P.core_q + 1e-9 < need_q or P.core_z + 1e-9 < need_z:
        raise WindowShortfallError(
            f"averaging to T={T:.6g} with range {range_:.6g} needs cores "
            f"(z={need_z:.6g}, q={need_q:.6g}), patch has "
            f"(z={P.core_z:.6g}, q={P.core_q:.6g})"
        )
    return _mixed_autocorrelation(P, T, range_)


def central_autocorrelation(eta: WeightedPointMeasure) -> WeightedPointMeasure:
    """Atoms of eta sitting over q = 0, as a measure on the z block."""
    if eta.dim_q == 0:
        return eta
    if eta.exact is not None:
        mask = np.all(eta.exact.qa == 0, axis=1) & np.all(eta.exact.qb == 0, axis=1)
    else:
        mask = np.all(np.abs(eta.q) <= 1e-9, axis=1)
    idx = np.flatnonzero(mask)
    exact = None
    if eta.exact is not None:
        e = eta.exact.take(idx)
        exact = ExactCoords(
            za=e.za, zb=e.zb,
            qa=np.zeros((len(idx), 0), dtype=np.int64),
            qb=np.zeros((len(idx), 0), dtype=np.int64),
            d=e.d,
        )
    return WeightedPointMeasure(
        dim_z=eta.dim_z,
        dim_q=0,
        z=eta.z[idx],
        q=np.zeros((len(idx), 0)),
        weights=eta.weights[idx],
        range_=eta.range_,
        normalization=eta.normalization,
        exact=exact,
    )


def diffraction_atom(eta_e: WeightedPointMeasure, xi: Character, T: float) -> float:
    """Wiener average (1/vol(B_T)) Re sum_z c_eta(z) conj(xi(z)) of the
    central autocorrelation, estimating the diffraction atom at xi."""
    if eta_e.dim_q != 0:
        raise ValueError("expected a central (q = 0) measure")
    if eta_e.n_atoms == 0:
        return 0.0
    norms = np.sqrt(np.sum(eta_e.z * eta_e.z, axis=1))
    if float(norms.max()) > T + 1e-9:
        raise InsufficientWindowError(
            f"support reaches {norms.max():.6g}, beyond the Wiener radius {T:.6g}"
        )
    phases = xi.conj_values(eta_e.z)
    total = np.sum(eta_e.weights * phases)
    return float(total.real) / ball_volume(eta_e.dim_z, T)


@dataclass(frozen=True)
class BraggReport:
    thetas: np.ndarray
    c_values: np.ndarray
    peak_mask: np.ndarray
    c_1: float
    max_gap: float
    eps: float
    K: float
    h: float
    S: float
    T: float

    @property
    def peaks(self) -> np.ndarray:
        return self.thetas[self.peak_mask]


def bragg_scan(
    P: PointPatch,
    eps: float,
    K: float,
    h: float,
    S: float,
    T: float,
) -> BraggReport:
    """Scan c_xi over the frequency grid and keep theta with
    c_xi >= (1 - eps) * c_1."""
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    m = P.dim_z
    k = int(math.floor(K / h + 1e-9))
    axis = np.arange(-k, k + 1, dtype=float) * h
    if len(axis) ** m > 40_000_000:
        raise ValueError("frequency grid too fine; increase h")
    grid = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
    c1 = float(palm_profile(P, np.zeros((1, m)), S, T)[0])
    if c1 < 1e-9:
        raise DegenerateDensityError(f"c_1 = {c1:.3g} is below 1e-9")
    c_values = palm_profile(P, grid, S, T)
    mask = c_values >= (1.0 - eps) * c1
    peaks = grid[mask]
    if len(peaks) < 2:
        gap = math.inf
    elif m == 1:
        gap = float(np.max(np.diff(np.sort(peaks[:, 0]))))
    else:
        dist, _ = cKDTree(peaks).query(grid)
        gap = 2.0 * float(dist.max())
    return BraggReport(
        thetas=grid,
        c_values=c_values,
        peak_mask=mask,
        c_1=c1,
        max_gap=gap,
        eps=float(eps),
        K=float(K),
        h=float(h),
        S=float(S),
        T=float(T),
    )


@dataclass(frozen=True)
class ConsistencyReport:
    lhs: complex
    rhs: complex
    residual: float
    warning: Optional[str]


def projection_consistency(
    P: PointPatch,
    psi_grid: np.ndarray,
    psi_values: np.ndarray,
    phi: SampledFunction,
    xi: Character,
    T: float,
    h_z: float,
) -> ConsistencyReport:
    """Compare the quadrature projection
    (1/vol(F_T)) int_{F_T} conj(xi(z)) * sum_x psi(z_x - z) phi(q_x) dz
    against the closed form D_xi(identity fiber) * f_xi * sum phi(delta).
    """
    if P.dim_z != 1:
        raise NotImplementedError("consistency check implemented for one central dimension")
    psi_grid = np.asarray(psi_grid, dtype=float).reshape(-1)
    psi_values = np.asarray(psi_values, dtype=float).reshape(-1)
    if len(psi_grid) < 2 or len(psi_grid) != len(psi_values):
        raise ValueError("psi needs at least two samples on a uniform grid")
    spacing = float(psi_grid[1] - psi_grid[0])
    if not np.allclose(np.diff(psi_grid), spacing, rtol=0, atol=1e-12):
        raise ValueError("psi grid must be uniform")
    warning = None
    if h_z > spacing + 1e-15:
        warning = (
            f"quadrature step {h_z:.3g} is coarser than the psi sampling "
            f"{spacing:.3g}; the projection integral may under-resolve psi"
        )
    # Select the columns where phi is nonzero.
    if P.dim_q:
        phi_at_points = phi.lookup(P.q)
    else:
        phi_at_points = np.ones(P.n, dtype=complex)
    live = np.flatnonzero(phi_at_points != 0)
    lhs = 0.0 + 0.0j
    n_steps = int(round(2 * T / h_z))
    step = 2 * T / n_steps
    nodes = -T + step * np.arange(n_steps + 1)
    node_w = np.full(len(nodes), step)
    node_w[0] *= 0.5
    node_w[-1] *= 0.5
    if len(live):
        zx = P.z[live, 0]
        amp = phi_at_points[live]
        block = max(1, 10_000_000 // max(len(live), 1))
        acc = np.zeros(len(nodes), dtype=complex)
        for i0 in range(0, len(nodes), block):
            chunk = nodes[i0 : i0 + block]
            args = zx[:, None] - chunk[None, :]
            vals = np.interp(args.ravel(), psi_grid, psi_values, left=0.0, right=0.0).reshape(args.shape)
            acc[i0 : i0 + block] = amp @ vals
        conj_phase = np.exp(-2j * math.pi * xi.theta[0] * nodes)
        lhs = complex(np.sum(node_w * conj_phase * acc)) / (2 * T)
    # Closed form.
    if P.dim_q:
        ident = P.z[np.all(np.abs(P.q) <= 1e-9, axis=1), 0]
    else:
        ident = P.z[:, 0]
    dens = twisted_density(ident.reshape(-1, 1), xi, [T], core=P.core_z)
    f_xi = complex(
        np.sum(psi_values * np.exp(2j * math.pi * xi.theta[0] * psi_grid)) * spacing
    )
    if P.dim_q:
        phi_sum = complex(np.sum(phi.lookup(np.unique(P.q, axis=0))))
    else:
        phi_sum = 1.0 + 0.0j
    rhs = dens.value * f_xi * phi_sum
    return ConsistencyReport(
        lhs=lhs,
        rhs=rhs,
        residual=abs(lhs - rhs),
        warning=warning,
    )
