"""Twisted densities along Folner balls and their Palm averages.

The basic object is the approximant

    D_xi(fiber, T) = (1/vol(B_T)) * sum_{z in fiber, |z| <= T} conj(xi(z))

over Euclidean balls in the central block.  Palm coefficients average
|D_xi|^2 over the projected points in a q-ball; for split lattices the
twisted periodization operator is evaluated directly from its closed
form.  All summation runs in sorted order (by |z|, then lexicographic)
so repeated runs produce identical bits.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .cutproject import fiber as extract_fiber
from .cutproject import project
from .errors import InsufficientWindowError
from .group import Cocycle, GroupElement, ball_volume
from .pointset import PointPatch, translate

CONVERGENCE_ABS = 1e-3
CONVERGENCE_REL = 0.05

_THREADS = 1


def set_threads(n: int) -> None:
    """Worker count for the frequency-batch maps.  Results are written
    into preassigned output slots, so any count gives identical bits."""
    global _THREADS
    _THREADS = max(1, int(n))


def _map_blocks(fn, starts: Sequence[int]) -> None:
    if _THREADS <= 1 or len(starts) <= 1:
        for s in starts:
            fn(s)
        return
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=_THREADS) as pool:
        list(pool.map(fn, starts))


@dataclass(frozen=True)
class Character:
    """xi_theta(z) = exp(2 pi i <theta, z>) on the central block."""

    theta: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))

    @property
    def dim(self) -> int:
        return len(self.theta)

    def value(self, z: Sequence[float]) -> complex:
        return cmath.exp(2j * math.pi * float(np.dot(self.theta, z)))

    def conj_values(self, z: np.ndarray) -> np.ndarray:
        """conj(xi(z)) for an (n, dim) array of z rows."""
        phase = z @ np.asarray(self.theta)
        return np.exp(-2j * math.pi * phase)


def character(*theta: float) -> Character:
    return Character(theta=tuple(theta))


def default_schedule(T_max: float, ratio: float = 1.3, T_min: float = 1.0) -> tuple[float, ...]:
    """Geometric T-schedule ending exactly at T_max."""
    if T_max <= 0:
        raise ValueError("T_max must be positive")
    if ratio <= 1:
        raise ValueError("ratio must exceed 1")
    out = [float(T_max)]
    while out[-1] / ratio >= T_min:
        out.append(out[-1] / ratio)
    return tuple(reversed(out))


@dataclass(frozen=True)
class DensityEstimate:
    value: complex
    T_final: float
    partials: tuple[tuple[float, complex], ...]
    cauchy_tail: float
    converged: bool
    n_points: int


def _as_rows(fiber: Union[np.ndarray, Sequence], dim_hint: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(fiber, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim_hint in (None, 1) else arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError("fiber must be a sequence of z-vectors")
    return arr


def twisted_density(
    fiber: Union[np.ndarray, Sequence],
    xi: Character,
    T_schedule: Sequence[float],
    core: Optional[float] = None,
) -> DensityEstimate:
    """Ball-averaged twisted sums of the fiber at each T of the schedule.

    The caller vouches for the fiber through `core`: the largest radius
    on which the fiber is complete.  Defaults to the largest point norm,
    which is only safe when the fiber was cut to exactly that ball.
    """
    z = _as_rows(fiber)
    schedule = [float(t) for t in T_schedule]
    if not schedule or any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("T_schedule must be nonempty and strictly increasing")
    if schedule[0] <= 0:
        raise ValueError("T values must be positive")
    norms = np.sqrt(np.sum(z * z, axis=1))
    if core is None:
        core = float(norms.max()) if len(norms) else 0.0
    if schedule[-1] > core + 1e-9:
        raise InsufficientWindowError(
            f"schedule reaches T={schedule[-1]:.6g} but the fiber is only "
            f"complete to radius {core:.6g}"
        )
    m = z.shape[1]
    order = np.lexsort(tuple(z[:, k] for k in range(m - 1, -1, -1)) + (norms,))
    norms_sorted = norms[order]
    phases = np.cumsum(xi.conj_values(z[order])) if len(order) else np.zeros(0, dtype=complex)
    partials: list[tuple[float, complex]] = []
    for T in schedule:
        idx = int(np.searchsorted(norms_sorted, T + 1e-12, side="right"))
        total = complex(phases[idx - 1]) if idx > 0 else 0.0 + 0.0j
        partials.append((T, total / ball_volume(m, T)))
    value = partials[-1][1]
    start = (3 * len(partials)) // 4
    start = min(start, len(partials) - 1)
    tail = max(abs(v - value) for _, v in partials[start:])
    return DensityEstimate(
        value=value,
        T_final=schedule[-1],
        partials=tuple(partials),
        cauchy_tail=tail,
        converged=bool(tail < max(CONVERGENCE_REL * abs(value), CONVERGENCE_ABS)),
        n_points=len(z),
    )


def equivariance_residual(
    P: PointPatch,
    g: GroupElement,
    delta: Sequence[float],
    xi: Character,
    T: float,
) -> float:
    """|D_xi(g*P, q_g + delta, T) - conj(xi(z_g)) conj(xi(beta(q_g, delta))) D_xi(P, delta, T)|.

    The exact identity holds for infinite sets; on patches it decays
    like the boundary term of the ball, so residuals shrink along T.
    """
    delta_arr = np.asarray(delta, dtype=float).reshape(P.dim_q)
    shifted = translate(P, g)
    f_shift = extract_fiber(shifted, np.asarray(g.q) + delta_arr)
    f_base = extract_fiber(P, delta_arr)
    d_shift = twisted_density(f_shift.reshape(-1, P.dim_z), xi, [T], core=shifted.core_z)
    d_base = twisted_density(f_base.reshape(-1, P.dim_z), xi, [T], core=P.core_z)
    beta = P.group.cocycle.beta(np.asarray(g.q), delta_arr)
    phase = (xi.value(g.z) * xi.value(beta)).conjugate()
    return abs(d_shift.value - phase * d_base.value)


def fiber_partition(P: PointPatch) -> tuple[np.ndarray, np.ndarray]:
    """Order the patch rows by (q-key, |z|, z) and return (order, bounds);
    rows order[bounds[i]:bounds[i+1]] form one fiber."""
    qk = P.q_key_matrix
    znorm = np.sqrt(np.sum(P.z * P.z, axis=1))
    keys = tuple(P.z[:, c] for c in range(P.dim_z - 1, -1, -1)) + (znorm,)
    keys = keys + tuple(qk[:, c] for c in range(qk.shape[1] - 1, -1, -1))
    order = np.lexsort(keys)
    sorted_keys = qk[order]
    if sorted_keys.shape[1] == 0:
        starts = np.array([0], dtype=np.int64) if len(order) else np.zeros(0, dtype=np.int64)
    else:
        new = np.concatenate([[True], np.any(sorted_keys[1:] != sorted_keys[:-1], axis=1)])
        starts = np.flatnonzero(new)
    bounds = np.append(starts, len(order))
    return order, bounds


def palm_profile(
    P: PointPatch,
    thetas: np.ndarray,
    S: float,
    T: float,
) -> np.ndarray:
    """c_xi estimates for a whole batch of frequencies at once.

    Returns one nonnegative real per row of thetas; computation matches
    palm_coefficient exactly (same ordering and partial sums).
    """
    thetas = np.asarray(thetas, dtype=float).reshape(-1, P.dim_z)
    if P.dim_q == 0:
        if T > P.core_z + 1e-9:
            raise InsufficientWindowError(
                f"T={T:.6g} exceeds the trusted z-core {P.core_z:.6g}"
            )
        norms = np.sqrt(np.sum(P.z * P.z, axis=1))
        zm = P.z[norms <= T + 1e-12]
        vol = ball_volume(P.dim_z, T)
        out = np.empty(len(thetas))
        block = max(1, 20_000_000 // max(len(zm), 1))

        def run_abs(b0: int) -> None:
            th = thetas[b0 : b0 + block]
            vals = np.exp(-2j * math.pi * (zm @ th.T))
            out[b0 : b0 + block] = np.abs(vals.sum(axis=0) / vol) ** 2

        _map_blocks(run_abs, range(0, len(thetas), block))
        return out
    if S > P.core_q + 1e-9:
        raise InsufficientWindowError(
            f"S={S:.6g} exceeds the trusted q-core {P.core_q:.6g}"
        )
    if T > P.core_z + 1e-9:
        raise InsufficientWindowError(
            f"T={T:.6g} exceeds the trusted z-core {P.core_z:.6g}"
        )
    order, bounds = fiber_partition(P)
    z_sorted = P.z[order]
    znorm = np.sqrt(np.sum(z_sorted * z_sorted, axis=1))
    zmask = znorm <= T + 1e-12
    heads = order[bounds[:-1]] if len(bounds) > 1 else np.zeros(0, dtype=np.int64)
    delta_norms = np.sqrt(np.sum(P.q[heads] * P.q[heads], axis=1))
    fiber_sel = delta_norms <= S + 1e-12
    vol_z = ball_volume(P.dim_z, T)
    vol_q = ball_volume(P.dim_q, S)
    starts = bounds[:-1]
    out = np.empty(len(thetas))
    block = max(1, 40_000_000 // max(P.n, 1))

    def run_fibered(b0: int) -> None:
        th = thetas[b0 : b0 + block]
        phases = np.exp(-2j * math.pi * (z_sorted @ th.T)) * zmask[:, None]
        sums = np.add.reduceat(phases, starts, axis=0) if len(starts) else np.zeros((0, th.shape[0], ), dtype=complex)
        dens = np.abs(sums / vol_z) ** 2
        out[b0 : b0 + block] = dens[fiber_sel].sum(axis=0) / vol_q

    _map_blocks(run_fibered, range(0, len(thetas), block))
    return out


def palm_coefficient(P: PointPatch, xi: Character, S: float, T: float) -> float:
    """Palm-averaged central diffraction coefficient

        c_xi = (1/vol(B_S)) * sum_{delta in projection, |delta| <= S}
               |D_xi(fiber(P, delta), T)|^2,

    the spatial-orbit surrogate for the ensemble average.  In the
    absolute case (dim_q = 0) this is just |D_xi(P, T)|^2.
    """
    return float(palm_profile(P, np.array([xi.theta]), S, T)[0])


@dataclass(frozen=True)
class SampledFunction:
    """Function on Q known through samples at finitely many points."""

    points: np.ndarray
    values: np.ndarray
    support_radius: float

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        pts = pts.reshape(len(pts), -1)
        vals = np.asarray(self.values, dtype=complex).reshape(len(pts))
        pts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "support_radius", float(self.support_radius))

    @classmethod
    def indicator(cls, point: Sequence[float]) -> "SampledFunction":
        pt = np.asarray(point, dtype=float).reshape(1, -1)
        radius = float(np.abs(pt).max()) if pt.size else 0.0
        return cls(points=pt, values=np.ones(1, dtype=complex), support_radius=radius)

    @classmethod
    def on_patch_points(cls, points: np.ndarray, values: Sequence[complex]) -> "SampledFunction":
        pts = np.asarray(points, dtype=float)
        radius = float(np.abs(pts).max()) if pts.size else 0.0
        return cls(points=pts, values=np.asarray(values, dtype=complex), support_radius=radius)

    @property
    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))

    def lookup(self, queries: np.ndarray) -> np.ndarray:
        """Values at query rows; unmatched points give 0."""
        table = {
            tuple(np.round(p / 1e-9).astype(np.int64).tolist()): v
            for p, v in zip(self.points, self.values)
        }
        q = np.asarray(queries, dtype=float).reshape(-1, self.points.shape[1])
        out = np.zeros(len(q), dtype=complex)
        for i, row in enumerate(np.round(q / 1e-9).astype(np.int64)):
            out[i] = table.get(tuple(row.tolist()), 0.0)
        return out


@dataclass(frozen=True)
class SplitLatticeData:
    """What the periodization formula needs from a split lattice: the
    central fiber Xi, the projection Delta (both flat patches), the
    cocycle, and the twisted density of the identity fiber."""

    Xi: PointPatch
    Delta: PointPatch
    cocycle: Cocycle
    D_xi_e: complex


def split_data(P: PointPatch, xi: Character, T: float) -> SplitLatticeData:
    """Extract split-lattice data from a patch (all fibers translates)."""
    ident = extract_fiber(P, np.zeros(P.dim_q))
    dens = twisted_density(ident.reshape(-1, P.dim_z), xi, [T], core=P.core_z)
    xi_patch = P.take(
        np.flatnonzero(np.all(np.abs(P.q) <= 1e-9, axis=1) if P.dim_q else np.ones(P.n, bool))
    )
    from .group import abelian_group
    from .pointset import make_patch

    Xi = make_patch(
        group=abelian_group(P.dim_z, 0),
        z=xi_patch.z,
        q=np.zeros((xi_patch.n, 0)),
        window_z=P.window_z,
        window_q=0.0,
        core_z=P.core_z,
        core_q=0.0,
        provenance="split_xi",
    )
    Delta = project(P)
    return SplitLatticeData(Xi=Xi, Delta=Delta, cocycle=P.group.cocycle, D_xi_e=dens.value)


def twisted_periodization(
    split: SplitLatticeData,
    phi: SampledFunction,
    xi: Character,
    at: GroupElement,
) -> complex:
    """P_xi phi at the point (z, q):

        D_xi(Lambda, e) * sum_{delta in Delta} phi(q + delta)
                          * conj(xi(z + beta(q, delta)))
    """
    q = np.asarray(at.q, dtype=float)
    z = np.asarray(at.z, dtype=float)
    if q.size and float(np.abs(q).max()) + phi.support_radius > split.Delta.core_z + 1e-9:
        raise InsufficientWindowError(
            "phi support shifted by q escapes the Delta core"
        )
    deltas = split.Delta.z  # Delta is flat: its z block holds q coordinates
    vals = phi.lookup(q[None, :] + deltas)
    live = np.flatnonzero(vals != 0)
    if len(live) == 0:
        return 0.0 + 0.0j
    beta = np.einsum("kij,i,nj->nk", split.cocycle.stack, q, deltas[live]) if q.size else np.zeros((len(live), len(z)))
    phases = np.exp(-2j * math.pi * ((z[None, :] + beta) @ np.asarray(xi.theta)))
    return complex(split.D_xi_e * np.sum(vals[live] * phases))


@dataclass(frozen=True)
class EpsilonDualReport:
    thetas: np.ndarray
    residuals: np.ndarray
    max_gap: float
    eps: float
    K: float
    h: float
    n_grid: int


def epsilon_dual(Xi: PointPatch, eps: float, K: float, h: float) -> EpsilonDualReport:
    """Grid frequencies theta in [-K, K]^dim_z with
    max_{z in Xi} |xi_theta(z) - 1| < eps, with their sup-residuals.

    |e^{i a} - 1| = 2 |sin(a/2)|, so the residual is
    2 * max_z |sin(pi <theta, z>)|.
    """
    if not (0 < eps <= 2):
        raise ValueError("eps must lie in (0, 2]")
    if h <= 0 or K <= 0:
        raise ValueError("K and h must be positive")
    if Xi.dim_q:
        raise ValueError("epsilon_dual expects a flat patch")
    if Xi.n == 0:
        raise ValueError("empty patch")
    m = Xi.dim_z
    k = int(math.floor(K / h + 1e-9))
    axis = np.arange(-k, k + 1, dtype=float) * h
    if len(axis) ** m > 40_000_000:
        raise ValueError("frequency grid too fine; increase h")
    grid = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
    res = np.empty(len(grid))
    block = max(1, 20_000_000 // max(Xi.n, 1))
    for i0 in range(0, len(grid), block):
        phase = grid[i0 : i0 + block] @ Xi.z.T
        res[i0 : i0 + block] = 2.0 * np.abs(np.sin(math.pi * phase)).max(axis=1)
    keep = res < eps
    thetas = grid[keep]
    residuals = res[keep]
    if len(thetas) < 2:
        gap = math.inf
    elif m == 1:
        gap = float(np.max(np.diff(np.sort(thetas[:, 0]))))
    else:
        from scipy.spatial import cKDTree

        dist, _ = cKDTree(thetas).query(grid)
        gap = 2.0 * float(dist.max())
    return EpsilonDualReport(
        thetas=thetas,
        residuals=residuals,
        max_gap=gap,
        eps=float(eps),
        K=float(K),
        h=float(h),
        n_grid=len(grid),
    )


@dataclass(frozen=True)
class SandwichReport:
    """Counts |Xi sandwiching the smoothed Folner integral."""

    count_inner: int
    integral: float
    count_outer: int
    T: float
    T_K: float
    h: float
    lower_ok: bool
    upper_ok: bool
    tolerance: float


def sandwich_check(
    Xi: PointPatch,
    T: float,
    T_K: float = 1.0,
    h: float = 1e-3,
    tolerance: float = 1e-3,
) -> SandwichReport:
    """|Xi cap B_T|  <=  int_{B_{T+T_K}} sum_x rho(x - n) dn  <=  |Xi cap B_{T+2T_K}|
    for the unit-mass quartic bump rho supported in [-T_K, T_K],
    evaluated by trapezoid quadrature at step h.
    """
    if Xi.dim_q or Xi.dim_z != 1:
        raise ValueError("sandwich_check expects a one dimensional flat patch")
    if Xi.core_z + 1e-9 < T + 2 * T_K:
        raise InsufficientWindowError(
            f"need the patch complete to {T + 2 * T_K:.6g}, core is {Xi.core_z:.6g}"
        )
    zs = Xi.z[:, 0]
    count_inner = int(np.count_nonzero(np.abs(zs) <= T + 1e-12))
    count_outer = int(np.count_nonzero(np.abs(zs) <= T + 2 * T_K + 1e-12))
    R = T + T_K
    n_steps = int(round(2 * R / h))
    nodes = -R + (2 * R / n_steps) * np.arange(n_steps + 1)
    step = 2 * R / n_steps
    heights = np.zeros(len(nodes))
    coef = 15.0 / (16.0 * T_K)
    for x in zs[np.abs(zs) <= T + 2 * T_K + 1e-12]:
        lo = np.searchsorted(nodes, x - T_K)
        hi = np.searchsorted(nodes, x + T_K, side="right")
        u = (nodes[lo:hi] - x) / T_K
        heights[lo:hi] += coef * (1.0 - u * u) ** 2
    weights = np.full(len(nodes), step)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    integral = float(np.dot(heights, weights))
    return SandwichReport(
        count_inner=count_inner,
        integral=integral,
        count_outer=count_outer,
        T=float(T),
        T_K=float(T_K),
        h=float(step),
        lower_ok=bool(integral >= count_inner - tolerance),
        upper_ok=bool(integral <= count_outer + tolerance),
        tolerance=float(tolerance),
    )
