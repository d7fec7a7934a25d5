"""Central extensions of R^dim_q by a central R^dim_z.

The group is R^dim_z x R^dim_q with product

    (z1, q1) * (z2, q2) = (z1 + z2 + beta(q1, q2), q1 + q2)

for an antisymmetric bilinear cocycle beta.  dim_q = 0 recovers the
abelian case, dim_z = 1 with the standard symplectic form on R^2 gives
the Heisenberg group.  The homogeneous gauge is max(|q|, |z|^(1/2))
except in the abelian cases, where the Euclidean norm of the only
surviving block is used so that gauge balls match ordinary balls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ring import QuadInt

Matrix = Sequence[Sequence[float]]


@dataclass(frozen=True)
class Cocycle:
    """Antisymmetric bilinear map beta: R^dim_q x R^dim_q -> R^dim_z.

    Stored as one dim_q x dim_q matrix per central coordinate, so
    beta(v, w)[k] = v . matrices[k] . w.
    """

    dim_z: int
    dim_q: int
    matrices: tuple[tuple[tuple[float, ...], ...], ...]
    _stack: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.dim_z < 0 or self.dim_q < 0:
            raise ValueError("dimensions must be nonnegative")
        if len(self.matrices) != self.dim_z:
            raise ValueError(f"expected {self.dim_z} matrices, got {len(self.matrices)}")
        stack = np.zeros((self.dim_z, self.dim_q, self.dim_q))
        for k, m in enumerate(self.matrices):
            arr = np.asarray(m, dtype=float)
            if self.dim_q == 0:
                arr = arr.reshape(0, 0)
            if arr.shape != (self.dim_q, self.dim_q):
                raise ValueError(f"matrix {k} has shape {arr.shape}, wanted ({self.dim_q}, {self.dim_q})")
            if not np.array_equal(arr, -arr.T):
                raise ValueError(f"matrix {k} is not antisymmetric")
            stack[k] = arr
        object.__setattr__(self, "_stack", stack)
        self._stack.setflags(write=False)

    @classmethod
    def from_matrices(cls, matrices: Sequence[Matrix], dim_q: int) -> "Cocycle":
        mats = tuple(tuple(tuple(float(x) for x in row) for row in m) for m in matrices)
        return cls(dim_z=len(mats), dim_q=dim_q, matrices=mats)

    @property
    def stack(self) -> np.ndarray:
        return self._stack

    @property
    def is_integral(self) -> bool:
        return bool(np.array_equal(self._stack, np.round(self._stack)))

    @property
    def drift_bound(self) -> float:
        """max_k |matrices[k]|_2, so |beta(v, w)| <= bound * |v| * |w|."""
        if self.dim_z == 0 or self.dim_q == 0:
            return 0.0
        return float(max(np.linalg.norm(self._stack[k], 2) for k in range(self.dim_z)))

    def box_drift(self, w1: float, w2: float) -> float:
        """Sup-norm bound on beta(v, w) over |v|_inf <= w1, |w|_inf <= w2."""
        if self.dim_z == 0 or self.dim_q == 0:
            return 0.0
        return float(np.abs(self._stack).sum(axis=(1, 2)).max()) * w1 * w2

    def beta(self, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        """beta of two single vectors, returned as a dim_z vector."""
        if self.dim_z == 0 or self.dim_q == 0:
            return np.zeros(self.dim_z)
        v = np.asarray(v, dtype=float).reshape(self.dim_q)
        w = np.asarray(w, dtype=float).reshape(self.dim_q)
        return np.einsum("kij,i,j->k", self._stack, v, w)

    def beta_rows(self, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Row-wise beta for (n, dim_q) arrays, returning (n, dim_z)."""
        n = len(v)
        if self.dim_z == 0 or self.dim_q == 0:
            return np.zeros((n, self.dim_z))
        return np.einsum("kij,ni,nj->nk", self._stack, v, w)

    def beta_pairs(self, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        """All-pairs beta for (n, dim_q) x (m, dim_q), returning (n, m, dim_z)."""
        if self.dim_z == 0 or self.dim_q == 0:
            return np.zeros((len(v), len(w), self.dim_z))
        return np.einsum("kij,ni,mj->nmk", self._stack, v, w)


def abelian_cocycle(dim_z: int, dim_q: int = 0) -> Cocycle:
    zero = tuple(tuple(tuple(0.0 for _ in range(dim_q)) for _ in range(dim_q)) for _ in range(dim_z))
    return Cocycle(dim_z=dim_z, dim_q=dim_q, matrices=zero)


def heisenberg_cocycle() -> Cocycle:
    """Standard symplectic form on R^2: beta(v, w) = v1*w2 - v2*w1."""
    return Cocycle.from_matrices([[[0.0, 1.0], [-1.0, 0.0]]], dim_q=2)


@dataclass(frozen=True)
class GroupElement:
    """A single group element with optional exact quadratic coordinates."""

    z: tuple[float, ...]
    q: tuple[float, ...]
    z_exact: Optional[tuple[QuadInt, ...]] = None
    q_exact: Optional[tuple[QuadInt, ...]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "z", tuple(float(v) for v in self.z))
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))
        if self.z_exact is not None and len(self.z_exact) != len(self.z):
            raise ValueError("exact z coordinates have wrong length")
        if self.q_exact is not None and len(self.q_exact) != len(self.q):
            raise ValueError("exact q coordinates have wrong length")

    @property
    def is_exact(self) -> bool:
        return self.z_exact is not None and self.q_exact is not None

    def key(self) -> tuple:
        if self.is_exact:
            return tuple(x.key() for x in self.z_exact) + tuple(x.key() for x in self.q_exact)
        return tuple(round(v / 1e-9) for v in self.z + self.q)


def element_from_ints(z: Sequence[int], q: Sequence[int], d: int = 2) -> GroupElement:
    return GroupElement(
        z=tuple(float(v) for v in z),
        q=tuple(float(v) for v in q),
        z_exact=tuple(QuadInt(int(v), 0, d) for v in z),
        q_exact=tuple(QuadInt(int(v), 0, d) for v in q),
    )


@dataclass(frozen=True)
class CentralExtensionGroup:
    """R^dim_z x_beta R^dim_q with the homogeneous dilation structure."""

    cocycle: Cocycle

    @property
    def dim_z(self) -> int:
        return self.cocycle.dim_z

    @property
    def dim_q(self) -> int:
        return self.cocycle.dim_q

    @property
    def is_abelian(self) -> bool:
        return self.dim_q == 0 or self.dim_z == 0 or not self._stack_nonzero()

    def _stack_nonzero(self) -> bool:
        return bool(np.any(self.cocycle.stack != 0.0))

    @property
    def is_nondegenerate(self) -> bool:
        """Whether q -> beta(q, .) is injective (needed for lattice towers)."""
        if self.dim_q == 0:
            return True
        if self.dim_z == 0:
            return False
        flat = self.cocycle.stack.reshape(self.dim_z * self.dim_q, self.dim_q)
        return int(np.linalg.matrix_rank(flat)) == self.dim_q

    def identity(self) -> GroupElement:
        d = 2
        return GroupElement(
            z=(0.0,) * self.dim_z,
            q=(0.0,) * self.dim_q,
            z_exact=tuple(QuadInt(0, 0, d) for _ in range(self.dim_z)),
            q_exact=tuple(QuadInt(0, 0, d) for _ in range(self.dim_q)),
        )

    def element(self, z: Sequence[float], q: Sequence[float]) -> GroupElement:
        z = tuple(float(v) for v in z)
        q = tuple(float(v) for v in q)
        if len(z) != self.dim_z or len(q) != self.dim_q:
            raise ValueError(f"element dims ({len(z)}, {len(q)}) do not match group ({self.dim_z}, {self.dim_q})")
        return GroupElement(z=z, q=q)

    def _check(self, g: GroupElement) -> None:
        if len(g.z) != self.dim_z or len(g.q) != self.dim_q:
            raise ValueError("element does not belong to this group")

    def mul(self, g: GroupElement, h: GroupElement) -> GroupElement:
        self._check(g)
        self._check(h)
        bz = self.cocycle.beta(np.array(g.q), np.array(h.q)) if self.dim_q else np.zeros(self.dim_z)
        z = tuple(g.z[k] + h.z[k] + bz[k] for k in range(self.dim_z))
        q = tuple(g.q[i] + h.q[i] for i in range(self.dim_q))
        z_exact = q_exact = None
        if g.is_exact and h.is_exact and self.cocycle.is_integral:
            q_exact = tuple(g.q_exact[i] + h.q_exact[i] for i in range(self.dim_q))
            stack = self.cocycle.stack
            z_exact = []
            for k in range(self.dim_z):
                acc = g.z_exact[k] + h.z_exact[k]
                for i in range(self.dim_q):
                    for j in range(self.dim_q):
                        c = int(stack[k, i, j])
                        if c:
                            prod = g.q_exact[i] * h.q_exact[j]
                            acc = acc + QuadInt(c * prod.a, c * prod.b, prod.d)
                z_exact.append(acc)
            z_exact = tuple(z_exact)
        return GroupElement(z=z, q=q, z_exact=z_exact, q_exact=q_exact)

    def inv(self, g: GroupElement) -> GroupElement:
        # beta(q, -q) = 0 by antisymmetry, so inversion is plain negation.
        self._check(g)
        z_exact = tuple(-x for x in g.z_exact) if g.z_exact is not None else None
        q_exact = tuple(-x for x in g.q_exact) if g.q_exact is not None else None
        return GroupElement(
            z=tuple(-v for v in g.z),
            q=tuple(-v for v in g.q),
            z_exact=z_exact,
            q_exact=q_exact,
        )

    def commutator(self, g: GroupElement, h: GroupElement) -> GroupElement:
        """[g, h] = g h g^-1 h^-1 = (2*beta(q_g, q_h), 0), computed directly."""
        return self.mul(self.mul(g, h), self.inv(self.mul(h, g)))

    def gauge(self, g: GroupElement) -> float:
        self._check(g)
        zn = math.sqrt(sum(v * v for v in g.z))
        qn = math.sqrt(sum(v * v for v in g.q))
        if self.dim_q == 0:
            return zn
        if self.dim_z == 0:
            return qn
        return max(qn, math.sqrt(zn))

    def distance(self, g: GroupElement, h: GroupElement) -> float:
        """Left-invariant distance gauge(g^-1 h)."""
        return self.gauge(self.mul(self.inv(g), h))

    def dilation(self, t: float, g: GroupElement) -> GroupElement:
        """delta_t(z, q) = (t^2 z, t q); an automorphism for every t."""
        self._check(g)
        t = float(t)
        return GroupElement(
            z=tuple(t * t * v for v in g.z),
            q=tuple(t * v for v in g.q),
        )

    # Array variants used by the patch machinery; rows are elements.

    def mul_rows(self, z1: np.ndarray, q1: np.ndarray, z2: np.ndarray, q2: np.ndarray):
        z = z1 + z2 + self.cocycle.beta_rows(q1, q2)
        return z, q1 + q2

    def gauge_rows(self, z: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Gauge of each row of (n, dim_z), (n, dim_q) coordinate arrays."""
        zn = np.sqrt(np.sum(z * z, axis=1))
        if self.dim_q == 0:
            return zn
        qn = np.sqrt(np.sum(q * q, axis=1))
        if self.dim_z == 0:
            return qn
        return np.maximum(qn, np.sqrt(zn))


def abelian_group(dim_z: int, dim_q: int = 0) -> CentralExtensionGroup:
    return CentralExtensionGroup(abelian_cocycle(dim_z, dim_q))


def heisenberg_group() -> CentralExtensionGroup:
    return CentralExtensionGroup(heisenberg_cocycle())


def ball_volume(dim: int, radius: float) -> float:
    """Lebesgue volume of the Euclidean dim-ball; the empty product is 1."""
    if dim == 0:
        return 1.0
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) * radius ** dim


def gauge_ball_volume(dim_z: int, dim_q: int, T: float) -> float:
    """Volume of {gauge <= T}: q-ball of radius T times z-ball of radius T^2,
    collapsing to the plain Euclidean ball in the abelian cases."""
    if dim_q == 0:
        return ball_volume(dim_z, T)
    if dim_z == 0:
        return ball_volume(dim_q, T)
    return ball_volume(dim_q, T) * ball_volume(dim_z, T * T)
