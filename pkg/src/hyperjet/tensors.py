"""Dense tensors of jets with explicit index variance.

Components live in numpy object arrays of :class:`~hyperjet.jets.Jet`;
variance is a string over ``'l'`` (lower) / ``'u'`` (upper), one letter per
index.  Contraction is a checked operation: it requires one upper and one
lower slot, so silent variance bugs become hard errors.  Raising and
lowering go through an explicit metric.
"""

from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np

from .jets import Jet


class Tensor:
    __slots__ = ("dim", "comps", "variance")

    def __init__(self, comps: np.ndarray, variance: str):
        comps = np.asarray(comps, dtype=object)
        if comps.ndim and not comps.flags.c_contiguous:
            # np.ascontiguousarray would promote 0-d arrays to 1-d
            comps = np.ascontiguousarray(comps)
        if comps.ndim != len(variance):
            raise ValueError(f"rank {comps.ndim} does not match variance {variance!r}")
        if any(n != (comps.shape[0] if comps.ndim else 0) for n in comps.shape):
            raise ValueError("tensor must be square in every slot")
        if any(v not in "lu" for v in variance):
            raise ValueError(f"variance letters must be 'l' or 'u': {variance!r}")
        self.dim = comps.shape[0] if comps.ndim else 0
        self.comps = comps
        self.variance = variance

    # -- construction ------------------------------------------------------

    @classmethod
    def zeros(cls, dim: int, variance: str, template: Jet) -> "Tensor":
        zero = template * 0
        comps = np.empty((dim,) * len(variance), dtype=object)
        comps[...] = zero
        return cls(comps, variance)

    @classmethod
    def from_function(cls, dim: int, variance: str, fn: Callable[..., Jet]) -> "Tensor":
        comps = np.empty((dim,) * len(variance), dtype=object)
        for idx in itertools.product(range(dim), repeat=len(variance)):
            comps[idx] = fn(*idx)
        return cls(comps, variance)

    @classmethod
    def scalar(cls, jet: Jet) -> "Tensor":
        comps = np.empty((), dtype=object)
        comps[()] = jet
        return cls(comps, "")

    @property
    def rank(self) -> int:
        return len(self.variance)

    def item(self) -> Jet:
        if self.rank != 0:
            raise ValueError("item() only on rank-0 tensors")
        return self.comps[()]

    def __getitem__(self, idx):
        return self.comps[idx]

    # -- linear structure --------------------------------------------------

    def _check_like(self, other: "Tensor"):
        if self.variance != other.variance or self.dim != other.dim:
            raise ValueError(
                f"tensor mismatch: {self.variance}/{self.dim} vs {other.variance}/{other.dim}"
            )

    def __add__(self, other: "Tensor") -> "Tensor":
        self._check_like(other)
        return Tensor(self.comps + other.comps, self.variance)

    def __sub__(self, other: "Tensor") -> "Tensor":
        self._check_like(other)
        return Tensor(self.comps - other.comps, self.variance)

    def __neg__(self) -> "Tensor":
        return Tensor(-self.comps, self.variance)

    def scale(self, factor) -> "Tensor":
        """Multiply every component by a Jet or plain scalar."""
        out = np.empty_like(self.comps)
        flat_in = self.comps.reshape(-1)
        flat_out = out.reshape(-1)
        for i, c in enumerate(flat_in):
            flat_out[i] = c * factor
        return Tensor(out, self.variance)

    def __mul__(self, factor):
        return self.scale(factor)

    def __rmul__(self, factor):
        return self.scale(factor)

    # -- index gymnastics --------------------------------------------------

    def transpose(self, perm: Sequence[int]) -> "Tensor":
        variance = "".join(self.variance[p] for p in perm)
        return Tensor(np.transpose(self.comps, perm), variance)

    def tensor_product(self, other: "Tensor") -> "Tensor":
        if self.rank == 0:
            return other.scale(self.item())
        if other.rank == 0:
            return self.scale(other.item())
        comps = np.multiply.outer(self.comps, other.comps)
        return Tensor(comps, self.variance + other.variance)

    def contract(self, i: int, j: int) -> "Tensor":
        """Sum slot i against slot j; one must be upper, the other lower."""
        if i == j:
            raise ValueError("cannot contract a slot with itself")
        if {self.variance[i], self.variance[j]} != {"l", "u"}:
            raise ValueError(
                f"contraction needs one upper and one lower slot; got "
                f"{self.variance[i]!r} and {self.variance[j]!r}"
            )
        comps = np.trace(self.comps, axis1=i, axis2=j)
        keep = [k for k in range(self.rank) if k not in (i, j)]
        variance = "".join(self.variance[k] for k in keep)
        return Tensor(np.asarray(comps, dtype=object), variance)

    def dot(self, other: "Tensor", pairs: Sequence[tuple]) -> "Tensor":
        """Tensor product followed by contractions of (self-slot, other-slot) pairs."""
        if not pairs:
            return self.tensor_product(other)
        for i, j in pairs:
            if {self.variance[i], other.variance[j]} != {"l", "u"}:
                raise ValueError(
                    f"contraction needs one upper and one lower slot; got "
                    f"{self.variance[i]!r} and {other.variance[j]!r}"
                )
        ci = [i for i, _ in pairs]
        cj = [j for _, j in pairs]
        keep_i = [k for k in range(self.rank) if k not in ci]
        keep_j = [k for k in range(other.rank) if k not in cj]
        A = np.transpose(self.comps, keep_i + ci)
        B = np.transpose(other.comps, cj + keep_j)
        a_shape = A.shape[: len(keep_i)]
        b_shape = B.shape[len(pairs):]
        K = int(np.prod(A.shape[len(keep_i):], dtype=int))
        A2 = A.reshape(-1, K)
        B2 = B.reshape(K, -1)
        out = None
        for k in range(K):
            term = np.multiply.outer(A2[:, k], B2[k, :])
            out = term if out is None else out + term
        variance = "".join(self.variance[k] for k in keep_i) + \
                   "".join(other.variance[k] for k in keep_j)
        comps = np.asarray(out.reshape(a_shape + b_shape), dtype=object)
        return Tensor(comps, variance)

    def symmetrize(self, slots: Sequence[int]) -> "Tensor":
        slots = list(slots)
        if len({self.variance[s] for s in slots}) != 1:
            raise ValueError("can only symmetrize slots of equal variance")
        perms = list(itertools.permutations(slots))
        total = None
        for perm in perms:
            mapping = list(range(self.rank))
            for s, p in zip(slots, perm):
                mapping[s] = p
            term = self.transpose(mapping)
            total = term if total is None else total + term
        return total.scale_rational(1, len(perms))

    def antisymmetrize(self, slots: Sequence[int]) -> "Tensor":
        slots = list(slots)
        total = None
        for perm in itertools.permutations(slots):
            sign = _perm_sign(slots, perm)
            mapping = list(range(self.rank))
            for s, p in zip(slots, perm):
                mapping[s] = p
            term = self.transpose(mapping)
            if sign < 0:
                term = -term
            total = term if total is None else total + term
        return total.scale_rational(1, _fact(len(slots)))

    def scale_rational(self, num: int, den: int) -> "Tensor":
        template = self.comps.reshape(-1)[0]
        if template.backend == "f64":
            return self.scale(num / den)
        from .backend import rational

        return self.scale(rational(num, den))

    def raise_index(self, slot: int, ginv: "Tensor") -> "Tensor":
        if self.variance[slot] != "l":
            raise ValueError("raise_index needs a lower slot")
        out = ginv.dot(self, [(1, slot)])
        # contracted result puts the new upper index first; move it back
        perm = list(range(1, slot + 1)) + [0] + list(range(slot + 1, self.rank))
        return out.transpose(perm) if slot else out

    def lower_index(self, slot: int, g: "Tensor") -> "Tensor":
        if self.variance[slot] != "u":
            raise ValueError("lower_index needs an upper slot")
        out = g.dot(self, [(1, slot)])
        perm = list(range(1, slot + 1)) + [0] + list(range(slot + 1, self.rank))
        return out.transpose(perm) if slot else out

    # -- diagnostics -------------------------------------------------------

    def max_abs(self) -> float:
        return max((c.max_abs() for c in self.comps.reshape(-1)), default=0.0)

    def value_array(self) -> np.ndarray:
        """Constant terms of all components, as floats."""
        out = np.empty(self.comps.shape)
        flat_in = self.comps.reshape(-1)
        flat_out = out.reshape(-1)
        for i, c in enumerate(flat_in):
            flat_out[i] = float(c.value)
        return out

    def map(self, fn: Callable[[Jet], Jet]) -> "Tensor":
        out = np.empty_like(self.comps)
        flat_in = self.comps.reshape(-1)
        flat_out = out.reshape(-1)
        for i, c in enumerate(flat_in):
            flat_out[i] = fn(c)
        return Tensor(out, self.variance)

    @property
    def degree(self) -> int:
        return min(c.degree for c in self.comps.reshape(-1))


def _perm_sign(ref, perm) -> int:
    perm = list(perm)
    sign = 1
    order = {v: i for i, v in enumerate(ref)}
    p = [order[v] for v in perm]
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def _fact(n: int) -> int:
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


def _inverse_perm(perm):
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return inv
