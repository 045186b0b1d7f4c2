"""Bivariate missingness mechanisms for a pair of tie variables sharing a node.

A mechanism gives ``g_rs(x_ij, x_ik) = Pr(d_ij = r, d_ik = s | x_ij, x_ik)``
and is stored as an explicit array ``table[x_ij, x_ik, r, s]``, so all checks
are exact comparisons on 16 numbers.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

TOL = 1e-12


class PairClass(str, enum.Enum):
    MCAR = "MCAR"
    MAR = "MAR-consistent"
    MNAR = "MNAR"

    def __str__(self):
        return self.value


class InvalidMechanism(ValueError):
    pass


def _cellwise(v, name) -> np.ndarray:
    """Broadcast a scalar, a length-2 table over one variable, or a 2x2 table."""
    a = np.asarray(v, dtype=float)
    if a.shape == ():
        a = np.full((2, 2), float(a))
    elif a.shape != (2, 2):
        raise ValueError(f"{name} must be a scalar or a 2x2 table, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or a.min() < -TOL or a.max() > 1 + TOL:
        raise InvalidMechanism(f"{name} has values outside [0, 1]")
    return a


@dataclass(frozen=True, eq=False)
class PairMechanism:
    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.shape != (2, 2, 2, 2):
            raise ValueError("table must have shape (2, 2, 2, 2)")
        if t.min() < -TOL or t.max() > 1 + TOL:
            raise InvalidMechanism("probabilities outside [0, 1]")
        sums = t.sum(axis=(2, 3))
        if np.max(np.abs(sums - 1.0)) > 1e-9:
            raise InvalidMechanism(f"outcome probabilities do not sum to 1: {sums.ravel()}")
        t.flags.writeable = False
        object.__setattr__(self, "table", t)

    @classmethod
    def from_components(cls, g10, g01, g11) -> "PairMechanism":
        """Mechanism from 2x2 tables (indexed [x_ij, x_ik]) of g10, g01, g11.

        g00 is the complement; a cell where the three sum above 1 is rejected.
        """
        a10, a01, a11 = _cellwise(g10, "g10"), _cellwise(g01, "g01"), _cellwise(g11, "g11")
        g00 = 1.0 - a10 - a01 - a11
        if g00.min() < -TOL:
            x_ij, x_ik = np.unravel_index(int(np.argmin(g00)), (2, 2))
            raise InvalidMechanism(
                f"g10 + g01 + g11 = {1 - g00[x_ij, x_ik]:.6g} > 1 at (x_ij, x_ik) = ({x_ij}, {x_ik})")
        t = np.empty((2, 2, 2, 2))
        t[:, :, 0, 0] = np.clip(g00, 0.0, 1.0)
        t[:, :, 1, 0] = a10
        t[:, :, 0, 1] = a01
        t[:, :, 1, 1] = a11
        return cls(t)

    def g(self, r: int, s: int) -> np.ndarray:
        """2x2 table of g_rs over (x_ij, x_ik)."""
        return self.table[:, :, r, s]

    def swapped(self) -> "PairMechanism":
        """The same mechanism with the roles of ij and ik exchanged."""
        return PairMechanism(np.transpose(self.table, (1, 0, 3, 2)))

    def __eq__(self, other):
        if not isinstance(other, PairMechanism):
            return NotImplemented
        return np.allclose(self.table, other.table, atol=TOL, rtol=0)

    def __hash__(self):
        return hash(np.round(self.table, 12).tobytes())


def build_mar_pair(g10, g01, g11: float) -> PairMechanism:
    """MAR pair: g10 a function of x_ik, g01 a function of x_ij, g11 constant.

    ``g10`` is a scalar or a length-2 sequence indexed by x_ik; ``g01`` is a
    scalar or length-2 sequence indexed by x_ij.
    """
    v10 = np.broadcast_to(np.asarray(g10, dtype=float), (2,))
    v01 = np.broadcast_to(np.asarray(g01, dtype=float), (2,))
    c11 = float(g11)
    t10 = np.tile(v10[None, :], (2, 1))
    t01 = np.tile(v01[:, None], (1, 2))
    return PairMechanism.from_components(t10, t01, c11)


def independent_pair(g1p, gp1) -> PairMechanism:
    """Product construction: each tie's missingness depends on that tie only.

    ``g1p[x_ij]`` is Pr(d_ij = 1 | x_ij) and ``gp1[x_ik]`` is Pr(d_ik = 1 | x_ik).
    """
    a = np.broadcast_to(np.asarray(g1p, dtype=float), (2,))
    b = np.broadcast_to(np.asarray(gp1, dtype=float), (2,))
    for v, name in ((a, "g1+"), (b, "g+1")):
        if v.min() < 0 or v.max() > 1:
            raise InvalidMechanism(f"{name} outside [0, 1]")
    pa = np.stack([1 - a, a], axis=1)  # [x_ij, r]
    pb = np.stack([1 - b, b], axis=1)  # [x_ik, s]
    return PairMechanism(np.einsum("ir,ks->ikrs", pa, pb))


def marginals(mech: PairMechanism) -> tuple[np.ndarray, np.ndarray]:
    """(g1+, g+1): 2x2 tables over (x_ij, x_ik) of Pr(d_ij = 1) and Pr(d_ik = 1)."""
    t = mech.table
    return t[:, :, 1, 0] + t[:, :, 1, 1], t[:, :, 0, 1] + t[:, :, 1, 1]


def _constant(a) -> bool:
    return float(np.ptp(a)) <= TOL


def _only_ik(a) -> bool:
    # a[x_ij, x_ik] does not change with x_ij
    return bool(np.all(np.abs(a[0, :] - a[1, :]) <= TOL))


def _only_ij(a) -> bool:
    return bool(np.all(np.abs(a[:, 0] - a[:, 1]) <= TOL))


def check_mar(mech: PairMechanism) -> PairClass:
    """MCAR if no outcome depends on (x_ij, x_ik); MAR-consistent if each missing
    variable's probability depends only on its observed partner; MNAR otherwise."""
    t = mech.table
    if all(_constant(t[:, :, r, s]) for r in (0, 1) for s in (0, 1)):
        return PairClass.MCAR
    if _only_ik(mech.g(1, 0)) and _only_ij(mech.g(0, 1)) and _constant(mech.g(1, 1)):
        return PairClass.MAR
    return PairClass.MNAR


def format_mechanism(mech: PairMechanism) -> str:
    """Plain-text table: one row per (x_ij, x_ik) cell, one column per outcome."""
    lines = ["x_ij x_ik      g00      g01      g10      g11     g1+     g+1"]
    m1, m2 = marginals(mech)
    for a in (0, 1):
        for b in (0, 1):
            t = mech.table[a, b]
            lines.append(f"{a:>4} {b:>4} {t[0, 0]:8.4f} {t[0, 1]:8.4f} {t[1, 0]:8.4f} "
                         f"{t[1, 1]:8.4f} {m1[a, b]:7.4f} {m2[a, b]:7.4f}")
    lines.append(f"class: {check_mar(mech)}")
    return "\n".join(lines)
