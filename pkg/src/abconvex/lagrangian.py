"""Perturbation-based Lagrangian duality on finite grids.

A problem instance is a table p(x, y) with a distinguished parameter y0.
Multipliers are drawn from a finite sample of an elementary family over the
parameter grid; the Lagrangian is L(x, psi) = psi(y0) - sup_y (psi(y) - p(x, y)).
Reports expose the primal/dual values, the optimal value function V and its
grid biconjugate at y0, and level certificates built from constant supports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ExtReal, FiniteMetricSpace, GridFn
from .errors import ImproperProblem, LevelAbovePrimal, NotConvexCombinable
from .families import CONVEX_KINDS, DualGrid, ElemFamily, ElemParams, eval_on_domain
from .minimax import TCertificate

EQ_TOL = 1e-9


@dataclass(frozen=True)
class PerturbationProblem:
    """p: X x Y -> (-inf, +inf] with p(., y) proper for every parameter y.

    Columns listed in allow_improper_cols may be identically +inf; that escape
    hatch exists for constrained instances whose feasible set is empty at some
    parameter, and such instances are flagged in reports rather than rejected.
    """

    Y: FiniteMetricSpace
    p: np.ndarray
    y0: int
    allow_improper_cols: frozenset = frozenset()

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2 or p.shape[0] < 1:
            raise ImproperProblem("p must be a nonempty |X| x |Y| table")
        if p.shape[1] != self.Y.n:
            raise ImproperProblem("p column count must match the parameter grid")
        if np.isnan(p).any():
            raise ImproperProblem("p cannot contain NaN")
        if np.isneginf(p).any():
            raise ImproperProblem("p takes -inf; every p(., y) must be proper")
        if not (0 <= self.y0 < self.Y.n):
            raise ImproperProblem("y0 out of range")
        finite_col = np.isfinite(p).any(axis=0)
        for y in np.flatnonzero(~finite_col):
            if int(y) not in self.allow_improper_cols:
                raise ImproperProblem(
                    f"p(., y={int(y)}) is identically +inf; properness fails"
                )
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "allow_improper_cols",
                           frozenset(int(y) for y in self.allow_improper_cols))

    @property
    def n_x(self) -> int:
        return self.p.shape[0]

    @property
    def anchor_proper(self) -> bool:
        return bool(np.isfinite(self.p[:, self.y0]).any())


@dataclass(frozen=True)
class LagTable:
    """L(x, psi) over the multiplier grid; rows of +inf mark empty dom p(x, .)."""

    L: np.ndarray
    psi_grid: DualGrid
    y0: int

    def __post_init__(self):
        row_inf = np.isposinf(self.L).all(axis=1)
        row_any_inf = np.isposinf(self.L).any(axis=1)
        if not np.array_equal(row_inf, row_any_inf):
            raise ImproperProblem("a Lagrangian row mixes +inf with finite values")
        L = np.asarray(self.L, dtype=float).copy()
        L.flags.writeable = False
        object.__setattr__(self, "L", L)


@dataclass(frozen=True)
class SupportFn:
    """Descriptor of a support member used in certificates."""

    kind: str
    level: float = 0.0

    @classmethod
    def constant(cls, level: float) -> "SupportFn":
        return cls(kind="constant", level=float(level))


@dataclass(frozen=True)
class Certificate:
    """Multipliers plus support members witnessing a level via a combination."""

    psi1: ElemParams
    psi2: ElemParams
    phi1: SupportFn
    phi2: SupportFn
    t: TCertificate


@dataclass(frozen=True)
class DualityReport:
    """Primal/dual values of the Lagrangian pair relative to a multiplier grid."""

    primal: ExtReal
    dual: ExtReal
    gap: ExtReal
    V: GridFn
    V_star: np.ndarray
    V_bidual_at_y0: ExtReal
    reconstruction_ok: bool
    certificate: Optional[Certificate]
    psi_grid: DualGrid
    y0: int
    convexity_scope: str
    convexity_holds: bool

    def anchor_gap(self) -> ExtReal:
        """V(y0) - dual: discrepancy between the original problem's value and
        the dual; nonzero whenever reconstruction fails or a gap exists."""
        v0 = float(self.V.values[self.y0])
        d = self.dual.as_float()
        return ExtReal(0.0) if v0 == d else ExtReal(v0) - self.dual


def _partial_conjugate_matrix(prob: PerturbationProblem, psi_grid: DualGrid) -> np.ndarray:
    """S[x, j] = sup_y (psi_j(y) - p(x, y)); -inf exactly on empty rows."""
    E = psi_grid.matrix  # (P, n_y)
    with np.errstate(invalid="ignore"):
        diff = E[None, :, :] - prob.p[:, None, :]
    return diff.max(axis=2)


def partial_conjugate(prob: PerturbationProblem, x: int,
                      family: ElemFamily, params: ElemParams) -> ExtReal:
    """sup over the parameter grid of psi(y) - p(x, y) for one multiplier."""
    vals = eval_on_domain(family, params)
    with np.errstate(invalid="ignore"):
        out = (vals - prob.p[x]).max()
    return ExtReal(float(out))


def build_lagrangian(prob: PerturbationProblem, psi_grid: DualGrid) -> LagTable:
    """L(x, psi) = psi(y0) - p*_x(psi) for every multiplier on the grid."""
    if psi_grid.family.domain.n != prob.Y.n:
        raise ImproperProblem("multiplier grid must live on the parameter domain")
    S = _partial_conjugate_matrix(prob, psi_grid)
    E0 = psi_grid.matrix[:, prob.y0]
    with np.errstate(invalid="ignore"):
        L = E0[None, :] - S
    return LagTable(L=L, psi_grid=psi_grid, y0=prob.y0)


def _full_convexity_holds(prob: PerturbationProblem, psi_grid: DualGrid,
                          S: np.ndarray) -> bool:
    """Whether every p(x, .) equals its grid biconjugate on all of Y (1e-9)."""
    E = psi_grid.matrix
    with np.errstate(invalid="ignore"):
        bidual = (E[None, :, :] - S[:, :, None]).max(axis=1)
    p = prob.p
    finite = np.isfinite(p)
    ok_fin = np.abs(bidual[finite] - p[finite]).max(initial=0.0) <= EQ_TOL
    inf_cells = ~finite
    ok_inf = np.isposinf(bidual[inf_cells]).all() if inf_cells.any() else True
    return bool(ok_fin and ok_inf)


def duality_report(prob: PerturbationProblem, psi_grid: DualGrid,
                   convexity_scope: str = "anchor",
                   attach_certificate: bool = True) -> DualityReport:
    """Full primal/dual report.

    primal = min_x max_psi L, dual = max_psi min_x L.  The identity
    dual == V**(y0) holds bit-exactly because both sides reduce over the same
    partial-conjugate table.  gap is primal - dual (zero when they agree,
    including at shared infinities).
    """
    if convexity_scope not in ("anchor", "full"):
        raise ValueError("convexity_scope must be 'anchor' or 'full'")
    if psi_grid.family.domain.n != prob.Y.n:
        raise ImproperProblem("multiplier grid must live on the parameter domain")
    E = psi_grid.matrix
    S = _partial_conjugate_matrix(prob, psi_grid)
    with np.errstate(invalid="ignore"):
        L_raw = E[:, prob.y0][None, :] - S
    table = LagTable(L=L_raw, psi_grid=psi_grid, y0=prob.y0)
    L = table.L

    row_sup = L.max(axis=1)            # sup_psi L(x, .) = p_x**(y0)
    primal = float(row_sup.min())
    col_inf = L.min(axis=0)            # inf_x L(., psi)
    dual = float(col_inf.max())

    V = GridFn(prob.Y, prob.p.min(axis=0))
    V_star = S.max(axis=0)
    with np.errstate(invalid="ignore"):
        V_bidual = float((E[:, prob.y0] - V_star).max())
    if V_bidual != dual:
        raise AssertionError("dual != V**(y0); internal reduction mismatch")

    p0 = prob.p[:, prob.y0]
    both_inf = np.isposinf(row_sup) & np.isposinf(p0)
    with np.errstate(invalid="ignore"):
        finite_ok = (np.isfinite(row_sup) & np.isfinite(p0)
                     & (np.abs(row_sup - p0) <= EQ_TOL))
    reconstruction_ok = bool((both_inf | finite_ok).all())

    if convexity_scope == "anchor":
        convexity_holds = reconstruction_ok
    else:
        convexity_holds = _full_convexity_holds(prob, psi_grid, S)

    if primal == dual:
        gap = ExtReal(0.0)
    else:
        gap = ExtReal(primal) - ExtReal(dual)

    certificate = None
    if attach_certificate and np.isfinite(primal) and float(gap) <= EQ_TOL:
        certificate = gap_certificate(prob, psi_grid, primal - 1e-6, _table=table)

    return DualityReport(
        primal=ExtReal(primal), dual=ExtReal(dual), gap=gap,
        V=V, V_star=V_star, V_bidual_at_y0=ExtReal(V_bidual),
        reconstruction_ok=reconstruction_ok, certificate=certificate,
        psi_grid=psi_grid, y0=prob.y0, convexity_scope=convexity_scope,
        convexity_holds=convexity_holds,
    )


def gap_certificate(prob: PerturbationProblem, psi_grid: DualGrid, alpha: float,
                    _table: Optional[LagTable] = None) -> Optional[Certificate]:
    """Search the grid for a multiplier whose Lagrangian row stays above alpha.

    On success the constant function at level alpha is a support member of
    L(., psi_bar), so the trivial combination certifies the level.  None means
    no grid multiplier reaches alpha (the dual value bounds all row minima).
    """
    table = _table if _table is not None else build_lagrangian(prob, psi_grid)
    L = table.L
    primal = float(L.max(axis=1).min())
    if not alpha < primal:
        raise LevelAbovePrimal(f"alpha={alpha} is not strictly below primal={primal}")
    col_inf = L.min(axis=0)
    hits = np.flatnonzero(col_inf >= alpha)
    if hits.size == 0:
        return None
    psi_bar = psi_grid.params_list[int(hits[0])]
    const = SupportFn.constant(alpha)
    return Certificate(
        psi1=psi_bar, psi2=psi_bar, phi1=const, phi2=const,
        t=TCertificate(t0=0.0, level=float(alpha), lower_envelope_value=float(alpha)),
    )


def alpha_sweep(prob: PerturbationProblem, psi_grid: DualGrid,
                final_offset: float = 1e-6) -> list[tuple[float, Optional[Certificate]]]:
    """Geometric approach of the certificate level to the primal value:
    seven halvings of a unit offset, then the final step at primal - 1e-6."""
    table = build_lagrangian(prob, psi_grid)
    primal = float(table.L.max(axis=1).min())
    if not np.isfinite(primal):
        raise LevelAbovePrimal("alpha sweep needs a finite primal value")
    offsets = [2.0 ** -k for k in range(7)] + [final_offset]
    out = []
    for off in offsets:
        alpha = primal - off
        out.append((alpha, gap_certificate(prob, psi_grid, alpha, _table=table)))
    return out


def concavity_probe(prob: PerturbationProblem, family: ElemFamily,
                    psi_a: ElemParams, psi_b: ElemParams, t: float) -> bool:
    """Verify L(x, t psi_a + (1-t) psi_b) >= t L(x, psi_a) + (1-t) L(x, psi_b)
    at every x (1e-9 slack for the parameter-combination rounding)."""
    if family.kind not in CONVEX_KINDS:
        raise NotConvexCombinable(
            f"{family.kind.value} members do not combine convexly"
        )
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    Ea = eval_on_domain(family, psi_a)
    Eb = eval_on_domain(family, psi_b)
    Ec = t * Ea + (1.0 - t) * Eb

    def lag_row(E):
        with np.errstate(invalid="ignore"):
            S = (E[None, :] - prob.p).max(axis=1)
            return E[prob.y0] - S

    La, Lb, Lc = lag_row(Ea), lag_row(Eb), lag_row(Ec)
    if t == 0.0:
        rhs = Lb
    elif t == 1.0:
        rhs = La
    else:
        rhs = np.where(np.isposinf(La) | np.isposinf(Lb), np.inf,
                       t * np.where(np.isposinf(La), 0.0, La)
                       + (1.0 - t) * np.where(np.isposinf(Lb), 0.0, Lb))
    both_inf = np.isposinf(Lc) & np.isposinf(rhs)
    return bool((both_inf | (Lc >= rhs - EQ_TOL)).all())


def lsc_defect(V: GridFn, y0: int, radius: float) -> float:
    """max(0, V(y0) - min over the punctured ball of radius r); 0 on empty balls.

    A radius-indexed proxy: pointwise lower semicontinuity is vacuous on a
    finite grid, so callers watch the defect as the radius shrinks with the
    grid spacing.
    """
    if not isinstance(V.domain, FiniteMetricSpace):
        raise ValueError("lsc_defect needs a metric domain")
    if radius <= 0:
        raise ValueError("radius must be positive")
    v0 = V.values[y0]
    if not np.isfinite(v0):
        raise ValueError("lsc_defect needs a finite value at y0")
    d = V.domain.dist[y0]
    ball = (d > 0) & (d <= radius)
    if not ball.any():
        return 0.0
    m = V.values[ball].min()
    return float(max(0.0, v0 - m))
