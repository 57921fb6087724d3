"""
Dense two-phase simplex (Bland's rule) over a numpy tableau, with a
row-generation loop on top.

Rational mode keeps Fraction entries in an object array and is exact;
float mode uses float64 and a tolerance. Infeasible and unbounded programs
come back as statuses.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Literal, Optional, Tuple, Union

import numpy as np

from flowsched.config import Settings, get_settings
from flowsched.exceptions import IterationLimitExceeded

logger = logging.getLogger(__name__)

Number = Union[int, Fraction, float]
Mode = Literal["rational", "float", "auto"]


class Sense(str, Enum):
    GE = ">="
    LE = "<="
    EQ = "="


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class Row:
    coeffs: Tuple[Tuple[int, Number], ...]
    sense: Sense
    rhs: Number
    name: Optional[str] = None

    @classmethod
    def of(cls, coeffs: Dict[int, Number], sense: Sense, rhs: Number,
           name: Optional[str] = None) -> "Row":
        items = tuple(sorted((k, v) for k, v in coeffs.items() if v != 0))
        return cls(items, Sense(sense), rhs, name)

    @property
    def key(self) -> tuple:
        """Identity of the row regardless of its name."""
        return (
            tuple((k, Fraction(v)) for k, v in self.coeffs),
            self.sense,
            Fraction(self.rhs),
        )

    def activity(self, values) -> Number:
        return sum(v * values[k] for k, v in self.coeffs)

    def satisfied(self, values, tol: Number = 0) -> bool:
        lhs = self.activity(values)
        if self.sense is Sense.GE:
            return lhs >= self.rhs - tol
        if self.sense is Sense.LE:
            return lhs <= self.rhs + tol
        return abs(lhs - self.rhs) <= tol


@dataclass
class LinearProgram:
    """Minimisation over bounded variables; upper bound None means +inf."""
    names: List[str] = field(default_factory=list)
    lower: List[Number] = field(default_factory=list)
    upper: List[Optional[Number]] = field(default_factory=list)
    objective: List[Number] = field(default_factory=list)
    rows: List[Row] = field(default_factory=list)
    constant: Number = 0

    @property
    def num_vars(self) -> int:
        return len(self.names)

    def add_variable(self, name: str, lower: Number = 0, upper: Optional[Number] = None,
                     cost: Number = 0) -> int:
        self.names.append(name)
        self.lower.append(lower)
        self.upper.append(upper)
        self.objective.append(cost)
        return len(self.names) - 1

    def add_row(self, coeffs: Dict[int, Number], sense: Union[Sense, str], rhs: Number,
                name: Optional[str] = None) -> Row:
        row = Row.of(coeffs, Sense(sense), rhs, name)
        self.rows.append(row)
        return row

    def copy(self) -> "LinearProgram":
        return LinearProgram(list(self.names), list(self.lower), list(self.upper),
                             list(self.objective), list(self.rows), self.constant)


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    values: Tuple[Number, ...] = ()
    objective: Optional[Number] = None
    mode: str = "rational"
    pivots: int = 0
    rounds: int = 1

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


# ── Tableau simplex ──────────────────────────────────────────────────────────

class _Tableau:
    """Rows 0..k-1 are constraints, row k is the reduced-cost row; last column is rhs."""

    def __init__(self, matrix: np.ndarray, basis: List[int], exact: bool, tol: float,
                 max_pivots: int) -> None:
        self.T = matrix
        self.basis = basis
        self.exact = exact
        self.tol = 0 if exact else tol
        self.max_pivots = max_pivots
        self.pivots = 0

    @property
    def k(self) -> int:
        return self.T.shape[0] - 1

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] = T[row] / T[row, col]
        factors = T[:, col].copy()
        factors[row] = 0
        T -= factors[:, None] * T[row][None, :]
        if not self.exact:
            T[np.abs(T) < 1e-12] = 0.0
        self.basis[row] = col
        self.pivots += 1
        if self.pivots > self.max_pivots:
            raise IterationLimitExceeded(f"simplex exceeded {self.max_pivots} pivots")

    def run(self, allowed: int) -> LpStatus:
        """Optimise the reduced-cost row over columns < *allowed*."""
        T, tol = self.T, self.tol
        while True:
            z = T[self.k, :allowed]
            entering = next((c for c in range(allowed) if z[c] < -tol), None)
            if entering is None:
                return LpStatus.OPTIMAL
            best_row, best_ratio = None, None
            for r in range(self.k):
                a = T[r, entering]
                if a > tol:
                    ratio = T[r, -1] / a
                    if (best_ratio is None or ratio < best_ratio
                            or (ratio == best_ratio and self.basis[r] < self.basis[best_row])):
                        best_row, best_ratio = r, ratio
            if best_row is None:
                return LpStatus.UNBOUNDED
            self.pivot(best_row, entering)


def _choose_mode(mode: Mode, cells: int, settings: Settings) -> str:
    if mode == "auto":
        return "rational" if cells <= settings.lp_rational_cell_limit else "float"
    return mode


def solve(lp: LinearProgram, mode: Optional[Mode] = None,
          settings: Optional[Settings] = None) -> LpSolution:
    settings = settings or get_settings()
    mode = mode or settings.lp_mode

    n = lp.num_vars
    # Shift x = y + lower; upper bounds become explicit rows.
    lower = [Fraction(v) for v in lp.lower]
    rows: List[Tuple[Dict[int, Fraction], Sense, Fraction]] = []
    for row in lp.rows:
        coeffs = {k: Fraction(v) for k, v in row.coeffs}
        rhs = Fraction(row.rhs) - sum(c * lower[k] for k, c in coeffs.items())
        rows.append((coeffs, row.sense, rhs))
    for k, ub in enumerate(lp.upper):
        if ub is not None:
            rows.append(({k: Fraction(1)}, Sense.LE, Fraction(ub) - lower[k]))
    normalised = []
    for coeffs, sense, rhs in rows:
        if rhs < 0:
            coeffs = {k: -v for k, v in coeffs.items()}
            rhs = -rhs
            sense = {Sense.GE: Sense.LE, Sense.LE: Sense.GE, Sense.EQ: Sense.EQ}[sense]
        normalised.append((coeffs, sense, rhs))

    k = len(normalised)
    n_slack = sum(1 for _, s, _ in normalised if s is not Sense.EQ)
    n_art = sum(1 for _, s, _ in normalised if s is not Sense.LE)
    width = n + n_slack + n_art + 1
    chosen = _choose_mode(mode, (k + 1) * width, settings)
    exact = chosen == "rational"
    zero = Fraction(0) if exact else 0.0
    conv = (lambda v: v) if exact else float

    T = np.full((k + 1, width), zero, dtype=object if exact else np.float64)
    basis: List[int] = []
    slack_col, art_col = n, n + n_slack
    art_rows = []
    for r, (coeffs, sense, rhs) in enumerate(normalised):
        for c, v in coeffs.items():
            T[r, c] = conv(v)
        T[r, -1] = conv(rhs)
        if sense is Sense.LE:
            T[r, slack_col] = conv(Fraction(1))
            basis.append(slack_col)
            slack_col += 1
        else:
            if sense is Sense.GE:
                T[r, slack_col] = conv(Fraction(-1))
                slack_col += 1
            T[r, art_col] = conv(Fraction(1))
            basis.append(art_col)
            art_rows.append(r)
            art_col += 1

    tab = _Tableau(T, basis, exact, settings.lp_float_tolerance, settings.lp_max_pivots)
    first_art = n + n_slack

    # Phase 1: minimise the sum of artificials.
    for r in art_rows:
        T[k, :first_art] -= T[r, :first_art]
        T[k, -1] -= T[r, -1]
    if art_rows:
        tab.run(first_art + n_art)
        if -T[k, -1] > tab.tol:
            logger.debug("LP infeasible after phase 1 (residual %s)", -T[k, -1])
            return LpSolution(LpStatus.INFEASIBLE, mode=chosen, pivots=tab.pivots)
        # Drive artificials out of the basis; drop rows that stay redundant.
        keep = []
        for r in range(k):
            if tab.basis[r] >= first_art:
                col = next((c for c in range(first_art) if abs(T[r, c]) > tab.tol), None)
                if col is None:
                    continue
                tab.pivot(r, col)
            keep.append(r)
        T = np.concatenate([T[keep + [k]][:, :first_art], T[keep + [k]][:, -1:]], axis=1)
        tab.T = T
        tab.basis = [tab.basis[r] for r in keep]
        k = len(keep)

    # Phase 2: original costs.
    cost = np.full(T.shape[1], zero, dtype=T.dtype)
    for c in range(n):
        cost[c] = conv(Fraction(lp.objective[c]))
    T[k] = cost
    for r, b in enumerate(tab.basis):
        if T[k, b] != 0:
            T[k] -= T[k, b] * T[r]
    status = tab.run(T.shape[1] - 1)
    if status is LpStatus.UNBOUNDED:
        return LpSolution(LpStatus.UNBOUNDED, mode=chosen, pivots=tab.pivots)

    y = [zero] * T.shape[1]
    for r, b in enumerate(tab.basis):
        y[b] = T[r, -1]
    values = tuple(
        (y[c] + lower[c]) if exact else float(y[c]) + float(lower[c]) for c in range(n)
    )
    objective = sum((Fraction(lp.objective[c]) if exact else float(lp.objective[c])) * values[c]
                    for c in range(n)) + (lp.constant if exact else float(lp.constant))
    logger.debug("LP solved (%s): %d vars, %d rows, %d pivots, obj=%s",
                 chosen, n, len(lp.rows), tab.pivots, objective)
    return LpSolution(LpStatus.OPTIMAL, values, objective, chosen, tab.pivots)


Separator = Callable[[LpSolution], Iterable[Row]]


def solve_with_rows(
    lp: LinearProgram,
    separator: Separator,
    mode: Optional[Mode] = None,
    max_iterations: Optional[int] = None,
    settings: Optional[Settings] = None,
) -> LpSolution:
    """
    Solve, ask *separator* for violated rows, add the new ones, repeat.
    Rows already in the program are ignored; the loop stops when nothing new
    comes back. *lp* is extended in place.
    """
    settings = settings or get_settings()
    max_iterations = max_iterations or settings.lp_max_iterations
    seen = {row.key for row in lp.rows}
    for rnd in range(1, max_iterations + 1):
        sol = solve(lp, mode, settings)
        if not sol.optimal:
            return replace(sol, rounds=rnd)
        fresh = []
        for row in separator(sol):
            if row.key not in seen:
                seen.add(row.key)
                fresh.append(row)
        if not fresh:
            return replace(sol, rounds=rnd)
        logger.debug("round %d: separator added %d row(s)", rnd, len(fresh))
        lp.rows.extend(fresh)
    logger.warning("row generation stopped after %d rounds", max_iterations)
    raise IterationLimitExceeded(f"row generation did not converge in {max_iterations} rounds")


# ── LP text dump ─────────────────────────────────────────────────────────────

_NAME_OK = re.compile(r"[^A-Za-z0-9_.\[\]]")


def _lp_name(name: str) -> str:
    cleaned = _NAME_OK.sub("_", name)
    return cleaned if cleaned and not cleaned[0].isdigit() else f"v_{cleaned}"


def _lp_number(v: Number) -> str:
    f = Fraction(v)
    if f.denominator == 1:
        return str(f.numerator)
    return format(float(f), ".12g")


def _lp_terms(coeffs: Iterable[Tuple[int, Number]], names: List[str]) -> str:
    parts = []
    for k, v in coeffs:
        if v == 0:
            continue
        sign = "-" if v < 0 else "+"
        mag = abs(Fraction(v))
        term = names[k] if mag == 1 else f"{_lp_number(mag)} {names[k]}"
        parts.append(f"{sign} {term}")
    if not parts:
        return "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def to_lp_text(lp: LinearProgram, title: str = "flowsched") -> str:
    """CPLEX LP format (see README for the grammar subset produced)."""
    names = [_lp_name(n) for n in lp.names]
    out = [f"\\ {title}", "Minimize"]
    obj = _lp_terms(enumerate(lp.objective), names)
    if lp.constant:
        obj += f" + {_lp_number(lp.constant)} constant"
    out.append(f" obj: {obj}")
    out.append("Subject To")
    for r, row in enumerate(lp.rows):
        label = _lp_name(row.name) if row.name else f"c{r}"
        out.append(f" {label}: {_lp_terms(row.coeffs, names)} {row.sense.value} {_lp_number(row.rhs)}")
    out.append("Bounds")
    for k, name in enumerate(names):
        lo, hi = lp.lower[k], lp.upper[k]
        if hi is None:
            out.append(f" {name} >= {_lp_number(lo)}")
        else:
            out.append(f" {_lp_number(lo)} <= {name} <= {_lp_number(hi)}")
    if lp.constant:
        out.append(" constant = 1")
    out.append("End")
    return "\n".join(out) + "\n"
