"""Decoy-state linear programs for single-photon-pair bounds.

The observed per-intensity-pair click and error totals constrain the
unobserved photon-number-resolved counts through a family of linear
programs.  Each program is referenced to the signal-signal cell (the
vacuum+weak X-basis cell for the four-intensity protocol), carries
per-cell and aggregate concentration deviations, per-pair source-leakage
slack, and Poisson-tail closure terms, and is normalised by the basis
trial count so every coefficient is O(1).

Two evaluation paths exist.  ``build_lp_3int``/``build_lp_4int`` emit the
complete instance (one variable per photon-pair count, per-cell deviation,
aggregate deviation, and leakage term) for inspection, dumping, and
cross-checks.  The estimators solve an algebraically reduced core with
identical optima: per-cell deviations fold into the count boxes, leaving
18 rows regardless of the photon cutoff.  A unit test asserts the two
paths agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .channel import ObservedStats
from .core import (
    PATH_COIN,
    VARIANT_3INT,
    VARIANT_4INT,
    EpsilonBudget,
    ProtocolConfig,
    azuma_bound,
    invocation_count,
    poisson_pmf,
    tail_term,
)
from .tha import TraceDistanceSet

try:
    from . import _simplex as _kernel

    KERNEL_NAME = "compiled"
except ImportError:  # pragma: no cover - depends on the build environment
    from . import _simplex_py as _kernel

    KERNEL_NAME = "python"

STATUS_OPTIMAL = "Optimal"
STATUS_INFEASIBLE = "Infeasible"
STATUS_UNBOUNDED = "Unbounded"

_STATUS_BY_CODE = {
    0: STATUS_OPTIMAL,
    1: STATUS_INFEASIBLE,
    2: STATUS_UNBOUNDED,
}

OBJECTIVES_3INT = (
    "Min00Z", "Min11Z", "Min11X", "MaxErr11X", "Max11Z", "Max11X",
)
OBJECTIVES_4INT = ("Min00vv", "Min11vv", "MaxErr11vv", "Max11vv")

# objective name -> (target cell, minimize, error-count program, basis)
_OBJECTIVE_INFO = {
    "Min00Z": ((0, 0), True, False, "Z"),
    "Min11Z": ((1, 1), True, False, "Z"),
    "Min11X": ((1, 1), True, False, "X"),
    "MaxErr11X": ((1, 1), False, True, "X"),
    "Max11Z": ((1, 1), False, False, "Z"),
    "Max11X": ((1, 1), False, False, "X"),
    "Min00vv": ((0, 0), True, False, "X"),
    "Min11vv": ((1, 1), True, False, "X"),
    "MaxErr11vv": ((1, 1), False, True, "X"),
    "Max11vv": ((1, 1), False, False, "X"),
}

_MAX_ITER_REDUCED = 20_000
_MAX_ITER_FULL = 200_000


class LpInfeasibleError(RuntimeError):
    """The observed statistics admit no photon-number decomposition."""


@dataclass(frozen=True)
class LpVariable:
    name: str
    lo: float
    hi: float


@dataclass(frozen=True)
class LpRow:
    """One inequality, sum(coef * var) <= rhs, terms as (var_index, coef)."""

    name: str
    terms: tuple[tuple[int, float], ...]
    rhs: float


@dataclass(frozen=True)
class LpInstance:
    """A fully materialised program over named, box-bounded variables.

    All counts are normalised by ``scale`` (the basis trial count);
    ``solve_lp`` rescales the optimum back to counts.  The objective is a
    single named variable, minimised or maximised.
    """

    label: str
    variables: tuple[LpVariable, ...]
    rows: tuple[LpRow, ...]
    objective: str
    maximize: bool
    scale: float

    def __post_init__(self) -> None:
        index = {v.name: i for i, v in enumerate(self.variables)}
        if len(index) != len(self.variables):
            raise ValueError("duplicate variable names")
        if self.objective not in index:
            raise ValueError(f"unknown objective variable {self.objective!r}")
        object.__setattr__(self, "_index", index)

    def var_index(self, name: str) -> int:
        return self._index[name]


@dataclass
class _Program:
    """Numeric data shared by the full builder and the reduced solver."""

    members: tuple[str, ...]
    ref: tuple[str, str]
    cells: list[tuple[str, str]]
    basis: str
    n_trials: float
    s_cut: int
    pmf: dict[str, list[float]]
    prob: dict[str, float]
    cap: np.ndarray  # (S+1, S+1) normalised count caps for the reference cell
    ratio: dict[tuple[str, str], np.ndarray]
    b_obs: dict[tuple[str, str], float]
    tail_add: dict[tuple[str, str], float]
    leak_bound: dict[tuple[str, str], float]
    f_hat: float
    obj_cell: tuple[int, int]
    minimize: bool
    err: bool
    label: str


def _unit_epsilon(config: ProtocolConfig, budget: EpsilonBudget) -> float:
    """Per-invocation failure probability.

    The concentration budget is always split as if the phase-error path
    with the larger invocation count were in use, so a run that takes the
    cheaper path simply spends less than the total.  This keeps every
    bound in a run on one common unit.
    """
    return budget.unit(invocation_count(config, PATH_COIN))


def _program(
    observed: ObservedStats,
    dists: TraceDistanceSet,
    config: ProtocolConfig,
    eps_u: float,
    objective: str,
) -> _Program:
    cell, minimize, err, basis = _OBJECTIVE_INFO[objective]
    if config.variant == VARIANT_3INT:
        members = ("s", "v", "w")
        ref = ("s", "s")
        prob = {j: config.prob(j) for j in members}
    else:
        members = ("v", "w", "0")
        ref = ("v", "v")
        p_x = config.p_X
        prob = {j: config.prob(j) / p_x for j in members}
    s = config.S_cut
    pmf = {
        j: [poisson_pmf(n, config.gamma(j)) for n in range(s + 1)]
        for j in members
    }
    cells = [(a, b) for a in members for b in members]
    n_trials = observed.N_chi[basis]
    counts = observed.N_error if err else observed.N_click
    # Deviation radius over the announced events in this basis: intensity
    # labels are assigned independently of the announcement, so the
    # martingale runs over the detected set rather than all emitted pairs.
    detected = sum(observed.N_click[(a, b, basis)] for a, b in cells)
    f_hat = azuma_bound(detected, eps_u) / n_trials

    cap = np.empty((s + 1, s + 1))
    p_ref = prob[ref[0]] * prob[ref[1]]
    for n in range(s + 1):
        for m in range(s + 1):
            cap[n, m] = p_ref * pmf[ref[0]][n] * pmf[ref[1]][m]

    ratio: dict[tuple[str, str], np.ndarray] = {}
    b_obs: dict[tuple[str, str], float] = {}
    tail_add: dict[tuple[str, str], float] = {}
    leak_bound: dict[tuple[str, str], float] = {}
    for a, b in cells:
        pair_p = prob[a] * prob[b]
        if (a, b) != ref:
            r = np.empty((s + 1, s + 1))
            for n in range(s + 1):
                for m in range(s + 1):
                    r[n, m] = pair_p * pmf[a][n] * pmf[b][m] / cap[n, m]
            ratio[(a, b)] = r
            leak_bound[(a, b)] = pair_p * dists.D[(a, b)]
        b_obs[(a, b)] = counts[(a, b, basis)] / n_trials
        tail_add[(a, b)] = pair_p * tail_term(a, b, s, config)
    return _Program(
        members=members,
        ref=ref,
        cells=cells,
        basis=basis,
        n_trials=n_trials,
        s_cut=s,
        pmf=pmf,
        prob=prob,
        cap=cap,
        ratio=ratio,
        b_obs=b_obs,
        tail_add=tail_add,
        leak_bound=leak_bound,
        f_hat=f_hat,
        obj_cell=cell,
        minimize=minimize,
        err=err,
        label=objective,
    )


def _full_instance(pg: _Program) -> LpInstance:
    s = pg.s_cut
    width = s + 1
    n_cells = width * width

    def nm(n: int, m: int) -> int:
        return n * width + m

    variables: list[LpVariable] = []
    for n in range(width):
        for m in range(width):
            variables.append(
                LpVariable(f"N_{n}_{m}", 0.0, pg.cap[n, m] + pg.f_hat)
            )
    for n in range(width):
        for m in range(width):
            variables.append(LpVariable(f"d_{n}_{m}", -pg.f_hat, pg.f_hat))
    dagg_base = 2 * n_cells
    dagg_index = {}
    for i, (a, b) in enumerate(pg.cells):
        dagg_index[(a, b)] = dagg_base + i
        variables.append(LpVariable(f"dagg_{a}_{b}", -pg.f_hat, pg.f_hat))
    leak_base = dagg_base + len(pg.cells)
    leak_index = {}
    pos = 0
    for a, b in pg.cells:
        if (a, b) == pg.ref:
            continue
        leak_index[(a, b)] = leak_base + pos
        bound = pg.leak_bound[(a, b)]
        variables.append(LpVariable(f"leak_{a}_{b}", -bound, bound))
        pos += 1

    rows: list[LpRow] = []
    for a, b in pg.cells:
        is_ref = (a, b) == pg.ref
        terms_hi: list[tuple[int, float]] = []
        terms_lo: list[tuple[int, float]] = []
        for n in range(width):
            for m in range(width):
                coef = 1.0 if is_ref else float(pg.ratio[(a, b)][n, m])
                if coef != 0.0:
                    terms_hi.append((nm(n, m), coef))
                    terms_hi.append((n_cells + nm(n, m), coef))
                    terms_lo.append((nm(n, m), -coef))
                    terms_lo.append((n_cells + nm(n, m), -coef))
        terms_hi.append((dagg_index[(a, b)], -1.0))
        terms_lo.append((dagg_index[(a, b)], 1.0))
        if not is_ref:
            terms_hi.append((leak_index[(a, b)], 1.0))
            terms_lo.append((leak_index[(a, b)], -1.0))
        rows.append(LpRow(f"{a}{b}_pred_hi", tuple(terms_hi), pg.b_obs[(a, b)]))
        rows.append(
            LpRow(
                f"{a}{b}_pred_lo",
                tuple(terms_lo),
                pg.tail_add[(a, b)] - pg.b_obs[(a, b)],
            )
        )
    for n in range(width):
        for m in range(width):
            rows.append(
                LpRow(
                    f"cap_{n}_{m}_hi",
                    ((nm(n, m), 1.0), (n_cells + nm(n, m), 1.0)),
                    float(pg.cap[n, m]),
                )
            )
            rows.append(
                LpRow(
                    f"cap_{n}_{m}_lo",
                    ((nm(n, m), -1.0), (n_cells + nm(n, m), -1.0)),
                    0.0,
                )
            )

    return LpInstance(
        label=pg.label,
        variables=tuple(variables),
        rows=tuple(rows),
        objective=f"N_{pg.obj_cell[0]}_{pg.obj_cell[1]}",
        maximize=not pg.minimize,
        scale=pg.n_trials,
    )


def build_lp_3int(
    observed: ObservedStats,
    dists: TraceDistanceSet,
    config: ProtocolConfig,
    budget: EpsilonBudget,
    objective: str,
) -> LpInstance:
    """Materialise one three-intensity decoy program.

    The instance has (S_cut+1)^2 photon-pair count variables, as many
    per-cell deviations, nine aggregate deviations, and eight leakage
    terms, with two prediction rows per intensity pair and box rows for
    every photon cell, all normalised by the basis trial count.
    """
    if config.variant != VARIANT_3INT:
        raise ValueError("three-intensity builder needs a matching config")
    if objective not in OBJECTIVES_3INT:
        raise ValueError(f"unknown objective {objective!r}")
    eps_u = _unit_epsilon(config, budget)
    return _full_instance(_program(observed, dists, config, eps_u, objective))


def build_lp_4int(
    observed: ObservedStats,
    dists: TraceDistanceSet,
    config: ProtocolConfig,
    budget: EpsilonBudget,
    objective: str,
) -> LpInstance:
    """Materialise one four-intensity X-basis decoy program.

    Structure matches the three-intensity builder with the vacuum+weak
    basis cells referenced to the vv pair and conditional (X-given)
    intensity probabilities.
    """
    if config.variant != VARIANT_4INT:
        raise ValueError("four-intensity builder needs a matching config")
    if objective not in OBJECTIVES_4INT:
        raise ValueError(f"unknown objective {objective!r}")
    eps_u = _unit_epsilon(config, budget)
    return _full_instance(_program(observed, dists, config, eps_u, objective))


def _conditioned_solve(
    a_mat: np.ndarray,
    b_vec: np.ndarray,
    c_vec: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    maximize: bool,
    max_iter: int,
) -> tuple[int, np.ndarray, float]:
    """Rescale an instance onto the unit box, solve, map the point back.

    Decoy programs mix ratio columns spanning tens of orders of magnitude
    with right-hand sides near 1e-12; fed raw to a simplex kernel they
    yield silently infeasible \"optima\".  Shifting each variable by its
    lower bound, scaling its span to [0, 1] and equilibrating every row
    to unit max-norm keeps the pivots well conditioned without changing
    the optimum.
    """
    span = hi - lo
    fixed = span <= 0.0
    span_safe = np.where(fixed, 1.0, span)
    a_s = a_mat * span_safe[None, :]
    b_s = b_vec - a_mat @ lo
    row_norm = np.abs(a_s).max(axis=1)
    row_norm = np.where(row_norm > 0.0, row_norm, 1.0)
    a_s = a_s / row_norm[:, None]
    b_s = b_s / row_norm
    code, z, _ = _kernel.solve_bounded_lp(
        a_s,
        b_s,
        c_vec * span_safe,
        np.zeros_like(lo),
        np.where(fixed, 0.0, 1.0),
        maximize=maximize,
        max_iter=max_iter,
    )
    x = lo + span_safe * z
    return code, x, float(c_vec @ x)


def solve_lp(
    instance: LpInstance, max_iter: int = _MAX_ITER_FULL
) -> tuple[float, str]:
    """Solve a materialised instance; returns (optimum in counts, status).

    The optimum is the objective variable's value rescaled by the
    instance's trial count; NaN when the status is not Optimal.
    """
    n_var = len(instance.variables)
    lo = np.array([v.lo for v in instance.variables])
    hi = np.array([v.hi for v in instance.variables])
    a_mat = np.zeros((len(instance.rows), n_var))
    b_vec = np.empty(len(instance.rows))
    for i, row in enumerate(instance.rows):
        for j, coef in row.terms:
            a_mat[i, j] += coef
        b_vec[i] = row.rhs
    c_vec = np.zeros(n_var)
    c_vec[instance.var_index(instance.objective)] = 1.0
    code, x, _ = _conditioned_solve(
        a_mat, b_vec, c_vec, lo, hi, instance.maximize, max_iter
    )
    if code == 3:
        raise RuntimeError(f"simplex iteration limit on {instance.label}")
    status = _STATUS_BY_CODE[code]
    if status != STATUS_OPTIMAL:
        return float("nan"), status
    value = float(x[instance.var_index(instance.objective)]) * instance.scale
    return value, status


def _solve_reduced(pg: _Program) -> float:
    """Solve the 18-row core with per-cell deviations folded away.

    Substituting u = count + deviation turns the cap rows into variable
    boxes and leaves the objective cell's deviation as a post-solve
    correction: lower bounds subtract the deviation radius (clamped at
    zero), upper bounds add it.  Optima match the full instance exactly.
    """
    s = pg.s_cut
    width = s + 1
    n_cells = width * width
    n_pairs = len(pg.cells)
    n_leak = n_pairs - 1
    n_var = n_cells + n_pairs + n_leak

    lo = np.zeros(n_var)
    hi = np.empty(n_var)
    hi[:n_cells] = pg.cap.reshape(-1)
    dagg_base = n_cells
    lo[dagg_base : dagg_base + n_pairs] = -pg.f_hat
    hi[dagg_base : dagg_base + n_pairs] = pg.f_hat
    leak_base = dagg_base + n_pairs
    bounds = []
    for a, b in pg.cells:
        if (a, b) != pg.ref:
            bounds.append(pg.leak_bound[(a, b)])
    lo[leak_base:] = -np.array(bounds)
    hi[leak_base:] = np.array(bounds)

    a_mat = np.zeros((2 * n_pairs, n_var))
    b_vec = np.empty(2 * n_pairs)
    leak_pos = 0
    for i, (a, b) in enumerate(pg.cells):
        is_ref = (a, b) == pg.ref
        coefs = (
            np.ones(n_cells)
            if is_ref
            else pg.ratio[(a, b)].reshape(-1)
        )
        a_mat[2 * i, :n_cells] = coefs
        a_mat[2 * i, dagg_base + i] = -1.0
        a_mat[2 * i + 1, :n_cells] = -coefs
        a_mat[2 * i + 1, dagg_base + i] = 1.0
        if not is_ref:
            a_mat[2 * i, leak_base + leak_pos] = 1.0
            a_mat[2 * i + 1, leak_base + leak_pos] = -1.0
            leak_pos += 1
        b_vec[2 * i] = pg.b_obs[(a, b)]
        b_vec[2 * i + 1] = pg.tail_add[(a, b)] - pg.b_obs[(a, b)]

    c_vec = np.zeros(n_var)
    c_vec[pg.obj_cell[0] * width + pg.obj_cell[1]] = 1.0
    code, _, obj = _conditioned_solve(
        a_mat, b_vec, c_vec, lo, hi, not pg.minimize, _MAX_ITER_REDUCED
    )
    if code == 1:
        raise LpInfeasibleError(
            f"{pg.label}: observed statistics rejected by the decoy program"
        )
    if code != 0:
        raise RuntimeError(f"simplex failure (code {code}) on {pg.label}")
    if pg.minimize:
        return max(0.0, obj - pg.f_hat) * pg.n_trials
    return (obj + pg.f_hat) * pg.n_trials


@dataclass(frozen=True)
class DecoyEstimates:
    """Finite-size single-photon-pair bounds with their failure shares.

    Role-based fields: n00_L and n11_L bound the key-basis signal-signal
    vacuum and single-pair click counts, n11_X_L and err11_X_U the test
    basis quantities feeding the phase-error step.  The matching upper
    bounds n11_U and n11_X_U normalize the quantum-coin inequality's
    complementary fractions; the sampling path ignores them.  For the
    three-intensity protocol the test-basis cell is signal-signal in X;
    for the four-intensity protocol it is the vv cell and the key-basis
    bounds are rescaled from it.
    """

    variant: str
    n00_L: float
    n11_L: float
    n11_U: float
    n11_X_L: float
    n11_X_U: float
    err11_X_U: float
    eps_n00: float
    eps_n11: float
    eps_n11_X: float
    eps_err11_X: float

    def __post_init__(self) -> None:
        for name in ("n00_L", "n11_L", "n11_U", "n11_X_L", "n11_X_U",
                     "err11_X_U"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")


def estimate_3int(
    observed: ObservedStats,
    dists: TraceDistanceSet,
    config: ProtocolConfig,
    budget: EpsilonBudget,
) -> DecoyEstimates:
    """Run the four three-intensity programs and collect the bounds."""
    if config.variant != VARIANT_3INT:
        raise ValueError("three-intensity estimator needs a matching config")
    eps_u = _unit_epsilon(config, budget)
    per_lp = 2.0 * ((config.S_cut + 1) ** 2 + 9) * eps_u
    values = {
        name: _solve_reduced(_program(observed, dists, config, eps_u, name))
        for name in OBJECTIVES_3INT
    }
    return DecoyEstimates(
        variant=config.variant,
        n00_L=values["Min00Z"],
        n11_L=values["Min11Z"],
        n11_U=values["Max11Z"],
        n11_X_L=values["Min11X"],
        n11_X_U=values["Max11X"],
        err11_X_U=values["MaxErr11X"],
        eps_n00=per_lp,
        eps_n11=per_lp,
        eps_n11_X=per_lp,
        eps_err11_X=per_lp,
    )


def estimate_4int(
    observed: ObservedStats,
    dists: TraceDistanceSet,
    config: ProtocolConfig,
    budget: EpsilonBudget,
) -> DecoyEstimates:
    """Run the X-basis programs and rescale the Z-basis signal bounds.

    The vv-cell bounds transfer to the signal-signal cell through the
    per-round probability ratio, two concentration deviations over the
    full round count (worst-case signs), and a source-leakage slack
    proportional to the signal-vs-vv reflected-state distance.
    """
    if config.variant != VARIANT_4INT:
        raise ValueError("four-intensity estimator needs a matching config")
    if config.prob("v") == 0.0:
        raise ValueError("vv reference requires p_v > 0")
    eps_u = _unit_epsilon(config, budget)
    per_lp = 2.0 * ((config.S_cut + 1) ** 2 + 9) * eps_u
    values = {
        name: _solve_reduced(_program(observed, dists, config, eps_u, name))
        for name in OBJECTIVES_4INT
    }
    members = ("v", "w", "0")
    detected_x = sum(
        observed.N_click[(a, b, "X")] for a in members for b in members
    )
    f_in = azuma_bound(detected_x, eps_u)
    f_out = azuma_bound(observed.N_click[("s", "s", "Z")], eps_u)
    p_s = config.prob("s")
    p_v = config.prob("v")
    d_ss = dists.D[("s", "s")]
    scaled = {}
    for n in (0, 1):
        key = "Min00vv" if n == 0 else "Min11vv"
        p_n_s = poisson_pmf(n, config.gamma("s"))
        p_n_v = poisson_pmf(n, config.gamma("v"))
        ratio = (p_s**2 * p_n_s**2) / (p_v**2 * p_n_v**2)
        leak = p_s**2 * p_n_s**2 * config.N * d_ss
        scaled[n] = max(0.0, ratio * (values[key] - f_in) - f_out - leak)
    p_1_s = poisson_pmf(1, config.gamma("s"))
    p_1_v = poisson_pmf(1, config.gamma("v"))
    ratio_1 = (p_s**2 * p_1_s**2) / (p_v**2 * p_1_v**2)
    leak_1 = p_s**2 * p_1_s**2 * config.N * d_ss
    n11_up = ratio_1 * (values["Max11vv"] + f_in) + f_out + leak_1
    return DecoyEstimates(
        variant=config.variant,
        n00_L=scaled[0],
        n11_L=scaled[1],
        n11_U=n11_up,
        n11_X_L=values["Min11vv"],
        n11_X_U=values["Max11vv"],
        err11_X_U=values["MaxErr11vv"],
        eps_n00=per_lp + 4.0 * eps_u,
        eps_n11=per_lp + 4.0 * eps_u,
        eps_n11_X=per_lp,
        eps_err11_X=per_lp,
    )


def dump_lp(instance: LpInstance) -> str:
    """Render an instance as plain text, one variable or row per line."""
    sense = "maximize" if instance.maximize else "minimize"
    lines = [
        f"# {instance.label}",
        f"objective: {sense} {instance.objective}",
        f"scale: {instance.scale!r}",
        f"variables: {len(instance.variables)}",
    ]
    for v in instance.variables:
        lines.append(f"  {v.name} in [{v.lo!r}, {v.hi!r}]")
    lines.append(f"rows: {len(instance.rows)}")
    names = [v.name for v in instance.variables]
    for row in instance.rows:
        parts = " + ".join(f"{coef!r}*{names[idx]}" for idx, coef in row.terms)
        lines.append(f"  {row.name}: {parts} <= {row.rhs!r}")
    return "\n".join(lines) + "\n"
