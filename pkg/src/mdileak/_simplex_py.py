"""Bounded-variable primal simplex, NumPy implementation.

Fallback twin of the compiled kernel in _simplex.pyx: same algorithm
(two-phase, explicit basis inverse, Bland's anti-cycling rule on both the
entering and leaving choices), selected at import time when the extension
is unavailable.  Problems are

    minimize    c @ x
    subject to  A @ x <= b,  lo <= x <= hi

with finite structural bounds; slacks and phase-1 artificials are managed
internally.
"""

from __future__ import annotations

import numpy as np

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3

_TOL = 1e-9
_TOL_POLISH = 1e-12
_PIVOT_TOL = 1e-11
_ART_TOL = 1e-7
_POLISH_ROUNDS = 5


def solve_bounded_lp(
    A: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    maximize: bool = False,
    max_iter: int = 50_000,
) -> tuple[int, np.ndarray, float]:
    """Solve the box-constrained inequality LP; returns (status, x, objective).

    x holds the structural variable values; the objective is reported in
    the original orientation (negated back when maximize is set).
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, n = A.shape
    sign = -1.0 if maximize else 1.0
    if np.any(np.asarray(lo) > np.asarray(hi) + _TOL):
        return INFEASIBLE, np.zeros(n), 0.0

    # Nonbasic structurals start at their lower bound, slacks start basic.
    nb_value = np.concatenate([np.asarray(lo, dtype=np.float64), np.zeros(m)])
    x_b = b - A @ nb_value[:n]

    # Rows whose slack starts negative get a phase-1 artificial column -e_i,
    # basic at -slack >= 0.  Artificial bounds stay [0, inf) until phase 1
    # succeeds, then collapse to [0, 0] so the variables cannot return.
    art_rows = np.flatnonzero(x_b < -_TOL)
    n_art = len(art_rows)
    total = n + m + n_art

    cols = np.hstack([A, np.eye(m), np.zeros((m, n_art))])
    for idx, row in enumerate(art_rows):
        cols[row, n + m + idx] = -1.0
    c_full = np.concatenate(
        [sign * np.asarray(c, dtype=np.float64), np.zeros(m + n_art)]
    )
    lo_full = np.concatenate(
        [np.asarray(lo, dtype=np.float64), np.zeros(m + n_art)]
    )
    hi_full = np.concatenate(
        [np.asarray(hi, dtype=np.float64), np.full(m + n_art, np.inf)]
    )
    nb_value = np.concatenate([nb_value, np.zeros(n_art)])
    at_upper = np.zeros(total, dtype=bool)
    is_basic = np.zeros(total, dtype=bool)
    basis = np.arange(n, n + m)
    for idx, row in enumerate(art_rows):
        basis[row] = n + m + idx
        x_b[row] = -x_b[row]
    is_basic[basis] = True

    # The artificial columns are -e_i, so the initial basis matrix is
    # diag(+-1) and equals its own inverse.
    binv = np.eye(m)
    for row in art_rows:
        binv[row, row] = -1.0

    def run_phase(
        cost: np.ndarray, iter_budget: int, tol: float = _TOL
    ) -> tuple[int, int]:
        nonlocal x_b, binv
        used = 0
        while used < iter_budget:
            used += 1
            y = cost[basis] @ binv
            reduced = cost - y @ cols
            eligible = (~is_basic) & (lo_full < hi_full)
            eligible &= np.where(at_upper, reduced > tol, reduced < -tol)
            candidates = np.flatnonzero(eligible)
            if candidates.size == 0:
                return OPTIMAL, used
            entering = int(candidates[0])
            sigma = -1.0 if at_upper[entering] else 1.0
            d = binv @ cols[:, entering]
            move = sigma * d
            lo_b = lo_full[basis]
            hi_b = hi_full[basis]
            room = np.full(m, np.inf)
            pos = move > _PIVOT_TOL
            neg = move < -_PIVOT_TOL
            room[pos] = (x_b[pos] - lo_b[pos]) / move[pos]
            room[neg] = (hi_b[neg] - x_b[neg]) / (-move[neg])
            np.clip(room, 0.0, None, out=room)
            flip = hi_full[entering] - lo_full[entering]
            room_min = float(room.min()) if m else np.inf
            step = min(flip, room_min)
            if step == np.inf:
                return UNBOUNDED, used
            if room_min <= flip:
                # Basis change; Bland tie-break on the leaving variable
                # index.  Ties are exact: a tolerance window here admits
                # near-ties whose rooms exceed the step, nudging the
                # leaving variable off its bound and stalling the walk.
                ties = np.flatnonzero(room == room_min)
                leave = int(ties[np.argmin(basis[ties])])
                step = room_min
                x_b -= sigma * step * d
                leaving = int(basis[leave])
                at_upper[leaving] = move[leave] < 0.0
                nb_value[leaving] = (
                    hi_full[leaving] if at_upper[leaving] else lo_full[leaving]
                )
                is_basic[leaving] = False
                entering_value = (
                    hi_full[entering] if at_upper[entering] else lo_full[entering]
                ) + sigma * step
                basis[leave] = entering
                is_basic[entering] = True
                x_b[leave] = entering_value
                pivot = d[leave]
                piv_row = binv[leave, :] / pivot
                binv -= np.outer(d, piv_row)
                binv[leave, :] = piv_row
            else:
                # Bound flip: entering travels to its opposite bound.
                x_b -= sigma * step * d
                at_upper[entering] = not at_upper[entering]
                nb_value[entering] = (
                    hi_full[entering] if at_upper[entering] else lo_full[entering]
                )
        return ITERATION_LIMIT, used

    budget = max_iter
    if n_art:
        phase1 = np.zeros(total)
        phase1[n + m :] = 1.0
        status, used = run_phase(phase1, budget)
        budget -= used
        if status == ITERATION_LIMIT:
            return ITERATION_LIMIT, np.zeros(n), 0.0
        art_value = float(nb_value[n + m :].sum())
        for i in range(m):
            if basis[i] >= n + m:
                art_value += x_b[i]
        if status != OPTIMAL or art_value > _ART_TOL:
            return INFEASIBLE, np.zeros(n), 0.0
        hi_full[n + m :] = 0.0

    status, used = run_phase(c_full, budget)
    if status != OPTIMAL:
        return status, np.zeros(n), 0.0

    # Refactorization polish.  The product-form inverse drifts over long
    # pivot walks, and the working reduced-cost window leaves the walk a
    # few widths short of the optimal vertex when near-parallel columns
    # price inside it.  Rebuild binv and the basic values from the final
    # basis and re-run at a tighter window; a pass that makes no pivot
    # certifies the vertex against a fresh inverse.
    for _ in range(_POLISH_ROUNDS):
        budget -= used
        if budget <= 0:
            break
        try:
            binv = np.linalg.inv(cols[:, basis])
        except np.linalg.LinAlgError:
            break
        free_value = np.where(is_basic, 0.0, nb_value)
        x_b = binv @ (b - cols @ free_value)
        status, used = run_phase(c_full, budget, _TOL_POLISH)
        if status != OPTIMAL:
            return status, np.zeros(n), 0.0
        if used <= 1:
            break

    x = nb_value.copy()
    x[basis] = x_b
    obj = float(np.dot(c_full[:n], x[:n])) * sign
    return OPTIMAL, x[:n], obj
