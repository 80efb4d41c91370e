"""Phase-error-rate estimation for the single-photon-pair contribution.

Two paths bound the phase-error count.  The random-sampling path treats
the test-basis single-pair cells as a sample of the key-basis population
(sampling without replacement).  The quantum-coin path applies to
basis-dependent reflections: a virtual coin tags each retained
single-pair round as key-like or test-like, and the Bloch-sphere bound
on the coin's imbalance links the observed test-basis error fraction to
the key-basis phase-error fraction.  All counts entering the coin
inequality live in the retained frame, the same frame the decoy
estimates are computed in; the retention probability appears only
through the population deviation term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .channel import ObservedStats
from .core import (
    PATH_COIN,
    PATH_SERFLING,
    EpsilonBudget,
    ProtocolConfig,
    azuma_bound,
    invocation_count,
    serfling_upsilon,
)
from .lp import DecoyEstimates
from .tha import (
    LEAK_MODES,
    MODE_IM_ONLY,
    ThaConfig,
    coin_imbalance,
    overlap_ZX,
)

_SCAN_POINTS = 1024
_BISECT_REL_TOL = 1e-6


@dataclass(frozen=True)
class PhaseErrorEstimate:
    """Upper bound on the single-pair phase-error rate with provenance.

    diagnostics carries float-valued internals of the active path
    (deviation sizes, the coin inequality sides, vacuity flags).
    """

    e_ph_U: float
    eps_ph11: float
    path: str
    diagnostics: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.e_ph_U <= 1.0:
            raise ValueError("phase-error rate must lie in [0, 1]")
        if self.path not in (PATH_SERFLING, PATH_COIN):
            raise ValueError(f"unknown path {self.path!r}")


def eph_serfling(
    n_Z: float, n_X: float, err_X_U: float, eps_prime: float
) -> tuple[float, dict[str, float]]:
    """Random-sampling bound on the phase-error rate.

    The observed test-basis error rate transfers to the key basis up to a
    without-replacement deviation; the count is clamped at the population
    size.  Empty populations or samples give the vacuous bound 1.
    """
    if n_Z <= 0.0 or n_X <= 0.0:
        return 1.0, {"vacuous": 1.0, "upsilon": 0.0}
    upsilon = serfling_upsilon(n_Z, n_X, eps_prime)
    count = n_Z * (err_X_U / n_X) + (n_Z + n_X) * upsilon
    e_ph = min(count, n_Z) / n_Z
    return e_ph, {"vacuous": 0.0, "upsilon": upsilon}


def _vacuous(eps_ph: float, diag: dict[str, float]) -> PhaseErrorEstimate:
    diag = dict(diag)
    diag["vacuous"] = 1.0
    return PhaseErrorEstimate(1.0, eps_ph, PATH_COIN, diag)


def solve_coin(
    n_sb_L: float,
    n11_Z_bounds: tuple[float, float],
    n11_X_bounds: tuple[float, float],
    err11_X_U: float,
    delta_coin: float,
    p_Zac: float,
    delta: float,
    eps_ph: float,
) -> PhaseErrorEstimate:
    """Largest phase-error count consistent with the coin inequality.

    Normalising the concentration form of the coin bound by the retained
    single-pair population turns it into a statement about fractions:

        (1 - p_Zac d / n_sb_L)(1 - 2 delta_coin)
            <= sqrt((err_U + d)/n_X_L * (x + d)/n_Z_L)
             + sqrt((1 + d/n_X_L) * (1 - (x - d)/n_Z))

    where d is the one-sided concentration radius shared by the five
    event-class martingales and every deviation takes its
    bound-saturating sign: count denominators use lower estimates, the
    test-basis error count in the complementary factor sits at zero, and
    the key-basis denominator of the last factor switches between its
    upper and lower estimate as x crosses d.  The right side is concave
    in x, so the feasible set is an interval containing zero; a
    1024-point scan brackets its upper edge x* and bisection refines it
    to 1e-6 of the population.  e_ph_U = x* / n_Z_L, capped at one.

    A coin with delta_coin >= 1/2, an empty population, or a population
    deviation exceeding the population gives the vacuous bound 1 with
    the flag set.
    """
    if delta < 0.0:
        raise ValueError("deviation radius must be non-negative")
    if not 0.0 < p_Zac <= 1.0:
        raise ValueError("retention probability must lie in (0, 1]")
    if delta_coin < 0.0:
        raise ValueError("coin imbalance must be non-negative")
    n_Z_L, n_Z_U = n11_Z_bounds
    n_X_L, n_X_U = n11_X_bounds
    for name, lo, hi in (("n11_Z", n_Z_L, n_Z_U), ("n11_X", n_X_L, n_X_U)):
        if lo < 0.0 or hi < lo:
            raise ValueError(f"{name} bounds must satisfy 0 <= lower <= upper")
    if err11_X_U < 0.0 or n_sb_L < 0.0:
        raise ValueError("counts must be non-negative")

    diag: dict[str, float] = {
        "delta": delta,
        "delta_coin": delta_coin,
        "n_sb_L": n_sb_L,
        "lhs": 0.0,
        "x_star": 0.0,
        "rhs_at_x": 0.0,
        "trivial": 0.0,
        "vacuous": 0.0,
    }
    if delta_coin >= 0.5 or n_sb_L <= 0.0 or n_Z_L <= 0.0 or n_X_L <= 0.0:
        return _vacuous(eps_ph, diag)
    lhs = (1.0 - p_Zac * delta / n_sb_L) * (1.0 - 2.0 * delta_coin)
    diag["lhs"] = lhs
    if lhs <= 0.0:
        return _vacuous(eps_ph, diag)

    err_factor = (err11_X_U + delta) / n_X_L
    comp_factor = 1.0 + delta / n_X_L
    diag["err_factor"] = err_factor
    diag["comp_factor"] = comp_factor

    def rhs(x: float) -> float:
        ph_factor = (x + delta) / n_Z_L
        if x >= delta:
            comp_ph = 1.0 - (x - delta) / n_Z_U
        else:
            comp_ph = 1.0 + (delta - x) / n_Z_L
        return math.sqrt(err_factor * ph_factor) + math.sqrt(
            comp_factor * max(0.0, comp_ph)
        )

    def feasible(x: float) -> bool:
        return rhs(x) >= lhs

    if feasible(n_Z_U):
        diag["trivial"] = 1.0
        diag["x_star"] = n_Z_U
        diag["rhs_at_x"] = rhs(n_Z_U)
        e_ph = min(1.0, n_Z_U / n_Z_L)
        return PhaseErrorEstimate(e_ph, eps_ph, PATH_COIN, diag)

    # rhs(0) >= 1 >= lhs, so a crossing exists strictly inside the range.
    step = n_Z_U / _SCAN_POINTS
    lo_x = 0.0
    hi_x = n_Z_U
    for k in range(_SCAN_POINTS - 1, -1, -1):
        x = k * step
        if feasible(x):
            lo_x = x
            hi_x = x + step
            break
    tol = _BISECT_REL_TOL * max(n_Z_U, 1.0)
    while hi_x - lo_x > tol:
        mid = 0.5 * (lo_x + hi_x)
        if feasible(mid):
            lo_x = mid
        else:
            hi_x = mid
    diag["x_star"] = lo_x
    diag["rhs_at_x"] = rhs(lo_x)
    e_ph = min(1.0, lo_x / n_Z_L)
    return PhaseErrorEstimate(e_ph, eps_ph, PATH_COIN, diag)


def eph_dispatch(
    estimates: DecoyEstimates,
    observed: ObservedStats,
    config: ProtocolConfig,
    tha: ThaConfig,
    mode: str,
    budget: EpsilonBudget,
) -> PhaseErrorEstimate:
    """Select and run the phase-error path for a leakage scenario.

    The random-sampling path applies when the reflected states carry no
    basis information: phase-randomized reflections (Case3), no Trojan
    light at all, or a leakage model restricted to the intensity
    modulator.  Otherwise the quantum-coin path runs on the
    basis-dependent reflections.
    """
    if mode not in LEAK_MODES:
        raise ValueError(f"unknown leakage mode {mode!r}")
    eps_u = budget.unit(invocation_count(config, PATH_COIN))
    use_sampling = (
        tha.case == "Case3" or tha.I_max == 0.0 or mode == MODE_IM_ONLY
    )
    if use_sampling:
        e_ph, diag = eph_serfling(
            estimates.n11_L, estimates.n11_X_L, estimates.err11_X_U, eps_u
        )
        eps_ph = (
            eps_u
            + estimates.eps_n11
            + estimates.eps_n11_X
            + estimates.eps_err11_X
        )
        return PhaseErrorEstimate(e_ph, eps_ph, PATH_SERFLING, diag)

    n_sb_L = estimates.n11_L + estimates.n11_X_L
    delta = azuma_bound(observed.total_clicks, eps_u)
    re_overlap = overlap_ZX(config.variant, tha, config)
    delta_coin = coin_imbalance(config.p_Z, config.p_X, re_overlap)
    eps_ph = (
        10.0 * eps_u
        + estimates.eps_n11
        + estimates.eps_n11_X
        + estimates.eps_err11_X
    )
    return solve_coin(
        n_sb_L,
        (estimates.n11_L, estimates.n11_U),
        (estimates.n11_X_L, estimates.n11_X_U),
        estimates.err11_X_U,
        delta_coin,
        config.p_Zac,
        delta,
        eps_ph,
    )
