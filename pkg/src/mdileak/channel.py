"""Midpoint Bell-state-measurement channel model.

The relay interferes the two senders' pulses on a 50:50 beamsplitter and
watches four threshold detectors (H/V at each output port).  A successful
measurement is the exact two-detector coincidence announcing a psi- or
psi+ projection.  Yields are computed by exact enumeration: for k and l
photons surviving loss, the probability that any detector subset stays
empty has a closed Gram-sum form, and inclusion-exclusion turns those
subset-vacuum numbers into click-pattern probabilities.  Dark counts fill
silent detectors independently.  Misalignment rotates Bob's polarization
by theta_mis with sin^2(theta_mis) = e_d.

Vacuum and multi-photon error behavior (the 1/2 floor) emerges from this
detector model instead of being asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import (
    VARIANT_3INT,
    ChannelParams,
    ProtocolConfig,
    poisson_pmf,
    poisson_upper_tail,
)

MAX_PHOTONS = 64  # hard enumeration bound; beyond this the caller is lost

# Detector bitmasks: cH=1, cV=2, dH=4, dV=8 (c/d are the two output ports).
_PSI_MINUS = (1 | 8, 2 | 4)
_PSI_PLUS = (1 | 2, 4 | 8)

_PAIR_CLASSES = ("ZZ", "XX", "ZX", "XZ")

# Poisson mass ignored beyond the enumeration cap, relative to one round.
_TAIL_EPS = 1e-18


@dataclass(frozen=True)
class YieldTable:
    """Click and error-click probabilities per photon-number cell and basis.

    Exact entries cover n, m <= cap (cap is never below the protocol's
    S_cut); the band field carries the saturated yields used for the
    aggregate high-photon band beyond the cap.
    """

    Y: Mapping[tuple[int, int, str], float]
    EY: Mapping[tuple[int, int, str], float]
    band: Mapping[str, tuple[float, float]]
    cap: int

    def __post_init__(self) -> None:
        for key, y in self.Y.items():
            ey = self.EY[key]
            if not 0.0 <= ey <= y <= 1.0:
                raise ValueError(f"yield ordering violated at {key!r}: EY={ey}, Y={y}")


@dataclass(frozen=True)
class ObservedStats:
    """Aggregated counts the estimators consume.

    total_clicks is the raw number of announced events over all basis and
    intensity combinations, before any sifting or fictitious-basis
    retention; the quantum-coin deviations run over that trial count.
    The truth fields are oracle-only: per-photon-number true clicks,
    trials and errors for n, m <= S_cut, used by sandwich and coverage
    tests and by the event-level resampler.
    """

    N_click: Mapping[tuple[str, str, str], float]
    N_error: Mapping[tuple[str, str, str], float]
    N_chi: Mapping[str, float]
    Z_ss_size: float
    E_Z_ss: float
    total_clicks: float
    truth: Mapping[tuple[int, int, str, str, str], float] | None = None
    truth_trials: Mapping[tuple[int, int, str, str, str], float] | None = None
    truth_errors: Mapping[tuple[int, int, str, str, str], float] | None = None

    def __post_init__(self) -> None:
        for key, clicks in self.N_click.items():
            if clicks < 0:
                raise ValueError(f"negative click count at {key!r}")
            errs = self.N_error.get(key, 0.0)
            if errs < 0 or errs > clicks * (1 + 1e-12) + 1e-9:
                raise ValueError(f"error count exceeds clicks at {key!r}")
        if self.Z_ss_size < 0 or self.total_clicks < 0:
            raise ValueError("counts must be non-negative")
        if not 0.0 <= self.E_Z_ss <= 1.0:
            raise ValueError("E_Z_ss must lie in [0, 1]")


def arm_transmittance(channel: ChannelParams) -> float:
    """Per-arm transmittance eta_det * 10^(-alpha (L/2) / 10), relay at midpoint."""
    return channel.eta_det * 10.0 ** (-channel.alpha * (channel.L / 2.0) / 10.0)


def _pair_norm(k: int, l: int, p: float, q: float, s2: float) -> float:
    """Norm^2 of (u.f+)^k (v.f+)^l |0> / sqrt(k! l!) for truncated mode vectors.

    p = |u|^2, q = |v|^2, s2 = |<u, v>|^2.  Equals
    p^k * sum_j C(l,j) C(k+j,j) (s2/p)^j (q - s2/p)^(l-j).
    """
    if k == 0 and l == 0:
        return 1.0
    if k == 0:
        return q**l
    if l == 0:
        return p**k
    if p <= 0.0:
        return 0.0
    r = s2 / p
    t2 = q - r
    if t2 < 0.0:
        t2 = 0.0
    acc = 0.0
    for j in range(l + 1):
        acc += math.comb(l, j) * math.comb(k + j, j) * r**j * t2 ** (l - j)
    return p**k * acc


def _announce_probs(
    k: int, l: int, alpha_A: float, alpha_B: float, p_d: float
) -> tuple[float, float]:
    """(psi-minus, psi-plus) announcement probabilities for k, l photons.

    alpha_A, alpha_B are the polarization angles (radians) of the two
    incoming pulses; dark counts included.
    """
    ca, sa = math.cos(alpha_A), math.sin(alpha_A)
    cb, sb = math.cos(alpha_B), math.sin(alpha_B)
    inv = 1.0 / math.sqrt(2.0)
    u = (ca * inv, sa * inv, ca * inv, sa * inv)
    v = (cb * inv, sb * inv, -cb * inv, -sb * inv)

    empty = [0.0] * 16
    for mask in range(16):
        p = q = s = 0.0
        for mode in range(4):
            if mask & (1 << mode):
                continue
            um, vm = u[mode], v[mode]
            p += um * um
            q += vm * vm
            s += um * vm
        empty[mask] = _pair_norm(k, l, p, q, s * s)

    keep2 = (1.0 - p_d) * (1.0 - p_d)
    e15 = empty[15]

    def final(pattern: int) -> float:
        bit_i = pattern & -pattern
        bit_j = pattern ^ bit_i
        comp = 15 ^ pattern
        only_i = empty[comp | bit_j] - e15  # exactly detector i clicked
        only_j = empty[comp | bit_i] - e15
        both = empty[comp] - empty[comp | bit_i] - empty[comp | bit_j] + e15
        acc = e15 * p_d * p_d + (only_i + only_j) * p_d + both
        return keep2 * acc

    pm = final(_PSI_MINUS[0]) + final(_PSI_MINUS[1])
    pp = final(_PSI_PLUS[0]) + final(_PSI_PLUS[1])
    return pm, pp


def _combo_angles(pair_class: str, theta_mis: float) -> list[tuple[float, float, int, int]]:
    """Four equiprobable bit combinations for a basis-pair class.

    Returns (alpha_A, alpha_B, err_minus, err_plus) with the error flags
    telling whether a psi-/psi+ announcement is a bit error for that
    combination (mixed classes carry no error bookkeeping).
    """
    quarter = math.pi / 4.0
    half = math.pi / 2.0
    combos = []
    for a in (0, 1):
        for b in (0, 1):
            alpha_a = a * half + (quarter if pair_class[0] == "X" else 0.0)
            alpha_b = b * half + (quarter if pair_class[1] == "X" else 0.0) + theta_mis
            if pair_class == "ZZ":
                err_m = err_p = 1 if a == b else 0
            elif pair_class == "XX":
                err_m = 1 if a == b else 0
                err_p = 1 if a != b else 0
            else:
                err_m = err_p = 0
            combos.append((alpha_a, alpha_b, err_m, err_p))
    return combos


_CORE_CACHE: dict[tuple[float, float], tuple[int, dict[str, tuple[np.ndarray, np.ndarray]]]] = {}


def _core_tables(e_d: float, p_d: float, cap: int) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Detector-level (post-loss) yield tables per basis-pair class.

    Cached per (e_d, p_d); rebuilt only when a larger cap is requested.
    """
    if cap > MAX_PHOTONS:
        raise ValueError(f"photon number beyond enumeration bound {MAX_PHOTONS}")
    key = (e_d, p_d)
    hit = _CORE_CACHE.get(key)
    if hit is not None and hit[0] >= cap:
        return hit[1]
    theta_mis = math.asin(math.sqrt(e_d))
    tables: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for pair_class in _PAIR_CLASSES:
        y = np.zeros((cap + 1, cap + 1))
        ey = np.zeros((cap + 1, cap + 1))
        combos = _combo_angles(pair_class, theta_mis)
        for k in range(cap + 1):
            for l in range(cap + 1):
                acc_y = acc_e = 0.0
                for alpha_a, alpha_b, err_m, err_p in combos:
                    pm, pp = _announce_probs(k, l, alpha_a, alpha_b, p_d)
                    acc_y += pm + pp
                    acc_e += err_m * pm + err_p * pp
                y[k, l] = acc_y / 4.0
                ey[k, l] = acc_e / 4.0
        tables[pair_class] = (y, ey)
    _CORE_CACHE[key] = (cap, tables)
    return tables


def _binomial_weights(eta: float, cap: int) -> np.ndarray:
    """W[n, k] = C(n, k) eta^k (1-eta)^(n-k), lower-triangular."""
    w = np.zeros((cap + 1, cap + 1))
    for n in range(cap + 1):
        for k in range(n + 1):
            w[n, k] = math.comb(n, k) * eta**k * (1.0 - eta) ** (n - k)
    return w


def _mixed_tables(
    channel: ChannelParams, cap: int
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Pre-loss yield tables: binomial loss mixing folded over the core."""
    core = _core_tables(channel.e_d, channel.p_d, cap)
    eta = arm_transmittance(channel)
    w = _binomial_weights(eta, cap)
    mixed = {}
    for pair_class, (y, ey) in core.items():
        yc = y[: cap + 1, : cap + 1]
        ec = ey[: cap + 1, : cap + 1]
        mixed[pair_class] = (w @ yc @ w.T, w @ ec @ w.T)
    return mixed


def _photon_cap(gamma_max: float, s_cut: int) -> int:
    cap = max(s_cut, 1)
    while cap < MAX_PHOTONS and poisson_upper_tail(gamma_max, cap) > _TAIL_EPS:
        cap += 1
    if poisson_upper_tail(gamma_max, cap) > 1e-15:
        raise ValueError(f"intensity {gamma_max} too large for enumeration bound")
    return cap


def fock_yields(
    n: int, m: int, eta_A: float, eta_B: float, channel: ChannelParams
) -> dict[str, tuple[float, float]]:
    """(Y, EY) per basis for an (n, m) photon-pair input after loss.

    eta_A and eta_B are the per-arm transmittances applied as binomial
    loss before the relay enumeration.
    """
    if n < 0 or m < 0:
        raise ValueError("photon numbers must be non-negative")
    if n > MAX_PHOTONS or m > MAX_PHOTONS:
        raise ValueError(f"photon number beyond enumeration bound {MAX_PHOTONS}")
    cap = max(n, m)
    core = _core_tables(channel.e_d, channel.p_d, cap)
    wa = _binomial_weights(eta_A, cap)[n, : cap + 1]
    wb = _binomial_weights(eta_B, cap)[m, : cap + 1]
    out = {}
    for basis, pair_class in (("Z", "ZZ"), ("X", "XX")):
        y, ey = core[pair_class]
        out[basis] = (
            float(wa @ y[: cap + 1, : cap + 1] @ wb),
            float(wa @ ey[: cap + 1, : cap + 1] @ wb),
        )
    return out


def yield_table(config: ProtocolConfig, channel: ChannelParams) -> YieldTable:
    """Same-basis yield table for this configuration's intensity range."""
    cap = _photon_cap(config.gamma_s, config.S_cut)
    mixed = _mixed_tables(channel, cap)
    y_map: dict[tuple[int, int, str], float] = {}
    ey_map: dict[tuple[int, int, str], float] = {}
    for basis, pair_class in (("Z", "ZZ"), ("X", "XX")):
        y, ey = mixed[pair_class]
        for n in range(cap + 1):
            for m in range(cap + 1):
                y_map[(n, m, basis)] = float(y[n, m])
                ey_map[(n, m, basis)] = float(ey[n, m])
    band = {
        basis: (
            float(mixed[pair_class][0][cap, cap]),
            float(mixed[pair_class][1][cap, cap]),
        )
        for basis, pair_class in (("Z", "ZZ"), ("X", "XX"))
    }
    return YieldTable(Y=y_map, EY=ey_map, band=band, cap=cap)


def _poisson_vector(gamma: float, cap: int) -> np.ndarray:
    return np.array([poisson_pmf(n, gamma) for n in range(cap + 1)])


def expected_counts(config: ProtocolConfig, channel: ChannelParams) -> ObservedStats:
    """Honest-channel expected statistics for one run.

    Sifted cells carry the fictitious-basis retention factor p_Zac;
    total_clicks does not (clicks precede sifting).  The truth table is
    populated for n, m <= S_cut.
    """
    cap = _photon_cap(config.gamma_s, config.S_cut)
    mixed = _mixed_tables(channel, cap)
    pvec = {j: _poisson_vector(config.gamma(j), cap) for j in config.intensities}
    n_rounds = config.N

    n_click: dict[tuple[str, str, str], float] = {}
    n_error: dict[tuple[str, str, str], float] = {}
    truth: dict[tuple[int, int, str, str, str], float] = {}
    truth_trials: dict[tuple[int, int, str, str, str], float] = {}
    truth_errors: dict[tuple[int, int, str, str, str], float] = {}

    def fill_cell(j_a: str, j_b: str, chi: str, pair_prob: float, pair_class: str) -> None:
        y, ey = mixed[pair_class]
        weight = n_rounds * config.p_Zac * pair_prob
        pa, pb = pvec[j_a], pvec[j_b]
        n_click[(j_a, j_b, chi)] = float(weight * (pa @ y @ pb))
        n_error[(j_a, j_b, chi)] = float(weight * (pa @ ey @ pb))
        for n in range(config.S_cut + 1):
            for m in range(config.S_cut + 1):
                cell_w = weight * pa[n] * pb[m]
                key = (n, m, j_a, j_b, chi)
                truth_trials[key] = cell_w
                truth[key] = cell_w * float(y[n, m])
                truth_errors[key] = cell_w * float(ey[n, m])

    total_clicks = 0.0
    if config.variant == VARIANT_3INT:
        for chi, pair_class in (("Z", "ZZ"), ("X", "XX")):
            p_basis = config.basis_prob(chi) ** 2
            for j_a in config.intensities:
                for j_b in config.intensities:
                    fill_cell(
                        j_a, j_b, chi, p_basis * config.prob(j_a) * config.prob(j_b), pair_class
                    )
        for chi_a in ("Z", "X"):
            for chi_b in ("Z", "X"):
                y_cls = mixed[chi_a + chi_b][0]
                basis_w = config.basis_prob(chi_a) * config.basis_prob(chi_b)
                for j_a in config.intensities:
                    for j_b in config.intensities:
                        w = n_rounds * basis_w * config.prob(j_a) * config.prob(j_b)
                        total_clicks += w * float(pvec[j_a] @ y_cls @ pvec[j_b])
        n_chi = {"Z": n_rounds * config.p_Z**2, "X": n_rounds * config.p_X**2}
    else:
        fill_cell("s", "s", "Z", config.p_s**2, "ZZ")
        for j_a in ("v", "w", "0"):
            for j_b in ("v", "w", "0"):
                fill_cell(j_a, j_b, "X", config.prob(j_a) * config.prob(j_b), "XX")
        for j_a in config.intensities:
            for j_b in config.intensities:
                pair_class = ("Z" if j_a == "s" else "X") + ("Z" if j_b == "s" else "X")
                y_cls = mixed[pair_class][0]
                w = n_rounds * config.prob(j_a) * config.prob(j_b)
                total_clicks += w * float(pvec[j_a] @ y_cls @ pvec[j_b])
        n_chi = {"Z": n_rounds * config.p_s**2, "X": n_rounds * config.p_X**2}

    ss_clicks = n_click[("s", "s", "Z")]
    ss_errors = n_error[("s", "s", "Z")]
    e_z = ss_errors / ss_clicks if ss_clicks > 0 else 0.0
    return ObservedStats(
        N_click=n_click,
        N_error=n_error,
        N_chi=n_chi,
        Z_ss_size=ss_clicks,
        E_Z_ss=e_z,
        total_clicks=total_clicks,
        truth=truth,
        truth_trials=truth_trials,
        truth_errors=truth_errors,
    )


def sample_counts(stats: ObservedStats, seed: int) -> ObservedStats:
    """Event-level binomial resampling of the observed cells.

    Each photon-number cell resamples its click count from its true trial
    count and click probability, then errors from the clicked events.
    Requires the truth tables; deterministic in the seed.
    """
    if stats.truth is None or stats.truth_trials is None or stats.truth_errors is None:
        raise ValueError("sample_counts needs stats carrying the truth tables")
    rng = np.random.default_rng(seed)
    sampled: dict[tuple[str, str, str], tuple[float, float]] = {}
    exact: dict[tuple[str, str, str], tuple[float, float]] = {}
    for key in sorted(stats.truth.keys()):
        cell_key = (key[2], key[3], key[4])
        trials = stats.truth_trials[key]
        clicks_mean = stats.truth[key]
        errors_mean = stats.truth_errors[key]
        ec, ee = exact.get(cell_key, (0.0, 0.0))
        exact[cell_key] = (ec + clicks_mean, ee + errors_mean)
        trials_int = int(round(trials))
        if trials_int <= 0 or clicks_mean <= 0:
            continue
        p_click = min(1.0, clicks_mean / trials)
        clicks = float(rng.binomial(trials_int, p_click))
        p_err = min(1.0, errors_mean / clicks_mean)
        errors = float(rng.binomial(int(clicks), p_err)) if clicks > 0 else 0.0
        sc, se = sampled.get(cell_key, (0.0, 0.0))
        sampled[cell_key] = (sc + clicks, se + errors)
    # Cells keep their expected residual mass beyond S_cut so that sampled
    # aggregates stay comparable with the full-truth expectations.
    n_click = dict(stats.N_click)
    n_error = dict(stats.N_error)
    for cell_key in n_click:
        exact_c, exact_e = exact.get(cell_key, (0.0, 0.0))
        samp_c, samp_e = sampled.get(cell_key, (0.0, 0.0))
        n_click[cell_key] = stats.N_click[cell_key] - exact_c + samp_c
        n_error[cell_key] = min(
            n_click[cell_key], stats.N_error[cell_key] - exact_e + samp_e
        )
    ss_clicks = n_click[("s", "s", "Z")]
    ss_errors = n_error[("s", "s", "Z")]
    return ObservedStats(
        N_click=n_click,
        N_error=n_error,
        N_chi=dict(stats.N_chi),
        Z_ss_size=ss_clicks,
        E_Z_ss=ss_errors / ss_clicks if ss_clicks > 0 else 0.0,
        total_clicks=stats.total_clicks,
        truth=stats.truth,
        truth_trials=stats.truth_trials,
        truth_errors=stats.truth_errors,
    )
