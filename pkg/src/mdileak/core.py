"""Shared protocol types and foundational math for the finite-key analysis.

All count-valued quantities are carried as non-negative reals: the
expected-value simulation mode never rounds, which is how the headline
rate-versus-distance curves are computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

VARIANT_3INT = "ThreeIntensitySymmetric"
VARIANT_4INT = "FourIntensity"
VARIANTS = (VARIANT_3INT, VARIANT_4INT)

PATH_SERFLING = "Serfling"
PATH_COIN = "QuantumCoin"

BASES = ("Z", "X")

PROB_TOL = 1e-9  # slack for probability-normalization checks


def _require_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} = {value!r} outside [0, 1]")


@dataclass(frozen=True)
class ProtocolConfig:
    """Static protocol parameters chosen by the two senders.

    The three-intensity protocol decouples intensity from basis; the
    four-intensity protocol ties the signal intensity to the Z basis and
    the decoys (plus vacuum) to the X basis, so there p_Z = p_s and
    p_X = p_v + p_w + p_0.
    """

    variant: str
    N: float
    gamma_s: float
    gamma_v: float
    gamma_w: float
    p_s: float
    p_v: float
    p_w: float
    p_Z: float
    p_X: float
    p_Zac: float
    p_0: float = 0.0
    S_cut: int = 10
    P_cut: int = 20

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.N < 0:
            raise ValueError("N must be non-negative")
        for name in ("gamma_s", "gamma_v", "gamma_w"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.gamma_w < self.gamma_v < self.gamma_s:
            raise ValueError("intensities must satisfy gamma_w < gamma_v < gamma_s")
        for name in ("p_s", "p_v", "p_w", "p_0", "p_Z", "p_X"):
            _require_unit(name, getattr(self, name))
        if not 0.0 < self.p_Zac <= 1.0:
            raise ValueError("p_Zac must lie in (0, 1]")
        if self.S_cut < 0:
            raise ValueError("S_cut must be non-negative")
        if self.P_cut < 1:
            raise ValueError("P_cut must be positive")
        if self.variant == VARIANT_3INT:
            if self.p_0 != 0.0:
                raise ValueError("p_0 is a four-intensity field")
            if abs(self.p_s + self.p_v + self.p_w - 1.0) > PROB_TOL:
                raise ValueError("intensity probabilities must sum to 1")
            if abs(self.p_Z + self.p_X - 1.0) > PROB_TOL:
                raise ValueError("basis probabilities must sum to 1")
        else:
            if abs(self.p_s + self.p_v + self.p_w + self.p_0 - 1.0) > PROB_TOL:
                raise ValueError("intensity probabilities must sum to 1")
            if abs(self.p_Z - self.p_s) > PROB_TOL:
                raise ValueError("four-intensity coupling requires p_Z = p_s")
            if abs(self.p_X - (self.p_v + self.p_w + self.p_0)) > PROB_TOL:
                raise ValueError("four-intensity coupling requires p_X = p_v + p_w + p_0")

    @property
    def intensities(self) -> tuple[str, ...]:
        if self.variant == VARIANT_3INT:
            return ("s", "v", "w")
        return ("s", "v", "w", "0")

    def gamma(self, j: str) -> float:
        try:
            return {"s": self.gamma_s, "v": self.gamma_v, "w": self.gamma_w, "0": 0.0}[j]
        except KeyError:
            raise ValueError(f"unknown intensity id {j!r}") from None

    def prob(self, j: str) -> float:
        try:
            return {"s": self.p_s, "v": self.p_v, "w": self.p_w, "0": self.p_0}[j]
        except KeyError:
            raise ValueError(f"unknown intensity id {j!r}") from None

    def basis_prob(self, chi: str) -> float:
        if chi == "Z":
            return self.p_Z
        if chi == "X":
            return self.p_X
        raise ValueError(f"unknown basis {chi!r}")

    def basis_of(self, j: str) -> str:
        """Basis a given intensity can occur with (four-intensity coupling)."""
        if self.variant == VARIANT_3INT:
            raise ValueError("intensity and basis are independent in this variant")
        return "Z" if j == "s" else "X"


@dataclass(frozen=True)
class ChannelParams:
    """Honest-channel model parameters; the relay sits at the midpoint."""

    e_d: float
    p_d: float
    eta_det: float
    alpha: float
    f_EC: float
    L: float

    def __post_init__(self) -> None:
        _require_unit("e_d", self.e_d)
        _require_unit("p_d", self.p_d)
        _require_unit("eta_det", self.eta_det)
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.f_EC < 1.0:
            raise ValueError("f_EC must be at least 1")
        if self.L < 0:
            raise ValueError("L must be non-negative")


@dataclass(frozen=True)
class EpsilonBudget:
    """Failure-probability bookkeeping.

    A single estimation budget eps_total is split uniformly across every
    concentration-inequality invocation of a run; the secrecy parameter is
    derived so that eps_sec^2 - eps = eps_total > 0 always holds.
    """

    eps_total: float = 1e-10
    eps_cor: float = 1e-15

    def __post_init__(self) -> None:
        if not 0.0 < self.eps_total < 1.0:
            raise ValueError("eps_total must lie in (0, 1)")
        if not 0.0 < self.eps_cor < 1.0:
            raise ValueError("eps_cor must lie in (0, 1)")

    @property
    def eps(self) -> float:
        """Aggregate estimation-failure probability."""
        return self.eps_total

    @property
    def eps_sec(self) -> float:
        return math.sqrt(2.0 * self.eps_total)

    def unit(self, invocations: int) -> float:
        """Per-invocation failure share for a run with the given invocation count."""
        if invocations <= 0:
            raise ValueError("invocation count must be positive")
        return self.eps_total / invocations


def invocation_count(config: ProtocolConfig, path: str) -> int:
    """Number of concentration-inequality uses in one key-rate evaluation.

    Each decoy linear program consumes two one-sided deviations per unknown
    photon-number cell plus two per aggregate intensity-pair cell; both
    variants run their full objective set, upper single-photon bounds
    included.  The four-intensity variant adds the scaling deviations
    (vacuum lower, single-photon lower and upper, two sides each).  The
    phase-error step adds one Serfling use, or five event-class
    deviations (two sides each) on the quantum-coin path.
    """
    per_lp = 2 * ((config.S_cut + 1) ** 2 + 9)
    if config.variant == VARIANT_3INT:
        total = 6 * per_lp
    else:
        total = 4 * per_lp + 12
    if path == PATH_SERFLING:
        return total + 1
    if path == PATH_COIN:
        return total + 10
    raise ValueError(f"unknown phase-error path {path!r}")


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy H(x) = -x log2 x - (1-x) log2 (1-x).

    Parameters
    ----------
    x : float
        Probability in [0, 1]; the endpoint limits are 0.

    Returns
    -------
    float
        Entropy in bits, in [0, 1].
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary_entropy argument {x!r} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def poisson_pmf(n: int, gamma: float) -> float:
    """Poisson probability gamma^n e^{-gamma} / n!, stable in the log domain."""
    if n < 0:
        raise ValueError("photon number must be non-negative")
    if gamma < 0:
        raise ValueError("mean photon number must be non-negative")
    if gamma == 0.0:
        return 1.0 if n == 0 else 0.0
    return math.exp(n * math.log(gamma) - gamma - math.lgamma(n + 1))


def azuma_bound(x: float, y: float) -> float:
    """Concentration deviation f(x, y) = sqrt(2 x ln(1/y)) for x trials."""
    if x < 0:
        raise ValueError("trial count must be non-negative")
    if not 0.0 < y <= 1.0:
        raise ValueError("failure probability must lie in (0, 1]")
    return math.sqrt(2.0 * x * math.log(1.0 / y))


def serfling_upsilon(x: float, y: float, z: float) -> float:
    """Sampling-without-replacement deviation sqrt((x+1) ln(1/z) / (2 y (x+y)))."""
    if y <= 0:
        raise ValueError("sample count must be positive")
    if x < 0:
        raise ValueError("population count must be non-negative")
    if not 0.0 < z <= 1.0:
        raise ValueError("failure probability must lie in (0, 1]")
    return math.sqrt((x + 1.0) * math.log(1.0 / z) / (2.0 * y * (x + y)))


def poisson_upper_tail(gamma: float, cutoff: int) -> float:
    """Pr[n > cutoff] for a Poisson(gamma) variable, accurate for tiny tails.

    Evaluates the leading term in the log domain and sums the remaining
    ratio series directly, so masses far below double-precision rounding
    of 1 - sum survive.
    """
    if gamma < 0:
        raise ValueError("mean photon number must be non-negative")
    if gamma == 0.0:
        return 0.0
    k = cutoff + 1
    log_lead = k * math.log(gamma) - gamma - math.lgamma(k + 1)
    term = 1.0
    total = 1.0
    j = 1
    while True:
        term *= gamma / (k + j)
        total += term
        if term < total * 1e-17 or j > 10_000:
            break
        j += 1
    return min(1.0, math.exp(log_lead) * total)


def tail_term(j_A: str, j_B: str, S_cut: int, config: ProtocolConfig) -> float:
    """Truncation mass 1 - sum_{n,m<=S_cut} p_n^{j_A} p_m^{j_B} for a cell."""
    if S_cut < 0:
        raise ValueError("S_cut must be non-negative")
    t_a = poisson_upper_tail(config.gamma(j_A), S_cut)
    t_b = poisson_upper_tail(config.gamma(j_B), S_cut)
    return t_a + t_b - t_a * t_b
