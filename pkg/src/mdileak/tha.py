"""Closed-form Trojan-horse leakage quantifiers.

Back-reflections from the intensity modulator are coherent states whose
amplitude depends on the attack model: Case1 pins every amplitude at the
ceiling sqrt(I_max), Case2 scales amplitudes like the sender's pulses, and
Case3 additionally phase-randomizes the reflected light.  The phase
modulator leaks a basis-dependent coherent state of intensity I_max (split
in half by the four-intensity receiver-side splitter).

All distances here are between product states of the two senders'
reflections, computed from first-principles coherent-state overlaps.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Mapping

from .core import (
    VARIANT_3INT,
    VARIANT_4INT,
    ProtocolConfig,
    poisson_pmf,
    poisson_upper_tail,
)

CASES = ("Case1", "Case2", "Case3")

MODE_IM_ONLY = "im-only"
MODE_IM_AND_PM = "im-and-pm"
LEAK_MODES = (MODE_IM_ONLY, MODE_IM_AND_PM)

# Case3 requires the reflected intensities to stay below this ceiling for
# the truncated bound's derivation to apply.
CASE3_I_MAX_LIMIT = math.log(2.0)


@dataclass(frozen=True)
class ThaConfig:
    """Adversarial back-reflection model: case, ceiling intensity, and phases."""

    case: str
    I_max: float
    beta: Mapping[str, float] = field(default_factory=dict)
    theta_im: Mapping[str, float] = field(default_factory=dict)
    theta_pm: Mapping[str, float] = field(default_factory=lambda: {"Z": 0.0, "X": 0.0})

    def __post_init__(self) -> None:
        if self.case not in CASES:
            raise ValueError(f"unknown attack case {self.case!r}")
        if self.I_max < 0:
            raise ValueError("I_max must be non-negative")
        for j, b in self.beta.items():
            if b < 0:
                raise ValueError(f"beta[{j!r}] must be non-negative")
        if self.theta_im.get("s", 0.0) != 0.0:
            raise ValueError("theta_s is pinned to 0")
        if self.theta_im.get("0", 0.0) != 0.0:
            raise ValueError("theta_0 is pinned to 0")

    @classmethod
    def for_config(
        cls,
        case: str,
        I_max: float,
        config: ProtocolConfig,
        *,
        theta_v: float = 0.0,
        theta_w: float = 0.0,
        theta_Z: float = 0.0,
        theta_X: float = 0.0,
    ) -> "ThaConfig":
        """Build the amplitude map implied by the case rule for this protocol."""
        if case not in CASES:
            raise ValueError(f"unknown attack case {case!r}")
        beta: dict[str, float] = {}
        for j in config.intensities:
            if case == "Case1":
                beta[j] = math.sqrt(I_max)
            else:
                beta[j] = math.sqrt(I_max * config.gamma(j) / config.gamma_s)
        theta_im = {"s": 0.0, "v": theta_v, "w": theta_w}
        if config.variant == VARIANT_4INT:
            theta_im["0"] = 0.0
        return cls(
            case=case,
            I_max=I_max,
            beta=beta,
            theta_im=theta_im,
            theta_pm={"Z": theta_Z, "X": theta_X},
        )


@dataclass(frozen=True)
class TraceDistanceSet:
    """Pairwise distances consumed by the active estimator.

    Three-intensity keys are the eight cells compared against ss.  The
    four-intensity map holds the cells of the X-basis program compared
    against its vv reference, plus the ("s", "s") entry for the cross-basis
    ss-versus-vv comparison used by the scaling step.
    """

    D: Mapping[tuple[str, str], float]

    def __post_init__(self) -> None:
        for key, value in self.D.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"trace distance D[{key!r}] = {value!r} outside [0, 1]")


def coherent_overlap(amp1: float, phase1: float, amp2: float, phase2: float) -> complex:
    """Inner product <alpha1|alpha2> of two coherent states.

    With alpha_k = amp_k e^{i phase_k} this is
    exp(-(amp1^2 + amp2^2)/2 + amp1 amp2 e^{i(phase2 - phase1)}).
    """
    if amp1 < 0 or amp2 < 0:
        raise ValueError("amplitudes must be non-negative")
    exponent = -(amp1 * amp1 + amp2 * amp2) / 2.0 + amp1 * amp2 * cmath.exp(
        1j * (phase2 - phase1)
    )
    return cmath.exp(exponent)


def _log_overlap_mag(amp1: float, phase1: float, amp2: float, phase2: float) -> float:
    """log |<alpha1|alpha2>|, exact in the small-amplitude regime.

    Working on the log scale keeps sqrt(1 - |overlap|^2) accurate via
    expm1 when the amplitudes are tiny and the overlap sits within one
    ulp of 1.
    """
    return (
        -(amp1 * amp1 + amp2 * amp2) / 2.0
        + amp1 * amp2 * math.cos(phase2 - phase1)
    )


def _pure_distance(log_mag: float) -> float:
    """sqrt(1 - |overlap|^2) from the overlap's log magnitude."""
    return math.sqrt(max(0.0, -math.expm1(2.0 * log_mag)))


def _tv_poisson_bound(i1: float, i2: float, p_cut: int) -> float:
    """Upper bound on the total variation between Poisson(i1) and Poisson(i2).

    Truncated sum plus both tail masses, so the bound dominates the exact
    series value for any truncation order.
    """
    acc = 0.0
    for n in range(p_cut + 1):
        acc += abs(poisson_pmf(n, i1) - poisson_pmf(n, i2))
    acc = 0.5 * acc + 0.5 * (poisson_upper_tail(i1, p_cut) + poisson_upper_tail(i2, p_cut))
    return min(1.0, acc)


def _product_bound(t_a: float, t_b: float) -> float:
    """Distance bound for a product of two states from per-party bounds."""
    return t_a + t_b - t_a * t_b


def _check_case3(tha: ThaConfig) -> None:
    if tha.I_max > CASE3_I_MAX_LIMIT:
        raise ValueError("Case3 bound requires I_max <= log 2")


def _case3_intensity_3int(tha: ThaConfig, j: str) -> float:
    return tha.beta[j] ** 2


def _case3_intensity_4int(tha: ThaConfig, j: str) -> float:
    # Joint phase randomization of the split IM and PM reflections gives a
    # diagonal state of mean photon number (beta_j^2 + I_max) / 2 per party.
    return (tha.beta[j] ** 2 + tha.I_max) / 2.0


def trace_distance_3int(
    j_A: str, j_B: str, tha: ThaConfig, config: ProtocolConfig
) -> float:
    """Distance between the (j_A, j_B) cell's reflections and the ss cell's.

    Cases 1 and 2 compare pure product coherent states, so the distance is
    sqrt(1 - |overlap|^2).  Case3 compares products of phase-randomized
    (diagonal) states and returns a truncated upper bound.
    """
    if (j_A, j_B) == ("s", "s"):
        raise ValueError("the ss cell is the reference; no self-distance")
    if j_A not in config.intensities or j_B not in config.intensities:
        raise ValueError(f"unknown cell ({j_A!r}, {j_B!r})")
    if tha.I_max == 0.0:
        return 0.0
    if tha.case == "Case3":
        _check_case3(tha)
        t_a = _tv_poisson_bound(
            _case3_intensity_3int(tha, j_A), _case3_intensity_3int(tha, "s"), config.P_cut
        )
        t_b = _tv_poisson_bound(
            _case3_intensity_3int(tha, j_B), _case3_intensity_3int(tha, "s"), config.P_cut
        )
        return _product_bound(t_a, t_b)
    log_mag = _log_overlap_mag(
        tha.beta["s"], tha.theta_im["s"], tha.beta[j_A], tha.theta_im[j_A]
    ) + _log_overlap_mag(
        tha.beta["s"], tha.theta_im["s"], tha.beta[j_B], tha.theta_im[j_B]
    )
    return _pure_distance(log_mag)


def trace_distance_4int(
    j_A: str,
    j_B: str,
    tha: ThaConfig,
    config: ProtocolConfig,
    include_pm: bool = True,
) -> float:
    """Distance of the named cell's reflections from the vv reference.

    Cells from {v, w, 0}^2 compare X-basis states against the X-basis vv
    cell: the phase-modulator reflection is identical on both sides and
    drops out, leaving the split-amplitude intensity-modulator overlaps.
    The ("s", "s") cell crosses bases, so the phase-modulator factor (one
    per party) enters as well unless the leakage model excludes the phase
    modulator (include_pm False).
    """
    if config.variant != VARIANT_4INT:
        raise ValueError("four-intensity distances need a FourIntensity config")
    if (j_A, j_B) == ("v", "v"):
        raise ValueError("the vv cell is the reference; no self-distance")
    if j_A not in config.intensities or j_B not in config.intensities:
        raise ValueError(f"unknown cell ({j_A!r}, {j_B!r})")
    cross_basis = (j_A, j_B) == ("s", "s")
    if not cross_basis and ("s" in (j_A, j_B)):
        raise ValueError("mixed signal/decoy cells do not occur in this protocol")
    if tha.I_max == 0.0:
        return 0.0
    if tha.case == "Case3":
        _check_case3(tha)
        ref = _case3_intensity_4int(tha, "v")
        t_a = _tv_poisson_bound(_case3_intensity_4int(tha, j_A), ref, config.P_cut)
        t_b = _tv_poisson_bound(_case3_intensity_4int(tha, j_B), ref, config.P_cut)
        return _product_bound(t_a, t_b)
    root2 = math.sqrt(2.0)
    log_mag = _log_overlap_mag(
        tha.beta["v"] / root2,
        tha.theta_im["v"],
        tha.beta[j_A] / root2,
        tha.theta_im[j_A],
    ) + _log_overlap_mag(
        tha.beta["v"] / root2,
        tha.theta_im["v"],
        tha.beta[j_B] / root2,
        tha.theta_im[j_B],
    )
    if cross_basis and include_pm:
        pm_amp = math.sqrt(tha.I_max / 2.0)
        log_mag += 2.0 * _log_overlap_mag(
            pm_amp, tha.theta_pm["X"], pm_amp, tha.theta_pm["Z"]
        )
    return _pure_distance(log_mag)


def coin_imbalance(p_Z: float, p_X: float, re_overlap: float) -> float:
    """Worst-case probability that the virtual basis coin reads minus.

    Delta = (1/2) [1 - (2 p_Z p_X / (p_Z^2 + p_X^2)) re_overlap].
    """
    if abs(p_Z + p_X - 1.0) > 1e-9:
        raise ValueError("basis probabilities must sum to 1")
    if not -1.0 <= re_overlap <= 1.0:
        raise ValueError("re_overlap must lie in [-1, 1]")
    q = 2.0 * p_Z * p_X / (p_Z * p_Z + p_X * p_X)
    return 0.5 * (1.0 - q * re_overlap)


def overlap_ZX(variant: str, tha: ThaConfig, config: ProtocolConfig) -> float:
    """Re(<Psi_Z|Psi_X>_A <Psi_Z|Psi_X>_B) for the simulation model.

    The three-intensity value involves only the phase-modulator
    reflections (intensity choice is basis-independent there).  The
    four-intensity value mixes the decoy intensity kets into the X-basis
    state, with the reflected amplitudes halved by the 50:50 splitter.
    """
    if variant == VARIANT_3INT:
        amp = math.sqrt(tha.I_max)
        o_pm = coherent_overlap(amp, tha.theta_pm["Z"], amp, tha.theta_pm["X"])
        return (o_pm * o_pm).real
    if variant != VARIANT_4INT:
        raise ValueError(f"unknown variant {variant!r}")
    denom = config.p_v + config.p_w
    if denom <= 0.0:
        raise ValueError("four-intensity overlap needs p_v + p_w > 0")
    root2 = math.sqrt(2.0)
    o_v = coherent_overlap(
        tha.beta["s"] / root2, tha.theta_im["s"], tha.beta["v"] / root2, tha.theta_im["v"]
    )
    o_w = coherent_overlap(
        tha.beta["s"] / root2, tha.theta_im["s"], tha.beta["w"] / root2, tha.theta_im["w"]
    )
    pm_amp = math.sqrt(tha.I_max / 2.0)
    o_pm = coherent_overlap(pm_amp, tha.theta_pm["Z"], pm_amp, tha.theta_pm["X"])
    per_party = o_pm * (config.p_v * o_v + config.p_w * o_w) / denom
    return (per_party * per_party).real
