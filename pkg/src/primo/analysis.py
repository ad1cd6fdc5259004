"""Statistics for the study: descriptives, 2x2 fixed-effects ANOVA with
partial eta squared, Wilcoxon signed-rank (exact and approximate), Cohen's
d, and simulator-sickness subscale scoring.

The ANOVA is the classical balanced-design sum-of-squares decomposition
computed from cell means; p-values come from the F distribution through the
regularized incomplete beta.  The Wilcoxon exact branch enumerates all sign
patterns, which is the reference the approximation is tested against.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special, stats


@dataclass(frozen=True)
class SampleRow:
    display: str
    style: str
    value: float
    participant: int


@dataclass(frozen=True)
class Descriptive:
    mean: float
    n: int
    _sd: Optional[float]

    @property
    def sd(self) -> float:
        if self._sd is None:
            raise ValueError("sample standard deviation undefined for n = 1")
        return self._sd


def descriptive(values: Sequence[float]) -> Descriptive:
    """Mean and sample (n-1) standard deviation."""
    if len(values) == 0:
        raise ValueError("descriptive needs at least one value")
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if arr.size == 1:
        return Descriptive(mean, 1, None)
    sd = float(arr.std(ddof=1))
    return Descriptive(mean, int(arr.size), sd)


@dataclass(frozen=True)
class EffectResult:
    ss: float
    df: Tuple[int, int]
    F: float
    p: float
    eta_p_sq: float


@dataclass(frozen=True)
class AnovaResult:
    display: EffectResult
    style: EffectResult
    interaction: EffectResult
    ss_error: float
    ss_total: float
    grand_mean: float
    cells: Dict[Tuple[str, str], Descriptive]


def _f_sf(F: float, dfn: int, dfd: int) -> float:
    """Upper tail of the F distribution via the regularized incomplete
    beta: P(X > F) = I_{dfd/(dfd + dfn F)}(dfd/2, dfn/2)."""
    if math.isinf(F):
        return 0.0
    if F <= 0.0:
        return 1.0
    x = dfd / (dfd + dfn * F)
    return float(special.betainc(dfd / 2.0, dfn / 2.0, x))


def anova_2x2(rows: Sequence[SampleRow]) -> AnovaResult:
    """Two-way fixed-effects ANOVA (display x style) with interaction.

    Sums of squares use the weighted cell-means decomposition, exact for
    the balanced designs the study produces.  Partial eta squared is
    SS_effect / (SS_effect + SS_error).  A zero effect SS yields F = 0 and
    p = 1 even when the error SS is also zero (the all-identical case).
    """
    if not rows:
        raise ValueError("anova needs data")
    displays = sorted({r.display for r in rows})
    styles = sorted({r.style for r in rows})
    if len(displays) != 2 or len(styles) != 2:
        raise ValueError(
            f"need exactly 2 levels per factor, got {displays} x {styles}"
        )
    cells: Dict[Tuple[str, str], List[float]] = {
        (d, s): [] for d in displays for s in styles
    }
    for r in rows:
        if not math.isfinite(r.value):
            raise ValueError("values must be finite")
        cells[(r.display, r.style)].append(r.value)
    for key, vals in cells.items():
        if not vals:
            raise ValueError(f"empty cell {key}")

    values = np.asarray([r.value for r in rows], dtype=np.float64)
    n_total = values.size
    grand = float(values.mean())
    ss_total = float(((values - grand) ** 2).sum())

    def level_ss(level_of) -> float:
        ss = 0.0
        for level in set(level_of(r) for r in rows):
            group = np.asarray([r.value for r in rows if level_of(r) == level])
            ss += group.size * (float(group.mean()) - grand) ** 2
        return ss

    ss_display = level_ss(lambda r: r.display)
    ss_style = level_ss(lambda r: r.style)

    ss_cells = 0.0
    cell_stats: Dict[Tuple[str, str], Descriptive] = {}
    for key, vals in cells.items():
        arr = np.asarray(vals, dtype=np.float64)
        cell_stats[key] = descriptive(vals)
        ss_cells += arr.size * (float(arr.mean()) - grand) ** 2
    ss_interaction = ss_cells - ss_display - ss_style
    ss_error = ss_total - ss_cells
    # guard tiny negative round-off
    ss_interaction = max(ss_interaction, 0.0)
    ss_error = max(ss_error, 0.0)

    df_error = n_total - 4
    if df_error <= 0:
        raise ValueError("anova needs more observations than cells")

    def effect(ss: float) -> EffectResult:
        if ss <= 0.0:
            return EffectResult(ss, (1, df_error), 0.0, 1.0, 0.0)
        if ss_error == 0.0:
            return EffectResult(ss, (1, df_error), math.inf, 0.0, 1.0)
        F = (ss / 1.0) / (ss_error / df_error)
        return EffectResult(
            ss, (1, df_error), F, _f_sf(F, 1, df_error), ss / (ss + ss_error)
        )

    return AnovaResult(
        display=effect(ss_display),
        style=effect(ss_style),
        interaction=effect(ss_interaction),
        ss_error=ss_error,
        ss_total=ss_total,
        grand_mean=grand,
        cells=cell_stats,
    )


@dataclass(frozen=True)
class WilcoxonResult:
    Z: float
    p: float
    n_effective: int
    method: str  # "exact" | "normal-approx"


#: Largest n for which the exact two-sided p is enumerated (2^n patterns).
WILCOXON_EXACT_N = 12


def wilcoxon_signed_rank(pairs: Sequence[Tuple[float, float]]) -> WilcoxonResult:
    """Paired signed-rank test on (pre, post) samples.

    Differences are post - pre; zeros are dropped, tied absolute
    differences share averaged ranks.  For n_effective <= 12 the two-sided
    p is exact by enumerating all 2^n sign patterns of |W+ - mean| at least
    as extreme as observed; beyond that a normal approximation with tie
    correction and 0.5 continuity correction is used.  Z is always reported
    from the approximation.
    """
    diffs = np.asarray([post - pre for pre, post in pairs], dtype=np.float64)
    diffs = diffs[diffs != 0.0]
    n = int(diffs.size)
    if n == 0:
        raise ValueError("all differences are zero")
    ranks = stats.rankdata(np.abs(diffs))
    w_plus = float(ranks[diffs > 0].sum())
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, counts = np.unique(ranks, return_counts=True)
    var -= float((counts.astype(np.float64) ** 3 - counts).sum()) / 48.0
    sd = math.sqrt(var)

    dev = w_plus - mean
    if dev > 0:
        z = (dev - 0.5) / sd
    elif dev < 0:
        z = (dev + 0.5) / sd
    else:
        z = 0.0

    if n <= WILCOXON_EXACT_N:
        bits = (np.arange(1 << n)[:, None] >> np.arange(n)) & 1
        w_all = bits @ ranks
        p = float((np.abs(w_all - mean) >= abs(dev) - 1e-12).sum()) / (1 << n)
        return WilcoxonResult(z, min(p, 1.0), n, "exact")
    p = float(special.erfc(abs(z) / math.sqrt(2.0)))
    return WilcoxonResult(z, min(p, 1.0), n, "normal-approx")


def cohens_d(a: Sequence[float], b: Sequence[float]) -> float:
    """Standardized mean difference with the pooled (n-1) deviation."""
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    if xa.size < 2 or xb.size < 2:
        raise ValueError("each group needs at least 2 values")
    va = float(xa.var(ddof=1))
    vb = float(xb.var(ddof=1))
    pooled = math.sqrt(
        ((xa.size - 1) * va + (xb.size - 1) * vb) / (xa.size + xb.size - 2)
    )
    if pooled == 0.0:
        raise ValueError("pooled standard deviation is zero")
    return (float(xa.mean()) - float(xb.mean())) / pooled


@dataclass(frozen=True)
class SsqWeightConfig:
    """Which 0-based symptom items feed each subscale, and the multipliers.

    Items may belong to several subscales.  The shipped default transcribes
    the standard 16-item instrument."""

    item_count: int
    nausea_items: Tuple[int, ...]
    oculomotor_items: Tuple[int, ...]
    disorientation_items: Tuple[int, ...]
    nausea_weight: float
    oculomotor_weight: float
    disorientation_weight: float
    total_weight: float


# Standard 16-item questionnaire, items in instrument order:
# 0 general discomfort, 1 fatigue, 2 headache, 3 eye strain, 4 difficulty
# focusing, 5 increased salivation, 6 sweating, 7 nausea, 8 difficulty
# concentrating, 9 fullness of head, 10 blurred vision, 11 dizziness (eyes
# open), 12 dizziness (eyes closed), 13 vertigo, 14 stomach awareness,
# 15 burping.
DEFAULT_SSQ_WEIGHTS = SsqWeightConfig(
    item_count=16,
    nausea_items=(0, 5, 6, 7, 8, 14, 15),
    oculomotor_items=(0, 1, 2, 3, 4, 8, 10),
    disorientation_items=(4, 7, 9, 10, 11, 12, 13),
    nausea_weight=9.54,
    oculomotor_weight=7.58,
    disorientation_weight=13.92,
    total_weight=3.74,
)


@dataclass(frozen=True)
class SsqScores:
    nausea: float
    oculomotor: float
    disorientation: float
    total: float


def ssq_scores(symptoms: Sequence[int], weights: SsqWeightConfig = DEFAULT_SSQ_WEIGHTS) -> SsqScores:
    """Subscale scores: each is its raw member sum times its multiplier;
    the total is the sum of the three raw sums times the total multiplier."""
    if len(symptoms) != weights.item_count:
        raise ValueError(
            f"expected {weights.item_count} symptom ratings, got {len(symptoms)}"
        )
    raw_n = float(sum(symptoms[i] for i in weights.nausea_items))
    raw_o = float(sum(symptoms[i] for i in weights.oculomotor_items))
    raw_d = float(sum(symptoms[i] for i in weights.disorientation_items))
    return SsqScores(
        nausea=raw_n * weights.nausea_weight,
        oculomotor=raw_o * weights.oculomotor_weight,
        disorientation=raw_d * weights.disorientation_weight,
        total=(raw_n + raw_o + raw_d) * weights.total_weight,
    )
