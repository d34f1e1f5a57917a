"""Confusion-matrix construction and the pattern-recognition statistics.

Implements recognition rates, one-way (between groups) ANOVA, single-factor
repeated-measures ANOVA, and paired t-tests with one-step Bonferroni
correction.  p-values come from a self-contained regularized incomplete
beta evaluated by Lentz's continued fraction (no scipy dependency).
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .haptics import PatternId

# Canonical row/column order of the 10x10 perception matrix.
PATTERN_ORDER = ("1H", "1L", "2H", "2L", "3H", "3L", "4H", "4L", "5H", "5L")

ROW_SUM_TOL = 0.02  # tolerates matrices rounded to 2 decimals

_BETACF_MAX_ITER = 500
_BETACF_EPS = 1e-12


class MissingPattern(ValueError):
    """Some actual pattern has no trials for the requested side."""


class WristSide(enum.Enum):
    VOLAR = "volar"
    DORSAL = "dorsal"


@dataclass(frozen=True)
class TrialRecord:
    participant_id: int
    wrist_side: WristSide
    actual: PatternId
    perceived: PatternId


@dataclass(frozen=True)
class ConfusionMatrix:
    """Row-stochastic actual x perceived matrix in PATTERN_ORDER."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (10, 10):
            raise ValueError("confusion matrix must be 10x10")
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError("entries must lie in [0, 1]")
        sums = v.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            raise ValueError(f"rows must sum to 1 within {ROW_SUM_TOL}; got {sums}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_csv(cls, path) -> "ConfusionMatrix":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header = [c.strip() for c in rows[0][1:]]
        if tuple(header) != PATTERN_ORDER:
            raise ValueError(f"header must list patterns in order {PATTERN_ORDER}")
        values = []
        for i, row in enumerate(rows[1:], start=2):
            if row[0].strip() != PATTERN_ORDER[len(values)]:
                raise ValueError(f"row {i}: unexpected pattern label {row[0]!r}")
            values.append([float(c) for c in row[1:]])
        return cls(np.array(values))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pattern", *PATTERN_ORDER])
            for label, row in zip(PATTERN_ORDER, self.values):
                w.writerow([label, *[f"{v:.2f}" for v in row]])


@dataclass(frozen=True)
class AnovaResult:
    f_statistic: float
    df_between: int
    df_within: int
    p_value: float
    degenerate: bool = False

    def __post_init__(self):
        if self.f_statistic < 0:
            raise ValueError("F must be >= 0")
        if self.df_between < 1 or self.df_within < 1:
            raise ValueError("degrees of freedom must be >= 1")


@dataclass(frozen=True)
class PairwiseResult:
    pair: tuple
    t_statistic: float
    raw_p: float
    corrected_p: float
    significant: bool
    degenerate: bool = False


# --- regularized incomplete beta and derived CDFs -------------------------


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x < 0 or x > 1:
        raise ValueError("x must be in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_sf(f: float, df1: int, df2: int) -> float:
    """P(F >= f) for the F distribution with (df1, df2) dof."""
    if f <= 0:
        return 1.0
    x = df2 / (df2 + df1 * f)
    return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x)


def f_cdf(f: float, df1: int, df2: int) -> float:
    return 1.0 - f_sf(f, df1, df2)


def t_cdf(t: float, df: int) -> float:
    """CDF of Student's t with df dof."""
    if t == 0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def t_two_sided_p(t: float, df: int) -> float:
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


# --- confusion matrices ----------------------------------------------------


def confusion_from_trials(trials, side: WristSide) -> ConfusionMatrix:
    """Row-normalized actual x perceived counts for one wrist side."""
    index = {p: i for i, p in enumerate(PATTERN_ORDER)}
    counts = np.zeros((10, 10))
    for trial in trials:
        if trial.wrist_side is not side:
            continue
        counts[index[str(trial.actual)], index[str(trial.perceived)]] += 1
    row_totals = counts.sum(axis=1)
    missing = [PATTERN_ORDER[i] for i in range(10) if row_totals[i] == 0]
    if missing:
        raise MissingPattern(f"no trials for actual patterns {missing}")
    return ConfusionMatrix(counts / row_totals[:, None])


def recognition_rates(m: ConfusionMatrix) -> tuple:
    """(per-pattern diagonal rates, their mean)."""
    diag = np.diag(m.values).copy()
    return diag, float(diag.mean())


def read_trials_csv(path) -> list:
    """Read `participant,side,actual,perceived` rows into TrialRecords."""
    trials = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [c.strip().lower() for c in header] != ["participant", "side", "actual", "perceived"]:
            raise ValueError("expected header participant,side,actual,perceived")
        for i, row in enumerate(reader, start=2):
            try:
                trials.append(TrialRecord(
                    participant_id=int(row[0]),
                    wrist_side=WristSide(row[1].strip().lower()),
                    actual=PatternId.parse(row[2]),
                    perceived=PatternId.parse(row[3]),
                ))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"row {i}: {exc}") from exc
    return trials


# --- ANOVA and paired t ----------------------------------------------------


def one_way_anova(groups) -> AnovaResult:
    """Between/within decomposition over independent groups."""
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2 or any(len(g) < 2 for g in groups):
        raise ValueError("need >= 2 groups with >= 2 observations each")
    k = len(groups)
    n_total = sum(len(g) for g in groups)
    grand = sum(g.sum() for g in groups) / n_total
    ss_between = sum(len(g) * (g.mean() - grand) ** 2 for g in groups)
    ss_within = sum(((g - g.mean()) ** 2).sum() for g in groups)
    df_between = k - 1
    df_within = n_total - k
    if ss_within <= 0:
        if ss_between > 0:
            # F is infinite: reported as p = 0 with the degenerate flag set
            return AnovaResult(math.inf, df_between, df_within, 0.0, degenerate=True)
        return AnovaResult(0.0, df_between, df_within, 1.0)
    f = (ss_between / df_between) / (ss_within / df_within)
    return AnovaResult(f, df_between, df_within, f_sf(f, df_between, df_within))


def rm_anova(table) -> AnovaResult:
    """Single-factor repeated-measures ANOVA on a participants x conditions table."""
    data = np.asarray(table, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] < 2:
        raise ValueError("need a complete table with >= 2 participants and conditions")
    n, k = data.shape
    grand = data.mean()
    condition_means = data.mean(axis=0)
    subject_means = data.mean(axis=1)
    ss_condition = n * ((condition_means - grand) ** 2).sum()
    ss_within = ((data - condition_means) ** 2).sum()
    ss_subject = k * ((subject_means - grand) ** 2).sum()
    ss_error = ss_within - ss_subject
    df_condition = k - 1
    df_error = (n - 1) * (k - 1)
    if ss_error <= 1e-300:
        if ss_condition > 0:
            return AnovaResult(math.inf, df_condition, df_error, 0.0, degenerate=True)
        return AnovaResult(0.0, df_condition, df_error, 1.0)
    f = (ss_condition / df_condition) / (ss_error / df_error)
    return AnovaResult(f, df_condition, df_error, f_sf(f, df_condition, df_error))


def paired_t_bonferroni(samples: dict, pairs) -> list:
    """Two-sided paired t-tests with one-step Bonferroni over all requested pairs."""
    pairs = list(pairs)
    m = len(pairs)
    results = []
    for first, second in pairs:
        a = np.asarray(samples[first], dtype=float)
        b = np.asarray(samples[second], dtype=float)
        if len(a) != len(b) or len(a) < 2:
            raise ValueError(f"pair ({first}, {second}): need equal-length lists >= 2")
        diff = a - b
        n = len(diff)
        mean = diff.mean()
        sd = diff.std(ddof=1)
        degenerate = False
        if sd == 0:
            if mean == 0:
                t_stat, raw_p = 0.0, 1.0
            else:
                t_stat = math.inf if mean > 0 else -math.inf
                raw_p = 0.0
                degenerate = True
        else:
            t_stat = mean / (sd / math.sqrt(n))
            raw_p = t_two_sided_p(t_stat, n - 1)
        corrected = min(1.0, raw_p * m)
        results.append(PairwiseResult(
            pair=(first, second),
            t_statistic=t_stat,
            raw_p=raw_p,
            corrected_p=corrected,
            significant=corrected < 0.05,
            degenerate=degenerate,
        ))
    return results
