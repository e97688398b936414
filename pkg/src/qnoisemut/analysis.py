"""Detection scoring and the non-parametric statistics used to characterise noise."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import special

ALPHA = 0.05


class Strength(enum.Enum):
    NOT_SIGNIFICANT = "not_significant"
    NEGLIGIBLE = "negligible"
    WEAK = "weak"
    MODERATE = "moderate"
    STRONG = "strong"


# lower bounds of weak / moderate / strong per effect-size family
CLIFF_CUTS = (0.15, 0.33, 0.47)
ETA2_CUTS = (0.01, 0.06, 0.14)
PEARSON_CUTS = (0.10, 0.30, 0.50)


def strength_label(effect: float, cuts: Sequence[float], p_value: float, alpha: float = ALPHA) -> Strength:
    if not p_value < alpha:
        return Strength.NOT_SIGNIFICANT
    e = abs(effect)
    if e >= cuts[2]:
        return Strength.STRONG
    if e >= cuts[1]:
        return Strength.MODERATE
    if e >= cuts[0]:
        return Strength.WEAK
    return Strength.NEGLIGIBLE


@dataclass
class StatResult:
    test_name: str
    statistic: float
    p_value: float
    effect_size: float
    strength: Strength | None
    details: dict = field(default_factory=dict)

    def relabel(self, p_adjusted: float) -> "StatResult":
        cuts = _CUTS_BY_TEST.get(self.test_name)
        details = dict(self.details, p_holm=p_adjusted)
        label = strength_label(self.effect_size, cuts, p_adjusted) if cuts else self.strength
        return StatResult(self.test_name, self.statistic, self.p_value, self.effect_size, label, details)


# ---------------------------------------------------------------------------
# distribution helpers
# ---------------------------------------------------------------------------

# Acklam's rational approximation of the inverse normal CDF
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def norm_ppf(p: float) -> float:
    """Inverse standard normal CDF.

    Acklam's approximation (relative error ~1.15e-9) followed by one Halley
    step against ``erfc``, which brings it to double precision.
    """
    if not 0.0 < p < 1.0:
        if p == 0.0:
            return -math.inf
        if p == 1.0:
            return math.inf
        raise ValueError("p must lie in [0, 1]")
    if p < _P_LOW:
        q = math.sqrt(-2 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1
        )
    elif p <= 1 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1
        )
    else:
        q = math.sqrt(-2 * math.log(1 - p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1
        )
    e = 0.5 * math.erfc(-x / math.sqrt(2)) - p
    u = e * math.sqrt(2 * math.pi) * math.exp(x * x / 2)
    return x - u / (1 + x * u / 2)


def norm_two_sided_p(z: float) -> float:
    return float(math.erfc(abs(z) / math.sqrt(2)))


def chi2_sf(x: float, df: int) -> float:
    return float(special.chdtrc(df, max(x, 0.0)))


def t_two_sided_p(t: float, df: int) -> float:
    return float(2 * special.stdtr(df, -abs(t)))


def midranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1
        i = j + 1
    return ranks


def _tie_sum(values: Sequence[float]) -> float:
    _, counts = np.unique(np.asarray(values, dtype=float), return_counts=True)
    return float(np.sum(counts.astype(float) ** 3 - counts))


# ---------------------------------------------------------------------------
# detection scores
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Scores:
    confusion: ConfusionMatrix
    accuracy: float
    precision: float
    recall: float
    f1: float
    degenerate: bool

    def to_json(self) -> dict:
        c = self.confusion
        return {
            "confusion": {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn},
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "degenerate": self.degenerate,
        }


def scores_from_confusion(cm: ConfusionMatrix) -> Scores:
    if cm.total == 0:
        raise ValueError("no detection records")
    degenerate = False

    def ratio(num, den):
        nonlocal degenerate
        if den == 0:
            degenerate = True
            return 0.0
        return num / den

    precision = ratio(cm.tp, cm.tp + cm.fp)
    recall = ratio(cm.tp, cm.tp + cm.fn)
    f1 = ratio(2 * precision * recall, precision + recall)
    accuracy = (cm.tp + cm.tn) / cm.total
    return Scores(cm, accuracy, precision, recall, f1, degenerate)


def confusion_and_scores(records: Iterable) -> Scores:
    """Score detection records carrying ``true_label`` and ``detected``.

    Non-equivalent mutants are the positive class. ``records`` may hold
    objects or mappings; labels are compared by their string value.
    """
    tp = fp = tn = fn = 0
    for rec in records:
        label = _field(rec, "true_label")
        detected = bool(_field(rec, "detected"))
        label = getattr(label, "value", label)
        if label == "non_equivalent":
            tp, fn = (tp + 1, fn) if detected else (tp, fn + 1)
        elif label == "equivalent":
            fp, tn = (fp + 1, tn) if detected else (fp, tn + 1)
        else:
            raise ValueError(f"record without ground-truth label: {label!r}")
    return scores_from_confusion(ConfusionMatrix(tp, fp, tn, fn))


def _field(rec, name):
    return rec[name] if isinstance(rec, Mapping) else getattr(rec, name)


@dataclass(frozen=True)
class DetectionRecord:
    mutant_id: str
    true_label: str
    detected: bool
    metric: str = ""
    strategy: str = ""
    backend: str = ""
    input_id: str = ""


# ---------------------------------------------------------------------------
# tests
# ---------------------------------------------------------------------------


def fligner_killeen(*groups: Sequence[float]) -> tuple[float, float]:
    """Median-centred Fligner-Killeen scale test; returns (statistic, p)."""
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    arrays = [np.asarray(g, dtype=float) for g in groups]
    if any(len(a) < 2 for a in arrays):
        raise ValueError("each group needs at least two observations")
    dev = np.concatenate([np.abs(a - np.median(a)) for a in arrays])
    n = len(dev)
    ranks = midranks(dev)
    scores = np.array([norm_ppf(0.5 + r / (2.0 * (n + 1))) for r in ranks])
    var = float(np.var(scores, ddof=1))
    if var == 0.0:
        return 0.0, 1.0
    grand = scores.mean()
    stat, start = 0.0, 0
    for a in arrays:
        part = scores[start : start + len(a)]
        stat += len(a) * (part.mean() - grand) ** 2
        start += len(a)
    stat /= var
    return float(stat), chi2_sf(stat, len(arrays) - 1)


def variance_ratio(noisy: Sequence[float], noiseless: Sequence[float]) -> StatResult:
    """VR = var(noisy) / var(noiseless) with the Fligner-Killeen p-value.

    A zero noiseless variance yields VR = +inf (or 1.0 when both are zero).
    """
    a = np.asarray(noisy, dtype=float)
    b = np.asarray(noiseless, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("both groups need at least two observations")
    va, vb = float(np.var(a, ddof=1)), float(np.var(b, ddof=1))
    details = {"var_noisy": va, "var_noiseless": vb}
    if vb == 0.0:
        vr = 1.0 if va == 0.0 else math.inf
        details["note"] = "zero noiseless variance"
    else:
        vr = va / vb
    stat, p = fligner_killeen(a, b)
    details["direction"] = "scattered" if vr > 1 else "concentrated"
    # no strength scale exists for VR; only significance is labelled
    label = Strength.NOT_SIGNIFICANT if not p < ALPHA else None
    return StatResult("fligner_killeen", stat, p, vr, label, details)


def cliffs_delta(a: Sequence[float], b: Sequence[float]) -> float:
    """(#(x > y) - #(x < y)) / (|a| |b|)."""
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if len(x) == 0 or len(y) == 0:
        raise ValueError("empty sample")
    if len(x) * len(y) <= 1_000_000:
        diff = x[:, None] - y[None, :]
        return float((np.sum(diff > 0) - np.sum(diff < 0)) / (len(x) * len(y)))
    ys = np.sort(y)
    greater = np.searchsorted(ys, x, side="left").sum()
    less = (len(ys) - np.searchsorted(ys, x, side="right")).sum()
    return float((greater - less) / (len(x) * len(y)))


def mann_whitney_cliffs(a: Sequence[float], b: Sequence[float]) -> StatResult:
    """Two-sided Mann-Whitney U (normal approximation, tie-corrected) with Cliff's delta.

    ``statistic`` is U of ``a``; the strength label uses |delta|.
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise ValueError("empty sample")
    pooled = np.concatenate([x, y])
    n = n1 + n2
    ranks = midranks(pooled)
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2)
    mu = n1 * n2 / 2
    ties = _tie_sum(pooled)
    var = n1 * n2 / 12 * ((n + 1) - (ties / (n * (n - 1)) if n > 1 else 0.0))
    z = 0.0 if var <= 0 else (u - mu) / math.sqrt(var)
    p = norm_two_sided_p(z) if var > 0 else 1.0
    delta = cliffs_delta(x, y)
    details = {"z": z, "r": z / math.sqrt(n), "n1": n1, "n2": n2}
    return StatResult("mann_whitney", u, p, delta, strength_label(delta, CLIFF_CUTS, p), details)


def kruskal_wallis_eta(groups: Sequence[Sequence[float]]) -> StatResult:
    """Tie-corrected Kruskal-Wallis H with eta^2[H] = (H - k + 1) / (n - k)."""
    arrays = [np.asarray(g, dtype=float) for g in groups]
    k = len(arrays)
    if k < 2:
        raise ValueError("need at least two groups")
    if any(len(a) == 0 for a in arrays):
        raise ValueError("empty group")
    pooled = np.concatenate(arrays)
    n = len(pooled)
    ranks = midranks(pooled)
    h, start = 0.0, 0
    for a in arrays:
        h += ranks[start : start + len(a)].sum() ** 2 / len(a)
        start += len(a)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    corr = 1.0 - _tie_sum(pooled) / (n**3 - n)
    if corr <= 0:
        h, p = 0.0, 1.0
    else:
        h /= corr
        p = chi2_sf(h, k - 1)
    eta2 = (h - k + 1) / (n - k) if n > k else 0.0
    eta2 = min(max(eta2, 0.0), 1.0)
    return StatResult("kruskal_wallis", h, p, eta2, strength_label(eta2, ETA2_CUTS, p), {"k": k, "n": n})


def pearson_r(x: Sequence[float], y: Sequence[float]) -> StatResult:
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if len(a) != len(b):
        raise ValueError("x and y must have equal length")
    n = len(a)
    if n < 3:
        raise ValueError("need at least three pairs")
    da, db = a - a.mean(), b - b.mean()
    sa, sb = math.sqrt(float(da @ da)), math.sqrt(float(db @ db))
    if sa == 0 or sb == 0:
        raise ValueError("zero-variance input")
    r = float(da @ db) / (sa * sb)
    r = min(max(r, -1.0), 1.0)
    if abs(r) == 1.0:
        t, p = math.copysign(math.inf, r), 0.0
    else:
        t = r * math.sqrt((n - 2) / (1 - r * r))
        p = t_two_sided_p(t, n - 2)
    return StatResult("pearson", t, p, r, strength_label(r, PEARSON_CUTS, p), {"n": n})


def holm_correct(pvalues: Sequence[float]) -> list[float]:
    """Holm step-down adjustment, returned in input order."""
    ps = [float(p) for p in pvalues]
    if any(not 0.0 <= p <= 1.0 for p in ps):
        raise ValueError("p-values must lie in [0, 1]")
    m = len(ps)
    order = sorted(range(m), key=lambda i: ps[i])
    out = [0.0] * m
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, (m - rank) * ps[i])
        out[i] = min(1.0, running)
    return out


_CUTS_BY_TEST = {
    "mann_whitney": CLIFF_CUTS,
    "kruskal_wallis": ETA2_CUTS,
    "pearson": PEARSON_CUTS,
}


# ---------------------------------------------------------------------------
# characteristic correlation
# ---------------------------------------------------------------------------


class VariableKind(enum.Enum):
    QUANTITATIVE = "quantitative"
    BINARY = "binary"
    MULTI = "multi"


VARIABLES: dict[str, VariableKind] = {
    "n_qubits": VariableKind.QUANTITATIVE,
    "n_gates": VariableKind.QUANTITATIVE,
    "depth": VariableKind.QUANTITATIVE,
    "relative_position": VariableKind.QUANTITATIVE,
    "gate_type": VariableKind.BINARY,
    "input_type": VariableKind.BINARY,
    "output_type": VariableKind.BINARY,
    "algorithm": VariableKind.MULTI,
    "operator": VariableKind.MULTI,
}


def correlate_characteristics(rows: Sequence[Mapping], variable: str, value_key: str = "value") -> StatResult:
    """Association between a distance column and one characteristic.

    Quantitative variables use Pearson, two-level ones Mann-Whitney with
    Cliff's delta, and multi-level ones Kruskal-Wallis. A constant distance
    column is reported as a zero effect rather than an error.
    """
    if variable not in VARIABLES:
        raise ValueError(f"unknown variable {variable!r}")
    kind = VARIABLES[variable]
    values = np.array([float(r[value_key]) for r in rows])
    if len(values) == 0:
        raise ValueError("no rows")
    if kind is VariableKind.QUANTITATIVE:
        xs = np.array([float(r[variable]) for r in rows])
        if np.ptp(values) == 0 or np.ptp(xs) == 0:
            return StatResult("pearson", 0.0, 1.0, 0.0, Strength.NOT_SIGNIFICANT, {"n": len(values), "note": "constant input"})
        return pearson_r(xs, values)
    groups: dict[str, list[float]] = {}
    for r, v in zip(rows, values):
        groups.setdefault(str(r[variable]), []).append(float(v))
    if len(groups) < 2:
        raise ValueError(f"variable {variable!r} has fewer than two groups")
    keys = sorted(groups)
    if kind is VariableKind.BINARY:
        if len(keys) != 2:
            raise ValueError(f"binary variable {variable!r} has {len(keys)} groups")
        res = mann_whitney_cliffs(groups[keys[0]], groups[keys[1]])
        res.details["groups"] = keys
        return res
    res = kruskal_wallis_eta([groups[k] for k in keys])
    res.details["groups"] = keys
    return res


def correlate_batch(rows: Sequence[Mapping], variables: Sequence[str], value_key: str = "value") -> dict[str, StatResult]:
    """Run each variable and Holm-correct p-values across the batch."""
    results: dict[str, StatResult] = {}
    for v in variables:
        try:
            results[v] = correlate_characteristics(rows, v, value_key)
        except ValueError as exc:
            results[v] = StatResult("skipped", math.nan, 1.0, 0.0, Strength.NOT_SIGNIFICANT, {"note": str(exc)})
    tested = [v for v in variables if results[v].test_name != "skipped"]
    adjusted = holm_correct([results[v].p_value for v in tested]) if tested else []
    for v, p in zip(tested, adjusted):
        results[v] = results[v].relabel(p)
    return results
