# src/qpplab/services/statlab.py
"""
Núcleo estadístico: correlaciones con significancia, ANOVA de un factor,
errores de regresión y t-test pareado con corrección de Bonferroni.

Las colas de las distribuciones t y F se obtienen con la beta incompleta
regularizada (scipy.special.betainc); la normal con erfc.
"""

import logging
import math
from typing import Mapping, Sequence, Tuple

import numpy as np
from scipy import special, stats

from qpplab.core.errors import DimensionMismatchError, SampleSizeError, UndefinedStatisticError
from qpplab.schemas.stats import (
    AnovaRow,
    AnovaTable,
    CorrelationResult,
    ErrorReport,
    Marker,
    PairedTTestResult,
    marker_for,
)

logger = logging.getLogger(__name__)

PEARSON = "pearson"
KENDALL = "kendall"
COEFFICIENTS = (PEARSON, KENDALL)


def _pair(x: Sequence[float], y: Sequence[float], minimum: int) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatchError(
            f"Las secuencias tienen longitudes distintas ({a.size} vs {b.size})",
            {"len_x": int(a.size), "len_y": int(b.size)},
        )
    if a.size < minimum:
        raise SampleSizeError(f"Se requieren al menos {minimum} observaciones, hay {a.size}", {"n": int(a.size)})
    return a, b


def _clamp(value: float, low: float, high: float) -> float:
    return min(high, max(low, value))


def t_two_tailed(t: float, df: int) -> float:
    """P(|T| >= |t|) para T ~ t(df)."""
    if math.isinf(t):
        return 0.0
    return _clamp(float(special.betainc(df / 2.0, 0.5, df / (df + t * t))), 0.0, 1.0)


def f_upper_tail(f_value: float, df_num: int, df_den: int) -> float:
    """P(F >= f) para F ~ F(df_num, df_den)."""
    if math.isinf(f_value):
        return 0.0
    x = df_den / (df_den + df_num * f_value)
    return _clamp(float(special.betainc(df_den / 2.0, df_num / 2.0, x)), 0.0, 1.0)


# ============================================================
# CORRELACIONES
# ============================================================

def pearson(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """
    r de Pearson muestral con p bilateral (scipy.stats.pearsonr, n-2 grados de libertad).

    Raises:
        UndefinedStatisticError: alguna de las dos secuencias es constante
        SampleSizeError: n < 3
    """
    a, b = _pair(x, y, 3)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise UndefinedStatisticError("Correlación de Pearson no definida: entrada constante", {"n": int(a.size)})

    result = stats.pearsonr(a, b)
    r = _clamp(float(result.statistic), -1.0, 1.0)
    p_value = 0.0 if abs(r) == 1.0 else _clamp(float(result.pvalue), 0.0, 1.0)
    n = int(a.size)
    return CorrelationResult(coefficient=r, p_value=p_value, n=n, marker=significance_marker(p_value), method=PEARSON)


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """
    tau-b = (C - D) / sqrt((P - T_x)(P - T_y)); los pares empatados no cuentan
    como concordantes ni discordantes. p por aproximación normal con la
    varianza de S corregida por empates (scipy.stats.kendalltau, O(n log n)).
    """
    a, b = _pair(x, y, 3)
    n = int(a.size)
    result = stats.kendalltau(a, b, variant="b", method="asymptotic")
    tau = float(result.statistic)
    if math.isnan(tau):
        raise UndefinedStatisticError("Tau de Kendall no definida: todo empatado", {"n": n})
    p_value = float(result.pvalue)
    if math.isnan(p_value):
        raise UndefinedStatisticError("Varianza nula en la aproximación normal de Kendall", {"n": n})
    p_value = _clamp(p_value, 0.0, 1.0)

    return CorrelationResult(coefficient=_clamp(tau, -1.0, 1.0), p_value=p_value, n=n,
                             marker=significance_marker(p_value), method=KENDALL)


def correlate(x: Sequence[float], y: Sequence[float], coefficient: str = PEARSON) -> CorrelationResult:
    if coefficient == PEARSON:
        return pearson(x, y)
    if coefficient == KENDALL:
        return kendall_tau_b(x, y)
    raise UndefinedStatisticError(f"Coeficiente desconocido: {coefficient}", {"coefficient": coefficient})


def significance_marker(p: float) -> Marker:
    """‡ si p < 0.01, † si 0.01 <= p < 0.05, nada en otro caso."""
    if not 0.0 <= p <= 1.0:
        raise UndefinedStatisticError(f"p-value fuera de [0, 1]: {p}", {"p": p})
    return marker_for(p)


# ============================================================
# ANOVA DE UN FACTOR
# ============================================================

def anova_one_way(groups: Mapping[str, Sequence[float]], factor: str = "Factor") -> AnovaTable:
    if len(groups) < 2:
        raise SampleSizeError("ANOVA requiere al menos 2 grupos", {"groups": len(groups)})
    arrays = {label: np.asarray(values, dtype=np.float64) for label, values in groups.items()}
    for label, values in arrays.items():
        if values.size == 0:
            raise SampleSizeError(f"El grupo '{label}' está vacío", {"group": label})

    g = len(arrays)
    total_n = sum(values.size for values in arrays.values())
    if total_n <= g:
        raise SampleSizeError(f"ANOVA requiere N > g (N={total_n}, g={g})", {"n": total_n, "groups": g})

    grand_mean = math.fsum(float(v) for values in arrays.values() for v in values) / total_n
    ss_between = math.fsum(values.size * (float(values.mean()) - grand_mean) ** 2 for values in arrays.values())
    ss_within = math.fsum(float(np.sum((values - values.mean()) ** 2)) for values in arrays.values())

    df_between = g - 1
    df_within = total_n - g
    ms_between = ss_between / df_between
    ms_within = ss_within / df_within
    if ms_within == 0:
        raise UndefinedStatisticError("ANOVA degenerada: varianza intra-grupo nula", {"groups": g})

    f_value = ms_between / ms_within
    p_value = f_upper_tail(f_value, df_between, df_within)
    logger.debug(f"ANOVA {factor}: F={f_value:.4f} p={p_value:.3g}")

    return AnovaTable(
        factor=AnovaRow(source=factor, df=df_between, sum_sq=ss_between, mean_sq=ms_between),
        residuals=AnovaRow(source="Residuals", df=df_within, sum_sq=ss_within, mean_sq=ms_within),
        f_value=f_value,
        p_value=p_value,
    )


# ============================================================
# ERRORES DE REGRESIÓN Y T-TEST PAREADO
# ============================================================

def regression_errors(predicted: Sequence[float], actual: Sequence[float]) -> ErrorReport:
    """
    MAE, RMSE, MedAE y R^2 = 1 - SS_res/SS_tot.

    Raises:
        UndefinedStatisticError: `actual` constante; el informe sin R^2 va en `partial`
    """
    p, a = _pair(predicted, actual, 2)
    errors = p - a
    abs_errors = np.abs(errors)
    mae = float(np.mean(abs_errors))
    rmse = math.sqrt(float(np.mean(errors ** 2)))
    medae = float(np.median(abs_errors))
    n = int(a.size)

    ss_tot = float(np.sum((a - np.mean(a)) ** 2))
    if ss_tot == 0:
        partial = ErrorReport(mae=mae, rmse=rmse, medae=medae, r_squared=None, n=n)
        raise UndefinedStatisticError("R^2 no definido: valores reales constantes", {"n": n}, partial=partial)

    ss_res = float(np.sum(errors ** 2))
    return ErrorReport(mae=mae, rmse=rmse, medae=medae, r_squared=1.0 - ss_res / ss_tot, n=n)


def paired_t(a: Sequence[float], b: Sequence[float], m_comparisons: int = 1) -> PairedTTestResult:
    """t-test pareado bilateral; el p ajustado es min(1, p * m)."""
    x, y = _pair(a, b, 2)
    if m_comparisons < 1:
        raise SampleSizeError("El número de comparaciones debe ser >= 1", {"m": m_comparisons})
    diffs = x - y
    n = int(diffs.size)
    sd = float(np.std(diffs, ddof=1))
    if sd == 0:
        raise UndefinedStatisticError("t-test no definido: diferencias constantes", {"n": n})

    t = float(np.mean(diffs)) / (sd / math.sqrt(n))
    df = n - 1
    p_value = t_two_tailed(t, df)
    p_adjusted = min(1.0, p_value * m_comparisons)
    return PairedTTestResult(
        t_statistic=t,
        df=df,
        p_value=p_value,
        p_adjusted=p_adjusted,
        m_comparisons=m_comparisons,
        marker=significance_marker(p_adjusted),
    )
