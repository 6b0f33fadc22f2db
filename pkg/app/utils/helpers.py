import math
import numpy as np


def admissible_b(alpha: float) -> float:
    """Smallest b >= 1/3 with ((1-b)/2)^(2-alpha) inside [1/9, 1/3]"""
    # the window's upper edge gives b = 1 - 2 * 3^(-1/(2-alpha)); below 1/3 the floor wins
    return max(1.0 / 3.0, 1.0 - 2.0 * 3.0 ** (-1.0 / (2.0 - alpha)))


def row_gap(n: int, alpha: float) -> float:
    """k_n = 4^(2n max(1/(2-alpha), 1)) with the exponent rounded up to an integer"""
    exponent = 2.0 * n * max(1.0 / (2.0 - alpha), 1.0)
    return 4.0 ** math.ceil(exponent - 1e-9)


def relative_difference(a: float, b: float) -> float:
    """|a - b| / max(|a|, |b|), zero when both vanish"""
    scale = max(abs(a), abs(b))
    if scale == 0.0:
        return 0.0
    return abs(a - b) / scale


def linear_fit(xs, ys) -> tuple[float, float, float]:
    """Least-squares line through (xs, ys): slope, intercept, max abs residual"""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size < 2:
        return 0.0, float(ys[0]) if ys.size else 0.0, 0.0
    coeffs, _, _, _, _ = np.polyfit(xs, ys, 1, full=True)
    residuals = ys - np.polyval(coeffs, xs)
    return float(coeffs[0]), float(coeffs[1]), float(np.max(np.abs(residuals)))


def geometric_tail(ratio: float, first: int) -> float:
    """Σ_{k >= first} ratio^k for 0 <= ratio < 1"""
    return ratio ** first / (1.0 - ratio)


CSV_COLUMNS = ("claim_id", "param", "value", "bound", "pass")


def csv_rows(claim_id: str, values: dict, bounds: dict, passed: bool) -> list[dict]:
    """Flatten one claim into fixed-column CSV rows"""
    rows = []
    for name in sorted(set(values) | set(bounds)):
        rows.append({
            "claim_id": claim_id,
            "param": name,
            "value": values.get(name, ""),
            "bound": bounds.get(name, ""),
            "pass": int(passed),
        })
    if not rows:
        rows.append({"claim_id": claim_id, "param": "", "value": "", "bound": "", "pass": int(passed)})
    return rows
