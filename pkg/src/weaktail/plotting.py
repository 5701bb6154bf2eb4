"""Log-log figures of tail curves: PNG via matplotlib and a gnuplot script."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .asymptotics import SlopeFit, TailCurve


def predicted_line(curve: TailCurve, slope: float, fit: SlopeFit | None = None, points: int = 2) -> np.ndarray:
    """(z, p) rows of a straight line of the given log-log slope.

    The line passes through the centroid of the fitted rows (all positive
    rows when no fit is given), so that its slope is comparable by eye.
    """
    rows = fit.rows_used if fit is not None else np.flatnonzero(curve.hits > 0)
    lz, lp = np.log(curve.thresholds[rows]), np.log(curve.p_hat[rows])
    cz, cp = lz.mean(), lp.mean()
    z = np.exp(np.linspace(math.log(curve.thresholds[0]), math.log(curve.thresholds[-1]), points))
    return np.column_stack([z, np.exp(cp + slope * (np.log(z) - cz))])


def write_line_csv(path, line: np.ndarray, extra: dict | None = None) -> None:
    cols = ["threshold", "p_line"] + list(extra or {})
    data = [line[:, 0], line[:, 1]] + [np.asarray(v, dtype=float) for v in (extra or {}).values()]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for row in zip(*data):
            fh.write(",".join("%.17g" % v for v in row) + "\n")


def write_gnuplot_script(path, curve_csv: str, line_csv: str, slope: float, png: str | None = None,
                         extra_column: str | None = None) -> None:
    lines = [
        "set datafile separator ','",
        "set logscale xy",
        "set format x '10^{%L}'",
        "set format y '10^{%L}'",
        "set xlabel 'z'",
        "set ylabel 'P[sum <= z]'",
        "set key top left",
    ]
    if png:
        lines += ["set terminal pngcairo size 800,600", f"set output '{png}'"]
    plot = [
        f"'{curve_csv}' skip 1 using 1:($4 > 0 ? $2 : 1/0) with points pt 7 ps 0.8 title 'Monte Carlo'",
        f"'{line_csv}' skip 1 using 1:2 with lines lw 2 title 'slope {slope:.4g}'",
    ]
    if extra_column:
        plot.append(f"'{line_csv}' skip 1 using 1:3 with lines dt 2 title '{extra_column}'")
    lines.append("plot " + ", \\\n     ".join(plot))
    Path(path).write_text("\n".join(lines) + "\n")


def plot_tail_curve(path, curve: TailCurve, slope: float, fit: SlopeFit | None = None,
                    extra: tuple[np.ndarray, np.ndarray, str] | None = None,
                    xlabel: str = "z", ylabel: str = r"$P[P_1+\dots+P_n \leq z]$") -> None:
    """Render the empirical tail curve and a line of the predicted slope to an image file."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ok = curve.hits > 0
    line = predicted_line(curve, slope, fit, points=50)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.loglog(curve.thresholds[ok], curve.p_hat[ok], "o", ms=4, label="Monte Carlo")
    ax.loglog(line[:, 0], line[:, 1], "-", lw=1.5, label=f"slope {slope:.4g}")
    if extra is not None:
        ax.loglog(extra[0], extra[1], "--", lw=1.2, label=extra[2])
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
