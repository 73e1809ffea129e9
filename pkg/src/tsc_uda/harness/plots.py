"""Static SVG of the accuracy and threshold curves."""

from __future__ import annotations

import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

ACCURACY_CURVES = {
    "pl_teacher_acc": "teacher pseudo-labels",
    "pl_student_acc": "student pseudo-labels",
    "pl_winner_acc": "winning pseudo-labels",
    "teacher_acc": "teacher accuracy",
    "student_acc": "student accuracy",
}


def emit_plots(result, path) -> dict[str, tuple[np.ndarray, np.ndarray]] | None:
    """Render the curves to ``path`` (SVG) and return the plotted (x, y) series by column.

    ``result`` is a RunResult or its ``history`` list. An empty history only warns.
    """
    history = getattr(result, "history", result)
    if not history:
        warnings.warn("empty metric history; no plot written", stacklevel=2)
        return None
    steps = np.array([row["step"] for row in history], dtype=float)
    fig, (ax_acc, ax_tp) = plt.subplots(2, 1, figsize=(7, 6), sharex=True,
                                        gridspec_kw={"height_ratios": [3, 1]})
    plotted = {}
    for col, label in ACCURACY_CURVES.items():
        y = np.array([row[col] for row in history], dtype=float)
        style = "--" if col in ("teacher_acc", "student_acc") else "-"
        (line,) = ax_acc.plot(steps, y, style, marker="." if len(steps) == 1 else None, label=label, gid=col)
        plotted[col] = (np.asarray(line.get_xdata(), float), np.asarray(line.get_ydata(), float))
    tp = np.array([row["threshold"] for row in history], dtype=float)
    (line,) = ax_tp.plot(steps, tp, color="k", marker="." if len(steps) == 1 else None, gid="threshold")
    plotted["threshold"] = (np.asarray(line.get_xdata(), float), np.asarray(line.get_ydata(), float))

    ax_acc.set_ylabel("target accuracy")
    ax_acc.legend(loc="lower right", fontsize=8)
    ax_acc.grid(alpha=0.3)
    ax_tp.set_ylabel("threshold")
    ax_tp.set_xlabel("step")
    ax_tp.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed id salt and no date, so the same history gives the same bytes
    with matplotlib.rc_context({"svg.hashsalt": "tsc-uda"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return plotted
