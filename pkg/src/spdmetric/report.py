"""Plain-text tables and structured (JSON) reports for the evaluation commands."""
from __future__ import annotations

import json

import numpy as np

__all__ = ["GROUP_TITLES", "accuracy_table", "kinds_table", "dumps_structured"]

GROUP_TITLES = {
    "euclidean-cov": "Covariance matrices",
    "cholesky": "Cholesky decompositions",
    "log-euclidean": "Log-Euclidean",
}
SUBCOLUMNS = ("Frobenius", "ITML", "ITML gain")


def _pct(x) -> str:
    return "-" if x is None else f"{100.0 * x:.2f}"


def accuracy_table(title: str, rows: dict[str, tuple[float, float | None]]) -> str:
    """Representation groups of (Frobenius, ITML, ITML gain) columns, in percent.

    ``rows`` maps a representation tag to ``(unlearned, learned)`` mean
    accuracies; ``learned`` may be None when only the baseline was run.
    """
    cells = []
    for tag, (base, learned) in rows.items():
        gain = None if learned is None else learned - base
        cells.append((GROUP_TITLES.get(tag, tag), [_pct(base), _pct(learned), _pct(gain)]))
    width = 11
    group_w = width * len(SUBCOLUMNS) + 2 * (len(SUBCOLUMNS) - 1)
    top = " | ".join(name.center(group_w) for name, _ in cells)
    mid = " | ".join("  ".join(c.rjust(width) for c in SUBCOLUMNS) for _ in cells)
    val = " | ".join("  ".join(v.rjust(width) for v in vals) for _, vals in cells)
    rule = "-" * len(mid)
    return "\n".join([title, rule, top, mid, rule, val, rule]) + "\n"


def kinds_table(title: str, accs: dict[str, float]) -> str:
    """One row of accuracies (percent) per fixed distance kind."""
    width = max(12, *(len(k) for k in accs))
    head = "  ".join(k.rjust(width) for k in accs)
    vals = "  ".join(_pct(v).rjust(width) for v in accs.values())
    rule = "-" * len(head)
    return "\n".join([title, rule, head, vals, rule]) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps_structured(doc: dict) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, no timestamps."""
    return json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n"
