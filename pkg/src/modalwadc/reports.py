"""JSON/CSV report builders. Numbers are written with 12 significant digits."""
from __future__ import annotations

import csv
import json
import math

import numpy as np
from scipy.optimize import linear_sum_assignment

from .modal import ModalSolution, generator_participation, generator_ranking
from .wadc import ControlDesign

SIG_DIGITS = 12


def clean(obj):
    """Recursively convert numpy data to JSON-ready values rounded to 12 digits."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [clean(obj.real), clean(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        x = float(f"{x:.{SIG_DIGITS}g}")
        return 0.0 if x == 0 else x
    return obj


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(clean(obj), fh, indent=2, sort_keys=False)
        fh.write("\n")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def mode_report(sol: ModalSolution, names, top=3, ranking="speed") -> list:
    """Per-mode frequency, damping, settling time, band, criticality and top participants."""
    out = []
    for i, md in enumerate(sol.modes):
        p = generator_participation(sol, i, ranking)
        top_ids = generator_ranking(sol, i, ranking)[:top]
        out.append({
            "mode": i + 1,
            "lambda": md.lam,
            "f": md.f,
            "zeta": md.zeta,
            "t_S": md.t_S,
            "band": md.band,
            "critical": md.critical,
            "top_participants": [[names[g], p[g]] for g in top_ids],
        })
    return out


def match_modes(ref: ModalSolution, ref_idx, sol: ModalSolution) -> list:
    """Oscillatory mode of ``sol`` paired with each ``ref_idx`` mode (closest eigenvalues)."""
    cand = [i for i, md in enumerate(sol.modes) if md.oscillatory]
    ref_idx = list(ref_idx)
    if not ref_idx or not cand:
        return [None] * len(ref_idx)
    cost = np.abs(np.array([ref.modes[i].lam for i in ref_idx])[:, None]
                  - np.array([sol.modes[j].lam for j in cand])[None, :])
    rows, cols = linear_sum_assignment(cost)
    out = [None] * len(ref_idx)
    for r, c in zip(rows, cols):
        out[r] = cand[c]
    return out


def _pct(est, true):
    return 100.0 * abs(est - true) / abs(true) if true else math.nan


def mode_comparison(true: ModalSolution, est: ModalSolution) -> list:
    """Actual vs estimated metrics of every inter-area mode of the true system."""
    ref = [i for i, md in enumerate(true.modes) if md.band == "inter-area"]
    rows = []
    for i, j in zip(ref, match_modes(true, ref, est)):
        a = true.modes[i]
        row = {"true_mode": i + 1, "f_true": a.f, "zeta_true": a.zeta, "t_S_true": a.t_S}
        if j is not None:
            e = est.modes[j]
            row.update({
                "est_mode": j + 1, "f_est": e.f, "f_err_pct": _pct(e.f, a.f),
                "zeta_est": e.zeta, "zeta_err_pct": _pct(e.zeta, a.zeta),
                "t_S_est": e.t_S, "t_S_err_pct": _pct(e.t_S, a.t_S),
            })
        rows.append(row)
    return rows


def design_report(design: ControlDesign, sol: ModalSolution, names, *, mode="selection",
                  verification=None) -> dict:
    crit = list(design.critical)
    modes = []
    for pos, k in enumerate(crit):
        md = sol.modes[k]
        entry = {"mode": k + 1, "f_ol": md.f, "zeta_ol": md.zeta, "t_S_ol": md.t_S,
                 "sigma_d": design.sigma_d[pos]}
        if design.lam_cl:
            entry.update({"lambda_cl": design.lam_cl[pos], "zeta_cl": design.zeta_cl[pos],
                          "t_S_cl": design.t_S_cl[pos]})
        modes.append(entry)
    trace = [
        {"n_m": t.n_m, "candidates": [names[g] for g in t.candidates],
         "best": [names[g] for g in t.best], "J": t.J, "passed": t.passed,
         "zeta_cl": t.zeta, "t_S_cl": t.t_S, "combinations": t.combinations}
        for t in design.trace
    ]
    out = {
        "mode": mode,
        "passed": design.passed,
        "selected": [names[g] for g in design.selected],
        "n_m": design.n_m,
        "sigma_d": design.sigma_d,
        "J": design.J,
        "J_C": design.J_C,
        "critical_modes": modes,
        "trace": trace,
        "available": [names[g] for g in design.available],
        "K": design.K,
    }
    if verification is not None:
        out["verification"] = verification
    return out


def write_table4(design: ControlDesign, sol: ModalSolution, names, path) -> None:
    """Open- vs closed-loop properties of the critical modes for every trace level."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n_m", "mode", "est_zeta_ol_pct", "zeta_cl_pct", "est_tS_ol_s", "tS_cl_s",
                    "combination"])
        for t in design.trace:
            combo = "{" + ", ".join(names[g] for g in t.best) + "}"
            for pos, k in enumerate(design.critical):
                md = sol.modes[k]
                w.writerow([t.n_m, k + 1, f"{100 * md.zeta:.12g}", f"{100 * t.zeta[pos]:.12g}",
                            f"{md.t_S:.12g}", f"{t.t_S[pos]:.12g}", combo if pos == 0 else ""])
