"""Recompute every metric in a run's report.json from the emitted tables.

    python -m mortensen.audit OUT_DIR [OUT_DIR ...]

Exits non-zero if a metric cannot be recomputed or disagrees with the report.
"""

import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

RTOL = 1e-9


def table(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]) if body else np.zeros((0, len(header)))
    return {name: data[:, j] for j, name in enumerate(header)}


def key(x):
    """Float formatted the way the report keys are (shortest round-trip, no exponent for integers)."""
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def loglog_slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return math.nan
    lx, ly = np.log(x[ok]), np.log(y[ok])
    lx0, ly0 = lx - lx.mean(), ly - ly.mean()
    return float((lx0 * ly0).sum() / (lx0 * lx0).sum())


def holder_quotient(t, x):
    best = 0.0
    for i in range(len(t) - 1):
        d = np.linalg.norm(x[i + 1 :] - x[i], axis=1) / np.sqrt((np.arange(1, len(t) - i)) * (t[1] - t[0]))
        best = max(best, float(d.max()))
    return best


def columns(tab, prefix):
    names = sorted((n for n in tab if n.startswith(prefix) and n[len(prefix) :].isdigit()), key=lambda n: int(n[len(prefix) :]))
    return np.column_stack([tab[n] for n in names])


def simulate(d):
    truth = table(d / "truth.csv")
    t = truth["t"]
    w = columns(truth, "w")
    return {
        "truth_max_dist": table(d / "truth_dist.csv")["dist"].max(),
        "truth_holder": holder_quotient(t, columns(truth, "x")),
        "disturbance_l2": math.sqrt((t[1] - t[0]) * float((w[:-1] ** 2).sum())),
    }


def twin(d):
    obs = table(d / "observer.csv")
    err = np.linalg.norm(columns(obs, "observer") - columns(obs, "truth"), axis=1)
    return {
        "observer_rmse": math.sqrt(float((err**2).mean())),
        "observer_final_error": float(err[-1]),
        "unreachable": float(table(d / "reachability.csv")["unreachable"].sum()),
    }


def kappa_sweep(d):
    k = table(d / "kappa_errors.csv")
    m = {f"value_error@{key(kk)}": e for kk, e in zip(k["kappa"], k["value_error"])}
    m["value_slope"] = loglog_slope(k["kappa"], k["value_error"])
    if "traj_error" in k:
        m["traj_slope"] = loglog_slope(k["kappa"], k["traj_error"])
    if "scaled_distance" in k:
        s = k["scaled_distance"]
        m["envelope_max"] = s.max()
        m["envelope_ratio"] = s.max() / s.min()
    return m


def kalman_xcheck(d):
    k = table(d / "kalman_xcheck.csv")
    m = {"dp_sup_error": k["dp_error"].max(), "dp_argmin_offset": k["dp_argmin_offset"].max()}
    if "hjb_error" in k:
        m["hjb_sup_error"] = k["hjb_error"].max()
        m["hjb_argmin_offset"] = k["hjb_argmin_offset"].max()
    if (d / "duality.csv").exists():
        g = table(d / "duality.csv")["gap"]
        m["duality_gap"] = g[0]
        if len(g) > 1:
            m["duality_gap_refined"] = g[1]
    return m


def hjb_vs_dp(d):
    rows = table(d / "hjb_dp_rows.csv")
    m = {
        "sub_vs_dp": rows["sub_vs_dp"].max(),
        "super_vs_dp": rows["super_vs_dp"].max(),
        "wall_gap": table(d / "wall_gap.csv")["gap"].max(),
    }
    for name, rep in json.loads((d / "residuals.json").read_text()).items():
        m[f"{name}_interior_residual"] = rep["interior_max_residual"]
        m[f"{name}_boundary_sub_residual"] = rep["boundary_sub_residual"]
        m[f"{name}_boundary_super_residual"] = rep["boundary_super_residual"]
    if (d / "wall_slopes.csv").exists():
        w = table(d / "wall_slopes.csv")
        m["zakai_worst_super_residual"] = w["super_residual"].max(initial=0.0)
        m["zakai_best_sub_residual"] = w["sub_residual"].min(initial=math.inf)
    return m


def laplace_sweep(d):
    m = {}
    for p in sorted(d.glob("laplace_*.csv")):
        name = p.stem[len("laplace_") :]
        lap = table(p)
        m[f"laplace_{name}_final_gap"] = lap["gap"][-1]
        m[f"laplace_{name}_slope"] = loglog_slope(lap["epsilon"], lap["gap"])
    return m


def holder_check(d):
    h = table(d / "holder.csv")
    a, b = h["quotient_dt"], h["quotient_half_dt"]
    return {"holder_max": np.maximum(a, b).max(), "holder_ratio": np.maximum(b / a, a / b).max()}


def bellman_check(d):
    b = table(d / "bellman.csv")
    return {f"bellman@{key(t)}": r for t, r in zip(b["tau"], b["residual"])}


RECOMPUTE = {
    "simulate": [simulate],
    "twin": [twin],
    "kappa-sweep": [kappa_sweep],
    "kalman-xcheck": [kalman_xcheck],
    "hjb-vs-dp": [hjb_vs_dp],
    "laplace-sweep": [laplace_sweep],
    "holder-check": [holder_check],
    "bellman-check": [bellman_check],
}


def close(a, b):
    if math.isnan(a) and math.isnan(b):
        return True
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= RTOL * max(abs(a), abs(b)) + 1e-300


def audit(out_dir):
    """Returns a list of `(metric, reported, recomputed, ok)`."""
    d = Path(out_dir)
    report = json.loads((d / "report.json").read_text())
    found = {}
    for f in RECOMPUTE[report["kind"]]:
        found.update({k: float(v) for k, v in f(d).items()})
    result = []
    for name, reported in report["metrics"].items():
        reported = math.nan if reported is None else float(reported)
        again = found.get(name)
        result.append((name, reported, again, again is not None and close(reported, again)))
    return result


def main(argv):
    if not argv:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    ok = True
    for out_dir in argv:
        print(out_dir)
        for name, reported, again, good in audit(out_dir):
            ok &= good
            shown = "missing" if again is None else f"{again:.16e}"
            print(f"  {'OK ' if good else 'BAD'} {name:<32} report {reported:.16e}  tables {shown}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
