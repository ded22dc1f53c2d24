"""Ledger CSVs, summary tables and run manifests.

Files are written into a scratch directory beside the target and moved into
place at the end, so a crashed run never leaves a half-written artifact set.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import shutil
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .engine import RunLedger

LEDGER_HEADER = "t,epoch,context,action,reward,regret,cum_regret,solver_iters"
SUMMARY_HEADER = "t,n_seeds,mean_cum_regret,std_cum_regret,mean_oracle_calls"


def fmt(v: float) -> str:
    return "%.12g" % v


def ledger_csv(ledger: RunLedger) -> str:
    buf = io.StringIO()
    buf.write(LEDGER_HEADER + "\n")
    cum = ledger.cum_regret
    for i in range(ledger.T):
        buf.write(
            f"{i + 1},{int(ledger.epochs[i])},{int(ledger.contexts[i])},{int(ledger.actions[i])},"
            f"{fmt(ledger.rewards[i])},{fmt(ledger.regrets[i])},{fmt(cum[i])},{int(ledger.solver_iters[i])}\n"
        )
    return buf.getvalue()


def read_ledger_csv(path) -> dict:
    """Columns of a ledger CSV as numpy arrays."""
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="ascii")
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


def checkpoints(T: int) -> list[int]:
    """t in {2^k} within [1, T], plus T."""
    pts = []
    t = 1
    while t <= T:
        pts.append(t)
        t *= 2
    if pts[-1] != T:
        pts.append(T)
    return pts


def summary_rows(ledgers: Sequence[RunLedger]) -> list[tuple]:
    T = ledgers[0].T
    cum = np.stack([L.cum_regret for L in ledgers])
    calls = np.stack([L.oracle_cum for L in ledgers]).astype(float)
    rows = []
    for t in checkpoints(T):
        c = cum[:, t - 1]
        rows.append((t, len(ledgers), float(c.mean()), float(c.std()), float(calls[:, t - 1].mean())))
    return rows


def summary_csv(ledgers: Sequence[RunLedger]) -> str:
    lines = [SUMMARY_HEADER]
    for t, n, m, s, c in summary_rows(ledgers):
        lines.append(f"{t},{n},{fmt(m)},{fmt(s)},{fmt(c)}")
    return "\n".join(lines) + "\n"


PLOT_SCRIPT = '''"""Plot mean cumulative regret from summary.csv (needs matplotlib)."""
import csv
import glob
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("summary.csv")))
t = [int(r["t"]) for r in rows]
m = [float(r["mean_cum_regret"]) for r in rows]
s = [float(r["std_cum_regret"]) for r in rows]
plt.plot(t, m, marker="o", label="mean")
plt.fill_between(t, [a - b for a, b in zip(m, s)], [a + b for a, b in zip(m, s)], alpha=0.2)
for path in sorted(glob.glob("ledger_*.csv")):
    cols = list(csv.DictReader(open(path)))
    plt.plot([int(r["t"]) for r in cols], [float(r["cum_regret"]) for r in cols], lw=0.5, alpha=0.4)
plt.xscale("log")
plt.xlabel("round")
plt.ylabel("cumulative regret")
plt.legend()
plt.savefig("regret.png", dpi=120)
'''


def sha256_bytes(b: bytes) -> str:
    return hashlib.sha256(b).hexdigest()


def write_run(
    out_dir,
    seeds: Sequence[int],
    ledgers: Sequence[RunLedger],
    manifest_extra: dict,
    emit_plot_script: bool = False,
) -> Path:
    """Write ledgers, summary and manifest into out_dir (replaced atomically)."""
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    files: dict[str, bytes] = {}
    for seed, L in zip(seeds, ledgers):
        files[f"ledger_{seed}.csv"] = ledger_csv(L).encode()
    files["summary.csv"] = summary_csv(ledgers).encode()
    if emit_plot_script:
        files["plot_regret.py"] = PLOT_SCRIPT.encode()
    manifest = dict(manifest_extra)
    manifest["files"] = {name: sha256_bytes(b) for name, b in sorted(files.items())}
    manifest["runs"] = [
        {
            "seed": int(seed),
            "oracle_calls": int(L.oracle_calls),
            "total_regret": fmt(L.total_regret),
            "escalations": int(L.meta.get("escalations", 0)),
        }
        for seed, L in zip(seeds, ledgers)
    ]
    files["manifest.json"] = (json.dumps(manifest, sort_keys=True, indent=2) + "\n").encode()
    scratch = Path(tempfile.mkdtemp(prefix=".tmp-", dir=out_dir.parent))
    try:
        for name, b in files.items():
            (scratch / name).write_bytes(b)
        if out_dir.exists():
            shutil.rmtree(out_dir)
        os.replace(scratch, out_dir)
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    return out_dir


def directory_digest(path, names: Iterable[str] | None = None) -> dict:
    path = Path(path)
    names = sorted(p.name for p in path.iterdir() if p.is_file()) if names is None else names
    return {n: sha256_bytes((path / n).read_bytes()) for n in names}
