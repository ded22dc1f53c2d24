"""Mean cumulative regret at log-spaced checkpoints for OE2D and baselines.

usage: python3 scripts/regret_curves.py [--T 20000] [--seeds 20] [--out curves.csv]
"""

import argparse

import numpy as np

from oe2d import engine, instances
from oe2d.artifacts import checkpoints


def curves(T: int, seeds: int) -> dict:
    runs = {"oe2d_small_epoch": [], "oe2d_doubling": [], "squarecbf": [], "uniform": []}
    for s in range(seeds):
        F, env = instances.discrete_instance(seed=s)
        runs["oe2d_small_epoch"].append(engine.oe2d_run(env, F, schedule=engine.EpochSchedule("small_epoch"), T=T, seed=s))
        runs["oe2d_doubling"].append(engine.oe2d_run(env, F, schedule=engine.EpochSchedule("doubling"), T=T, seed=s))
        runs["squarecbf"].append(engine.squarecbf_run(env, F, gamma=100.0, T=T, seed=s))
        runs["uniform"].append(engine.uniform_run(env, F, T=T, seed=s))
    pts = checkpoints(T)
    return {name: [float(np.mean([L.cum_regret[t - 1] for L in Ls])) for t in pts] for name, Ls in runs.items()} | {"t": pts}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=int, default=20000)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--out")
    args = ap.parse_args()
    c = curves(args.T, args.seeds)
    names = [k for k in c if k != "t"]
    lines = ["t," + ",".join(names)]
    for i, t in enumerate(c["t"]):
        lines.append(f"{t}," + ",".join(f"{c[n][i]:.6g}" for n in names))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    print(text, end="")


if __name__ == "__main__":
    main()
