"""SEC lower bound versus DOEC for the cheating-code family.

usage: python3 scripts/cheating_code_table.py [--gamma 100] [--eps 0.01]
"""

import argparse

from oe2d import complexity as cx
from oe2d.core import Dirac
from oe2d.design import certify


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--gamma", type=float, default=100.0)
    ap.add_argument("--eps", type=float, default=0.01)
    ap.add_argument("--resolution", type=int, default=20)
    args = ap.parse_args()
    g, e = args.gamma, args.eps
    print("k,n_actions,sec_lower,sec_floor,p_beta_certificate,doec_bound,doec_grid_face")
    for k in (1, 2, 3, 4, 5):
        cc = cx.cheating_code_instance(k)
        sec = cx.sec_lower_bound_search(cc.G, Dirac(), e, 2, extra_sequences=[cc.canonical_sequence()])
        pb = certify(cc.p_beta(cc.beta_star(g)), 0, cc.G, Dirac(), g, e)
        face = [0] + list(cc.code_actions)
        grid = cx.doec_bruteforce(0, cc.G, Dirac(), g, e, cx.GridSpec(args.resolution), face=face)
        print(f"{k},{cc.n_actions},{sec:.6g},{cc.sec_floor(e):.6g},{pb:.6g},{cc.doec_bound(g):.6g},{grid:.6g}")


if __name__ == "__main__":
    main()
