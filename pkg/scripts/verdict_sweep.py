"""Relative gaps of both signed functionals on RP^3 over an epsilon/q grid.

    python scripts/verdict_sweep.py --eps 0.1,0.05,0.025,0.0125 --q 0.17,0.25,0.3
"""
import argparse
import csv
import sys
from dataclasses import dataclass

from spinlab.testspinor import TestQuadrature, yamabe_verdict


@dataclass
class SweepConfig:
    eps: tuple = (0.1, 0.05, 0.025, 0.0125)
    qs: tuple = (None,)
    radial_order: int = 24


def sweep(cfg: SweepConfig):
    quad = TestQuadrature(radial_order=cfg.radial_order)
    for spin in ("plus", "minus"):
        for q in cfg.qs:
            v = yamabe_verdict("rp3", spin, cfg.eps, q=q, quadrature=quad)
            for row in v.rows:
                yield {"spin": spin, "q": "default" if q is None else q, "eps": row.epsilon,
                       "gap_plus": row.plus.extra["relative_gap"], "gap_minus": row.minus.extra["relative_gap"],
                       "achieving_sign": row.achieving_sign}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", default="0.1,0.05,0.025,0.0125")
    ap.add_argument("--q", default="")
    ap.add_argument("--radial-order", type=int, default=24)
    a = ap.parse_args()
    qs = tuple(float(s) for s in a.q.split(",") if s) or (None,)
    cfg = SweepConfig(tuple(float(s) for s in a.eps.split(",")), qs, a.radial_order)
    w = None
    for row in sweep(cfg):
        if w is None:
            w = csv.DictWriter(sys.stdout, fieldnames=list(row))
            w.writeheader()
        w.writerow(row)


if __name__ == "__main__":
    main()
