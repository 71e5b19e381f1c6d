#!/usr/bin/env python3
"""Emit the delay/gain comparison curves as CSV files.

Produces, for the reference topology (N=20 files, K=10 users):

* ``centralized_delay.csv``   — delay vs cache size M for the centralized
  scheme with cooperation (alpha_max=5) next to the server-only and
  D2D-only baselines and the converse lower bound.
* ``centralized_gains.csv``   — cooperation gain G_c and parallel gain G_p
  vs M on the integer-t grid (alpha_max=5).
* ``decentralized_delay.csv`` — decentralized delay vs cache fraction p
  for alpha_max in {1, 3, 5}.

All values are computed exactly; the CSV stores the exact rational next to
a 12-significant-digit float for plotting.
"""

from __future__ import annotations

import argparse
import csv
from fractions import Fraction as Frac
from pathlib import Path

from coopcache import (
    SystemConfig,
    baselines,
    centralized_delay,
    centralized_gains,
    decentralized_delay,
    lower_bound,
)

N, K = 20, 10
ALPHA_CURVES = (1, 3, 5)


def _cell(x: Frac) -> list[str]:
    return [str(x), f"{float(x):.12g}"]


def write_centralized_delay(out: Path) -> None:
    header = ["M", "T_coop", "T_coop_float", "T_server_only", "T_server_only_float",
              "T_d2d_only", "T_d2d_only_float", "T_lower", "T_lower_float"]
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for twice_m in range(0, 2 * N + 1):  # M grid with step 1/2
            M = Frac(twice_m, 2)
            cfg = SystemConfig(N, K, M, alpha_max=5)
            row = [str(M)]
            row += _cell(centralized_delay(cfg))
            if M > 0:
                base = baselines(cfg)
                row += _cell(base.server_only) + _cell(base.d2d_only)
            else:
                # both baselines collapse to sending everything uncached
                row += _cell(Frac(K)) + ["", ""]
            row += _cell(lower_bound(cfg).T_lower)
            w.writerow(row)


def write_centralized_gains(out: Path) -> None:
    header = ["M", "t", "G_c", "G_c_float", "G_p", "G_p_float"]
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(0, K + 1):
            M = Frac(t * N, K)
            cfg = SystemConfig(N, K, M, alpha_max=5)
            if t == 0:
                w.writerow([str(M), t, "1", "1", "", ""])  # no caches: G_c = 1
                continue
            g_c, g_p = centralized_gains(cfg)
            w.writerow([str(M), t] + _cell(g_c) + _cell(g_p))


def write_decentralized_delay(out: Path) -> None:
    header = ["p"]
    for a in ALPHA_CURVES:
        header += [f"T_alpha{a}", f"T_alpha{a}_float"]
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(0, 41):  # p grid with step 1/40
            p = Frac(i, 40)
            row = [str(p)]
            for a in ALPHA_CURVES:
                cfg = SystemConfig(N, K, p * N, alpha_max=a)
                row += _cell(decentralized_delay(cfg))
            w.writerow(row)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="figures", type=Path,
                        help="directory for the CSV files (created if missing)")
    args = parser.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    write_centralized_delay(args.out_dir / "centralized_delay.csv")
    write_centralized_gains(args.out_dir / "centralized_gains.csv")
    write_decentralized_delay(args.out_dir / "decentralized_delay.csv")
    for name in ("centralized_delay", "centralized_gains", "decentralized_delay"):
        print(f"wrote {args.out_dir / (name + '.csv')}")


if __name__ == "__main__":
    main()
