"""Skeleton-based reconstruction of a blob: error, sparsity and gradient histograms."""
import argparse
from pathlib import Path

import numpy as np

from extremal.field import gen_blob
from extremal.fileio import histogram_csv, write_field
from extremal.morse import build_ms_complex, simplify
from extremal.reconstruct import compare_histograms, reconstruct, skeleton_mask


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--epsilon", type=float, default=0.0)
    ap.add_argument("--dilation", type=int, default=1)
    ap.add_argument("--out", default="out/reconstruction")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for seed in args.seeds:
        z = gen_blob((args.size, args.size), seed=seed)
        cx = simplify(build_ms_complex(z), args.epsilon) if args.epsilon > 0 else build_ms_complex(z)
        res = reconstruct(z, cx, args.dilation)
        rmse = np.sqrt(np.mean((res.field.values - z.values) ** 2)) / np.ptp(z.values)
        mask = skeleton_mask(cx, args.dilation)
        print(f"seed {seed}: RMSE {100 * rmse:.2f}% of range, mask {100 * mask.mean():.1f}%, "
              f"{res.iterations} sweeps, converged {res.converged}")
        write_field(out / f"blob{seed}.fgrid", z)
        write_field(out / f"recon{seed}.fgrid", res.field)
        for tag, (edges, counts) in zip(("orig", "recon"), compare_histograms([z, res.field], 32)):
            (out / f"hist_{tag}{seed}.csv").write_text(histogram_csv(edges, counts))


if __name__ == "__main__":
    main()
