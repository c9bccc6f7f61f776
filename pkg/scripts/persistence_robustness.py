"""Critical counts of noisy feature blobs after simplification, across noise levels."""
import argparse

from extremal.field import add_noise, gen_feature_blob
from extremal.morse import build_ms_complex, simplify


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--epsilon", type=float, default=0.05)
    ap.add_argument("--noise", type=float, nargs="+", default=[0.005, 0.01, 0.02, 0.04])
    args = ap.parse_args()
    clean = {s: gen_feature_blob((args.size, args.size), seed=s) for s in range(args.seeds)}
    want = {s: simplify(build_ms_complex(f), args.epsilon).counts() for s, f in clean.items()}
    for amp in args.noise:
        hits = sum(simplify(build_ms_complex(add_noise(f, amp, s)), args.epsilon).counts() == want[s]
                   for s, f in clean.items())
        print(f"noise {amp:.3f}: {hits}/{args.seeds} match the clean counts")


if __name__ == "__main__":
    main()
