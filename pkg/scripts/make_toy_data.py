"""Write a simulated SNP study (x, y, blocks, positions, active set) to a directory,
ready for the command-line tools.

    python3 scripts/make_toy_data.py toy/ --n 500 --p 1000 --blocks 2
    hdinfer cluster --x toy/x.csv --block toy/blocks.tsv --out toy/tree.txt
    hdinfer test --x toy/x.csv --y toy/y.txt --tree toy/tree.txt --seed 1
"""
import argparse
from pathlib import Path

from hdinfer.dataset import save_dataset, save_two_column
from hdinfer.simlab import toy_study


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("outdir")
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--p", type=int, default=1000)
    ap.add_argument("--blocks", type=int, default=2)
    ap.add_argument("--s0", type=int, default=10)
    ap.add_argument("--beta", type=float, default=1.0)
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--correlation", default="block:0.5:10")
    ap.add_argument("--family", choices=("gaussian", "binomial"), default="gaussian")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    data, blocks, active = toy_study(args.n, args.p, args.blocks, args.s0, args.beta,
                                     args.sigma, args.correlation, args.family, args.seed)
    save_dataset(data, out / "x.csv", out / "y.txt")
    save_two_column(out / "blocks.tsv", ("variable", "block"), blocks.entries)
    # positions: column order within each chunk
    save_two_column(out / "positions.tsv", ("variable", "position"),
                    [(c, i) for i, c in enumerate(data.colnames)])
    (out / "active.txt").write_text("\n".join(active) + "\n")
    print(f"wrote n={data.n}, p={data.p}, {len(active)} active variables to {out}/")


if __name__ == "__main__":
    main()
