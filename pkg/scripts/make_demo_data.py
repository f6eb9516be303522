"""Write demo inputs for the command line tool.

Creates labelled logit files (cal.csv, test.csv) drawn from a half-space
model with one noise draw per row, a pixel-score pool split into
calibration and test folders, and a simulate config file.
"""

import argparse
from pathlib import Path

import numpy as np

from rcp1.certificates import SmoothingSpec
from rcp1.scores import augment_batch, write_score_table
from rcp1.simulate import HalfspaceModel, synthetic_segmentation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="demo")
    ap.add_argument("--sigma", type=float, default=0.25)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    model = HalfspaceModel.random(16, 10, rng, spread=3.0)
    smoothing = SmoothingSpec.gaussian(args.sigma)
    for name, n in (("cal.csv", 500), ("test.csv", 1000)):
        x, y = model.sample(n, rng)
        table = augment_batch(lambda e: model.scores(x + e), smoothing, rng, n, 16, y)
        write_score_table(table, out / name)

    scores, truth = synthetic_segmentation(150, (32, 32), rng, noise_sigma=args.sigma)
    for split, idx in (("cal", range(100)), ("test", range(100, 150))):
        for sub in ("scores", "truth"):
            (out / split / sub).mkdir(parents=True, exist_ok=True)
        for i in idx:
            np.savetxt(out / split / "scores" / f"img{i:03d}.csv", scores[i],
                       delimiter=",", fmt="%.6f")
            np.savetxt(out / split / "truth" / f"img{i:03d}.csv", truth[i].astype(int),
                       delimiter=",", fmt="%d")

    (out / "experiment.cfg").write_text(
        "# synthetic coverage experiment\nd=16\nK=10\nn_cal=200\nn_test=200\n"
        "alpha=0.1\nsigma=0.5\nradius=0.25\ntrials=2000\nseed=0\n")
    print(f"wrote demo inputs to {out}/")


if __name__ == "__main__":
    main()
