"""Point adjustment rewards a detector that knows nothing.

One long event and uniform random scores: a single random hit inside the
event credits all of it, so F1PA looks excellent while NAff-F1 sits at zero.

    python demos/point_adjust_flaw.py
"""

import numpy as np

from simad.metrics import BiasSpec, ThresholdSpec, evaluate


def main():
    y = np.zeros(50_000, dtype=int)
    y[20_000:25_000] = 1
    print(" seed     F1   F1PA  Aff-F1  NAff-F1")
    for seed in range(5):
        s = np.random.default_rng(seed).random(y.size)
        r = evaluate(s, y, ThresholdSpec("quantile", 0.99), BiasSpec("constant"))
        print(f"{seed:5d}  {r['F1']:.3f}  {r['F1PA']:.3f}  {r['Aff-F1']:.3f}  {r['NAff-F1']:+.3f}")


if __name__ == "__main__":
    main()
