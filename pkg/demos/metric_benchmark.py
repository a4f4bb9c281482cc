"""Simulated detectors of graded accuracy under every metric.

Random scores a high Aff-F1 but NAff-F1 near zero, and M10 goes negative.

    python demos/metric_benchmark.py [seed]
"""

import sys

from simad.synthbench import run_bench


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    table = run_bench(seed=seed)
    sys.stdout.write(table.to_text())
    for (demo, method), msg in table.errors.items():
        print(f"{demo}/{method}: {msg}")


if __name__ == "__main__":
    main()
