"""Toy two-level evaluator for external_example.toml.

Level 1 is a shifted Rosenbrock valley; level 2 adds a smooth bias.
"""
import math
import sys

for line in sys.stdin:
    parts = line.split()
    level, x = int(parts[0]), [float(v) for v in parts[1:]]
    f = sum(100.0 * (b - a * a) ** 2 + (1.0 - a) ** 2 for a, b in zip(x, x[1:]))
    if level == 2:
        f += 0.5 * math.sin(3.0 * x[0]) + 0.3
    print(repr(f), flush=True)
