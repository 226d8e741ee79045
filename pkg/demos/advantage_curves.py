"""Advantage curves of the estimator family, as a table and an SVG chart.

    python3 demos/advantage_curves.py [out_dir]
"""

# %%
import sys
from pathlib import Path

import numpy as np

from grpolab.advantage import advantage_flipped, curve
from grpolab.svg import line_chart

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)
G = 8
grid = np.arange(1, G) / G

# %% Positive advantage per group accuracy for a few exponents.
# beta = 0 is REINFORCE, 0.5 is GRPO, 0.9 is the asymmetric default.
print("p      " + "  ".join(f"beta={b:<4}" for b in (0.0, 0.5, 0.9)))
for p in grid:
    print(f"{p:.3f}  " + "  ".join(f"{curve(p, b, True):9.4f}" for b in (0.0, 0.5, 0.9)))

# %% The flipped curves on the full grid, endpoints included.
# A group with p=0 has no correct rollout (and p=1 no incorrect one), so each
# curve lives on one closed end of the grid.
pos_grid = np.arange(1, G + 1) / G
neg_grid = np.arange(0, G) / G
flip_pos = [advantage_flipped(p, 1, 0.5, G) for p in pos_grid]
flip_neg = [advantage_flipped(p, 0, 0.5, G) for p in neg_grid]
print("\nflipped positive at p=1:", round(flip_pos[-1], 6))
print("flipped negative at p=0:", round(flip_neg[0], 6))

# %%
fine = np.linspace(0.02, 0.98, 97)
series = [(f"pos beta={b}", fine, curve(fine, b, True)) for b in (0.0, 0.5, 0.9)]
series += [(f"neg beta={b}", fine, curve(fine, b, False)) for b in (0.0, 0.5, 0.4)]
series += [("pos flipped", pos_grid, flip_pos), ("neg flipped", neg_grid, flip_neg)]
path = line_chart(series, out / "advantage_curves.svg", "Advantage vs group accuracy", "p", "advantage")
print("wrote", path)
