"""Grid dumps of learned, optimal, and prior proposal log-densities."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..models import ModelBundle
from ..oracle import growth_optimal_logdensity
from ..params import ParamVector
from ..ssm import LOG_2PI

PROBE_X = 0.1
PROBE_Y = 6.0
PROBE_T = 1


def proposal_density_columns(bundle: ModelBundle, theta: ParamVector, x: float, y: float,
                             t: int, grid: np.ndarray):
    """Aligned (grid, learned, optimal, prior) log-density columns.

    The learned column is the proposal's normalized Gaussian log-density;
    the optimal column is unnormalized (transition times emission); the
    prior column is the normalized transition density.
    """
    model = bundle.model
    if model.d_x != 1:
        raise ValueError("density dumps are defined for scalar-state models")
    grid = np.asarray(grid, dtype=np.float64)
    x_arr = np.array([[float(x)]])
    y_arr = np.atleast_1d(float(y))
    mean, std, _ = bundle.proposal.mean_std(theta, x_arr, y_arr, t)
    z = (grid - mean[0, 0]) / std[0, 0]
    learned = -0.5 * z * z - np.log(std[0, 0]) - 0.5 * LOG_2PI
    optimal = growth_optimal_logdensity(model, theta, x, y, t, grid)
    grid_states = grid.reshape(-1, 1)
    prior = model.log_transition(theta, np.full_like(grid_states, float(x)), grid_states, t)
    return grid, learned, optimal, prior


def write_proposal_dump(path: str | Path, bundle: ModelBundle, theta: ParamVector,
                        x: float, y: float, t: int, grid: np.ndarray) -> None:
    grid, learned, optimal, prior = proposal_density_columns(bundle, theta, x, y, t, grid)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("# osiwae-proposal-dump v1\n")
        handle.write(f"# probe: x={x!r} y={y!r} t={t}\n")
        handle.write("# optimal column is unnormalized; learned and prior are normalized\n")
        handle.write("x_next,learned_logdensity,optimal_logdensity,prior_logdensity\n")
        for row in zip(grid, learned, optimal, prior):
            handle.write(",".join(repr(float(v)) for v in row) + "\n")
    _write_plot_script(Path(path).parent)


_PLOT_SCRIPT = '''"""Generated plotting helper; reads a proposal dump CSV in this directory."""
import csv
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent / "proposal_dump.csv"
with open(path) as fh:
    for _ in range(3):
        fh.readline()
    rows = list(csv.DictReader(fh))

grid = [float(r["x_next"]) for r in rows]
fig, ax = plt.subplots(figsize=(7, 4))
for col, label in [("learned_logdensity", "learned proposal"),
                   ("optimal_logdensity", "optimal kernel (unnormalized)"),
                   ("prior_logdensity", "prior kernel")]:
    ax.plot(grid, [float(r[col]) for r in rows], label=label)
ax.set_xlabel("next state")
ax.set_ylabel("log density")
ax.legend()
fig.tight_layout()
out = path.with_suffix(".png")
fig.savefig(out, dpi=120)
print("wrote", out)
'''


def _write_plot_script(out_dir: Path) -> None:
    with open(out_dir / "plot_proposal.py", "w", encoding="utf-8") as handle:
        handle.write(_PLOT_SCRIPT)
