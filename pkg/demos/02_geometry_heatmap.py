"""
Where to put the last two conditions
====================================

Four conditions are fixed: a value at the origin and a value plus both
partials at (r, r).  Adding a value and an x1-partial at a moving point x
completes the set.  The grid records Lambda at each x; the diagonal through
(r, r) is degenerate.

The CSV matches ``bdfo heatmap --preset mixed-pair``.  A picture is drawn
when matplotlib is installed.
"""
import io

import numpy as np

from bdfo import AvailableSet
from bdfo.bench import parse_heatmap_config
from bdfo.poise import heatmap_grid

base, additions, A, center, radius, _ = parse_heatmap_config({"preset": "mixed-pair"})
grid = heatmap_grid(base, additions, A, center=center, radius_=radius, resolution=41)

inside = grid.in_region & grid.poised
print("cells in region:", int(grid.in_region.sum()), " poised:", int(inside.sum()))
print("best Lambda %.3f at %s" % (grid.values[inside].min(),
                                  np.argwhere(grid.values == grid.values[inside].min())[0]))

fh = io.StringIO()
grid.to_csv(fh)
print(fh.getvalue().splitlines()[0])

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    vals = np.where(inside, np.log10(np.where(inside, grid.values, 1.0)), np.nan)
    fig, ax = plt.subplots(figsize=(4, 4))
    im = ax.imshow(vals.T, origin="lower", extent=[-1, 1, -1, 1])
    fig.colorbar(im, label="log10 Lambda")
    fig.savefig("heatmap_mixed_pair.png", dpi=120)
