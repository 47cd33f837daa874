"""
Runtime configuration for the packing search.
Defaults come from environment variables so batch jobs can be tuned without
touching the command line; the CLI flags override these per run.
"""

import os

# Environment variables
DEFAULT_SEED = int(os.environ.get("PACKING_SEED", "7"))
DEFAULT_OUT_DIR = os.environ.get("PACKING_OUT_DIR", "results")
LOG_LEVEL = os.environ.get("PACKING_LOG_LEVEL", "INFO")
WORKERS = int(os.environ.get("PACKING_WORKERS", "0")) or (os.cpu_count() or 1)

# Contact tolerance as a fraction of the shape diameter
CONTACT_TOLERANCE = 1e-9
# Looser tolerance for certificates with truncated decimals
PUBLISHED_TOLERANCE = 1e-4

NEIGHBOR_BLOCK = 5
# Cell angle ranges as fractions of pi. Every lattice has a reduced basis
# with gamma in [pi/3, 2pi/3]; the rhombic cell of cm and c2mm needs the wider range.
OBLIQUE_GAMMA_BOUNDS = (1.0 / 3.0, 2.0 / 3.0)
RHOMBIC_GAMMA_BOUNDS = (1.0 / 6.0, 5.0 / 6.0)

GIBBS_BURN_IN = 30
KL_BUDGET = 1.0
KL_BUDGET_FLOOR = 1e-3
KL_STAGNATION = 50
ELITE_FRACTION = 0.1
POINT_CONCENTRATION = 0.999
STAGNATION_STOP = 500

PRESETS = {
    "fast": {
        "max_iterations": 2000,
        "refine_rounds": 15,
        "refine_max_iterations": 300,
    },
    "full": {
        "max_iterations": 8000,
        "refine_rounds": 30,
        "refine_max_iterations": 8000,
    },
}


def preset(name: str) -> dict:
    """Return a copy of a named preset, rejecting unknown names."""
    try:
        return dict(PRESETS[name])
    except KeyError:
        raise ValueError(f"Unknown preset '{name}'. Choose one of: {', '.join(PRESETS)}")
