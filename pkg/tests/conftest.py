import warnings

import numpy as np
import pytest

from firmfacts import panel as panel_mod
from firmfacts.synth import SynthConfig, generate_panel

warnings.filterwarnings("ignore", category=RuntimeWarning)


@pytest.fixture(scope="session")
def small_panel():
    """Shared synthetic panel: 400 firms x 15 years, mild hazard."""
    cfg = SynthConfig(n_firms=400, n_years=15, hazard=0.05, seed=101)
    raw, truth = generate_panel(cfg)
    import pandas as pd

    derived = panel_mod._derive_frame(raw)
    full = panel_mod.apply_filters(pd.concat([raw, derived], axis=1))
    return panel_mod.Panel(full), truth, raw


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20190515)
