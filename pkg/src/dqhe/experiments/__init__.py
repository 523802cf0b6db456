"""Run configuration, parameter sweeps, disorder averaging and figure data."""
