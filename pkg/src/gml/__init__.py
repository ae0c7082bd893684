"""Graph mutual learning: cohorts of shallow GNNs trained together, then distilled into MLPs."""

__version__ = "0.1.0"
