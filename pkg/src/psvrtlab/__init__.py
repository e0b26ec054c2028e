"""psvrtlab: PSVRT benchmark generator, micro-CNN engine, and learning-curve lab."""

__version__ = "0.1.0"
