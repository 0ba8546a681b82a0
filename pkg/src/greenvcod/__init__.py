"""Feed-forward video camouflaged object detection with boosted-tree cascades
and temporal-neighborhood refinement."""

__version__ = "0.1.0"

STANDARD_SIZE = 168
