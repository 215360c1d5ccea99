"""Open-vocabulary audio-visual semantic segmentation at desk scale."""

__version__ = "0.1.0"
