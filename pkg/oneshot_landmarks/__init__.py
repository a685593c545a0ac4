"""
Oneshot Landmarks - one-shot anatomical landmark detection on frozen dense features.
"""

__version__ = "0.1.0"
