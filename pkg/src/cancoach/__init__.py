"""Audible time-gap coaching for vehicle following.

Decodes ego and radar state from CAN logs or live synthesis, associates the
radar track belonging to the lead vehicle, turns gap error into audible
accelerate/decelerate cues, and measures how well a human (modeled or live)
holds the commanded gap.
"""

__version__ = "0.1.0"

from .errors import CanCoachError

__all__ = ["CanCoachError", "__version__"]
