"""Interactive instruction grounding for pick-and-place scenes.

Maps free-form pick-and-place instructions to a target object and a
destination box, detects interpretation ambiguity with a score margin,
and resolves it through clarification turns whose scores are summed.
"""

__version__ = "0.1.0"
