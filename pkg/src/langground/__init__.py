"""Grounding natural-language commands to reward functions at the right
level of a planning-abstraction hierarchy, with flat and hierarchical
planners to execute them in a simulated mobile-manipulation gridworld."""

__version__ = "0.1.0"
