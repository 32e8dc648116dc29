"""Parameter synthesis for parametric MDPs via convex approximations."""

__version__ = "0.1.0"
