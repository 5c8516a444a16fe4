"""Multi-agent exploration by imagining trajectories to influential states,
teleporting the simulator there, exploring onward, and training a
value-decomposition joint policy on the stitched episodes."""

__version__ = "0.1.0"
