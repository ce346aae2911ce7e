"""Quasi-static simulator for a pneumatically actuated tendon-driven hand.

The package models the 22-muscle prototype: calibrated McKibben actuators,
per-finger torque-balance solving, touch-triggered adaptive grasping, and an
experiment harness that reproduces the bench measurements (range of motion,
fingertip and grasping forces, Kapandji opposition score).
"""

__version__ = "0.1.0"
