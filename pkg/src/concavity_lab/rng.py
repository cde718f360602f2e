"""Counter-based uniforms: one independent stream per walk.

A draw is a pure function of (seed, walk, draw index), so a walk sees the same
numbers whichever worker runs it and in whatever order blocks complete.
"""

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
DRAW_BITS = 24
MAX_DRAWS = 1 << DRAW_BITS


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniforms(seed, walk, draw):
    """U(0, 1) doubles (53-bit, never exactly 0) for broadcast walk/draw indices."""
    walk = np.asarray(walk, dtype=np.uint64)
    draw = np.asarray(draw, dtype=np.uint64)
    with np.errstate(over="ignore"):
        counter = (walk << np.uint64(DRAW_BITS)) + draw
        z = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + (counter + np.uint64(1)) * _GAMMA)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
