"""Physical constants (SI). Pinned values; not taken from scipy.constants so
results do not drift with CODATA revisions."""

import math

C0 = 299792458.0
EPS0 = 8.8541878128e-12
MU0 = 1.0 / (EPS0 * C0 * C0)
EULER_GAMMA = 0.57721566490153286061
TWO_PI = 2.0 * math.pi
