import math


def compute(x):
    """Leans on the standard library only."""
    return math.sqrt(x)
