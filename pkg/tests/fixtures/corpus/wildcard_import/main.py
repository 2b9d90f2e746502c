from util import *


def use(x):
    """Calls through a wildcard import."""
    return helper(x)
