from helpers import h


def g(x):
    return h(x) * 3
