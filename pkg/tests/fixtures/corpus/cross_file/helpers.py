def h(x):
    return x - 1
