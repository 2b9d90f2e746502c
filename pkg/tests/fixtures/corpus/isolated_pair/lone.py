def alpha():
    """No calls at all."""
    return 1


def beta():
    return 2
