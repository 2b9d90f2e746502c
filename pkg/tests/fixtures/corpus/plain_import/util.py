def helper(x):
    """Bump a value."""
    return x + 1
