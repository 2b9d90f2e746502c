def undocumented_entry(x):
    return documented_helper(x)


def documented_helper(x):
    """Add two to the input."""
    return x + 2
