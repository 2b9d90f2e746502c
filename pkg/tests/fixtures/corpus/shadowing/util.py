def helper():
    """The importable helper."""
    return 0
