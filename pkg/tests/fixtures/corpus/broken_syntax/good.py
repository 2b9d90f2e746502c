def fine():
    """Still parsed even though a sibling file is broken."""
    return 1
