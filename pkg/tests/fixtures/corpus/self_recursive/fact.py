def fact(n):
    """Factorial by self-recursion."""
    if n <= 1:
        return 1
    return n * fact(n - 1)
