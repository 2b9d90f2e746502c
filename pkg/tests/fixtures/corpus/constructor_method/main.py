from models import Engine


def boot():
    """Construct an engine and start it."""
    e = Engine()
    return e.start()
