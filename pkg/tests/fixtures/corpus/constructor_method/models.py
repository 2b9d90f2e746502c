class Engine:
    def __init__(self):
        self.level = 0

    def start(self):
        return "started"
