class Service:
    def run(self):
        """Dispatch to the internal step twice."""
        return self.step() + self.step()

    def step(self):
        return 1


def main():
    s = Service()
    return s.run()
