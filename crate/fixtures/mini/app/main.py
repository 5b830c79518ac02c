import sys
from app.util import Loader, read_text


class Base:
    def run(self):
        pass


class App(Base):
    def run(self):
        loader = Loader()
        return loader.load(sys.argv[1])


def main():
    App().run()
