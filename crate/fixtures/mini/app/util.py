"""Utility helpers."""
import os


class Loader:
    def load(self, path):
        return read_text(path)


def read_text(path):
    with open(path) as handle:
        return handle.read()
