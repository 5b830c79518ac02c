"""Static checks for GLSL sources."""
import re

PRECISION = re.compile(r"precision\s+(lowp|mediump|highp)")


def missing_precision(source):
    return PRECISION.search(source) is None


def lint_file(path):
    with open(path) as handle:
        text = handle.read()
    problems = []
    if missing_precision(text):
        problems.append("missing precision qualifier")
    return problems
