"""qapforge command-line surface.

Wires the numerical engine in ``core`` to an argparse command tree with
environment-driven settings, structured logging, exit-code mapping, result
files and the SVG report.
"""
