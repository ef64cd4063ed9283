"""Internal tooling for repository guard checks.

The checks in ``tools.guard`` enforce:
- no typing.Any, casts or "type: ignore" comments
- no bare except, every handler re-raises
- no print; use logging or write to sys.stdout explicitly
- no global numpy RNG; randomness flows through seeded Generators
"""
