"""Repository guard checks.

Each check takes a parsed module and returns ``path:line message`` strings.
``python -m tools.guard [roots...]`` runs every check and exits non-zero on
any violation.
"""

from __future__ import annotations

import ast
import sys
import tokenize
from collections.abc import Callable, Iterable
from io import StringIO
from pathlib import Path
from typing import Final

FORBIDDEN_TYPING: Final[frozenset[str]] = frozenset({"Any", "cast"})
LEGACY_NUMPY_RANDOM: Final[frozenset[str]] = frozenset(
    {"seed", "rand", "randn", "random", "randint", "choice", "shuffle", "uniform"}
)
DEFAULT_ROOTS: Final[tuple[str, ...]] = ("cli", "core", "tests", "tools")

Check = Callable[[Path, str, ast.Module], list[str]]


def iter_python_files(roots: Iterable[str]) -> Iterable[Path]:
    for root in roots:
        base = Path(root)
        if base.is_file() and base.suffix == ".py":
            yield base
        elif base.exists():
            yield from sorted(base.rglob("*.py"))


def check_typing(path: Path, text: str, tree: ast.Module) -> list[str]:
    errors: list[str] = []
    for node in ast.walk(tree):
        if isinstance(node, ast.ImportFrom) and node.module == "typing":
            errors.extend(
                f"{path}:{node.lineno} forbidden typing import '{alias.name}'"
                for alias in node.names
                if alias.name in FORBIDDEN_TYPING
            )
        if (
            isinstance(node, ast.Attribute)
            and isinstance(node.value, ast.Name)
            and node.value.id == "typing"
            and node.attr in FORBIDDEN_TYPING
        ):
            errors.append(f"{path}:{node.lineno} forbidden use of typing.{node.attr}")
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "cast":
            errors.append(f"{path}:{node.lineno} forbidden use of cast()")
        if isinstance(node, ast.Name) and node.id == "Any":
            errors.append(f"{path}:{node.lineno} forbidden type 'Any'")
    # comments only, so string literals never match
    errors.extend(
        f"{path}:{tok.start[0]} forbidden 'type: ignore'"
        for tok in tokenize.generate_tokens(StringIO(text).readline)
        if tok.type == tokenize.COMMENT and "type: ignore" in tok.string
    )
    return errors


def _handler_has_raise(handler: ast.ExceptHandler) -> bool:
    return any(isinstance(node, ast.Raise) for node in ast.walk(handler))


def check_exceptions(path: Path, text: str, tree: ast.Module) -> list[str]:
    errors: list[str] = []
    for node in ast.walk(tree):
        if isinstance(node, ast.ExceptHandler):
            if node.type is None:
                errors.append(f"{path}:{node.lineno} bare 'except' is forbidden")
            if not _handler_has_raise(node):
                errors.append(f"{path}:{node.lineno} except without re-raise is forbidden")
        if isinstance(node, ast.ImportFrom) and node.module == "contextlib":
            errors.extend(
                f"{path}:{node.lineno} contextlib.{alias.name} hides exceptions"
                for alias in node.names
                if alias.name == "suppress"
            )
        if (
            isinstance(node, ast.Attribute)
            and isinstance(node.value, ast.Name)
            and node.value.id == "contextlib"
            and node.attr == "suppress"
        ):
            errors.append(f"{path}:{node.lineno} contextlib.suppress hides exceptions")
    return errors


def check_print(path: Path, text: str, tree: ast.Module) -> list[str]:
    return [
        f"{path}:{node.lineno} use logger or sys.stdout; 'print' is forbidden"
        for node in ast.walk(tree)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "print"
    ]


def _is_numpy_random(node: ast.expr) -> bool:
    return (
        isinstance(node, ast.Attribute)
        and node.attr == "random"
        and isinstance(node.value, ast.Name)
        and node.value.id in ("np", "numpy")
    )


def check_numpy_random(path: Path, text: str, tree: ast.Module) -> list[str]:
    errors: list[str] = []
    for node in ast.walk(tree):
        if (
            isinstance(node, ast.Attribute)
            and node.attr in LEGACY_NUMPY_RANDOM
            and _is_numpy_random(node.value)
        ):
            errors.append(
                f"{path}:{node.lineno} global numpy.random.{node.attr}; use a seeded Generator"
            )
        if isinstance(node, ast.ImportFrom) and node.module == "numpy.random":
            errors.extend(
                f"{path}:{node.lineno} global numpy.random.{alias.name}; use a seeded Generator"
                for alias in node.names
                if alias.name in LEGACY_NUMPY_RANDOM
            )
    return errors


CHECKS: Final[tuple[Check, ...]] = (
    check_typing,
    check_exceptions,
    check_print,
    check_numpy_random,
)


def check_path(path: Path) -> list[str]:
    text = path.read_text(encoding="utf-8")
    try:
        tree = ast.parse(text, filename=str(path))
    except SyntaxError as exc:
        sys.stderr.write(f"{path}: PARSE_ERROR {exc}\n")
        raise
    errors: list[str] = []
    for check in CHECKS:
        errors.extend(check(path, text, tree))
    return errors


def run_guards(roots: Iterable[str]) -> int:
    errors: list[str] = []
    for path in iter_python_files(roots):
        errors.extend(check_path(path))
    if errors:
        sys.stderr.write("\n".join(errors) + "\n")
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    roots = argv if argv else list(DEFAULT_ROOTS)
    return run_guards(roots)


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
