"""Operation tally used by the harness coverage check.

Public operations call :func:`record` with a stable "module.op" name. The
scenario harness snapshots the tally around a run and asserts that the four
drift scenarios plus the placement steps collectively touch every public
operation of the core modules.
"""

from __future__ import annotations

from collections import Counter

_TALLY: Counter[str] = Counter()


def record(op: str) -> None:
    _TALLY[op] += 1


def snapshot() -> dict[str, int]:
    return dict(_TALLY)


def reset() -> None:
    _TALLY.clear()


def ops_since(before: dict[str, int]) -> set[str]:
    """Names of operations invoked since ``before`` was snapshotted."""
    return {op for op, n in _TALLY.items() if n > before.get(op, 0)}
