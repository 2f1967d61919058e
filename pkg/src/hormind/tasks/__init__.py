"""Benchmark task registry."""

from __future__ import annotations

from . import dde, maze, sudoku
from .base import TaskAdapter

_ADAPTERS = {
    "sudoku": (sudoku.generate, sudoku.SudokuTask),
    "maze": (maze.generate, maze.MazeTask),
    "dde": (dde.generate, dde.DdeTask),
}

TASK_NAMES = tuple(_ADAPTERS)


def generate_instance(task: str, seed: int, difficulty: str = "default"):
    if task not in _ADAPTERS:
        raise ValueError(f"unknown task {task!r}; expected one of {TASK_NAMES}")
    return _ADAPTERS[task][0](seed, difficulty)


def make_adapter(task: str, instance) -> TaskAdapter:
    if task not in _ADAPTERS:
        raise ValueError(f"unknown task {task!r}; expected one of {TASK_NAMES}")
    return _ADAPTERS[task][1](instance)
