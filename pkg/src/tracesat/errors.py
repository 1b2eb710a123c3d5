"""Shared exceptions and budget handling.

Exit-code contract used by the CLI: 0 ok, 1 verification failure,
2 input error, 3 budget exceeded, 4 numeric failure, 64 usage.
"""

import os


class TracesatError(Exception):
    exit_code = 1


class InputError(TracesatError):
    """Malformed spec files, forms, or parameters."""
    exit_code = 2


class BudgetExceededError(TracesatError):
    """An enumeration or closure passed its configured cap."""
    exit_code = 3


class NumericError(TracesatError):
    exit_code = 4


class QuadratureUnconvergedError(NumericError):
    """Richardson refinement of an arc integral disagreed beyond tolerance."""


class NoStabilizationError(TracesatError):
    """Saturation-level search exhausted its level cap without stabilizing."""


class VerificationError(TracesatError):
    """An oracle cross-check failed (CLI --verify paths)."""
    exit_code = 1


class NotApplicableError(TracesatError):
    """A closed form was requested outside its hypotheses."""


DEFAULT_BUDGET = 20_000_000


def default_budget() -> int:
    """Element-count cap; TRACE_SAT_BUDGET overrides the built-in default."""
    env = os.environ.get("TRACE_SAT_BUDGET")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise InputError(f"TRACE_SAT_BUDGET is not an integer: {env!r}") from exc
    return DEFAULT_BUDGET


def check_budget(count: int, budget, what: str) -> None:
    cap = default_budget() if budget is None else budget
    if count > cap:
        raise BudgetExceededError(f"{what}: {count} exceeds budget {cap}")
