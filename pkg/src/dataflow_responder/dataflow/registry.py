"""Registry of executable domain functions."""

import logging
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass
from datetime import datetime
from typing import Any

from dataflow_responder.dataflow.values import matches_tag, value_tag
from dataflow_responder.errors import ExecutionError, GraphTypeError, UnknownFunctionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExecutionContext:
    """Ambient inputs to domain functions."""

    now: datetime


@dataclass(frozen=True)
class Param:
    """One function parameter."""

    name: str
    tag: str = "Any"
    variadic: bool = False

    @classmethod
    def parse(cls, spec: str) -> "Param":
        """Parse ``name:Tag`` or ``*name:Tag`` shorthand.

        Args:
            spec: Parameter shorthand.

        Returns:
            The parameter.
        """
        variadic = spec.startswith("*")
        name, _, tag = spec.lstrip("*").partition(":")
        return cls(name=name, tag=tag or "Any", variadic=variadic)


@dataclass(frozen=True)
class FunctionSpec:
    """Signature and implementation of one domain function."""

    name: str
    params: tuple[Param, ...]
    returns: str
    impl: Callable[..., Any]

    def accepts_arity(self, count: int) -> bool:
        """Return whether ``count`` arguments fit the signature."""
        fixed = sum(1 for p in self.params if not p.variadic)
        if any(p.variadic for p in self.params):
            return count >= fixed
        return count == fixed

    def bind(self, values: Sequence[Any], names: Sequence[str | None]) -> list[Any]:
        """Order argument values by parameter position.

        Args:
            values: Argument values in call order.
            names: Parameter names aligned with ``values`` (None for positional).

        Returns:
            Positional argument values, checked against parameter tags.

        Raises:
            GraphTypeError: On unknown names, arity or tag mismatches.
        """
        padded = list(names) + [None] * (len(values) - len(names))
        positional: list[Any] = []
        named: dict[str, Any] = {}
        for value, name in zip(values, padded, strict=True):
            if name is None:
                if named:
                    raise GraphTypeError(f"{self.name}: positional argument after named")
                positional.append(value)
            elif name in named:
                raise GraphTypeError(f"{self.name}: argument '{name}' given twice")
            else:
                named[name] = value

        bound: list[Any] = []
        for param in self.params:
            if param.variadic:
                for item in positional:
                    self._check(param, item)
                bound.extend(positional)
                positional = []
                continue
            if positional:
                value = positional.pop(0)
            elif param.name in named:
                value = named.pop(param.name)
            else:
                raise GraphTypeError(f"{self.name}: missing argument '{param.name}'")
            self._check(param, value)
            bound.append(value)
        if positional:
            raise GraphTypeError(
                f"{self.name}: expected {len(self.params)} arguments, got {len(values)}"
            )
        if named:
            raise GraphTypeError(f"{self.name}: unknown parameter(s) {sorted(named)}")
        return bound

    def _check(self, param: Param, value: Any) -> None:
        if not matches_tag(value, param.tag):
            raise GraphTypeError(
                f"{self.name}: parameter '{param.name}' expects {param.tag}, "
                f"got {value_tag(value)}"
            )


class FunctionRegistry:
    """Name-indexed collection of domain functions.

    Functions are added with :meth:`register` while the registry is being built;
    afterwards the registry is only read, so it can be shared across threads.
    """

    def __init__(self) -> None:
        """Initialize an empty registry."""
        self._specs: dict[str, FunctionSpec] = {}

    def register(
        self, name: str, *params: str, returns: str = "Any"
    ) -> Callable[[Callable[..., Any]], Callable[..., Any]]:
        """Decorator registering ``impl(ctx, *args)`` under ``name``.

        Args:
            name: Function name used in graphs and rules.
            *params: Parameter shorthands such as ``"date:Date"``.
            returns: Result tag checked after every call.

        Returns:
            Decorator that records the implementation and returns it unchanged.
        """

        def decorator(impl: Callable[..., Any]) -> Callable[..., Any]:
            if name in self._specs:
                raise ValueError(f"function '{name}' registered twice")
            self._specs[name] = FunctionSpec(
                name=name,
                params=tuple(Param.parse(p) for p in params),
                returns=returns,
                impl=impl,
            )
            return impl

        return decorator

    def get(self, name: str) -> FunctionSpec:
        """Look up a function.

        Args:
            name: Function name.

        Returns:
            The function spec.

        Raises:
            UnknownFunctionError: If no function has this name.
        """
        try:
            return self._specs[name]
        except KeyError:
            raise UnknownFunctionError(f"unknown function '{name}'") from None

    def __contains__(self, name: object) -> bool:
        return name in self._specs

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._specs))

    def call(
        self,
        name: str,
        ctx: ExecutionContext,
        values: Sequence[Any],
        names: Sequence[str | None] = (),
    ) -> Any:
        """Invoke a function with type checking on arguments and result.

        Args:
            name: Function name.
            ctx: Execution context.
            values: Argument values.
            names: Optional parameter names aligned with ``values``.

        Returns:
            The function result.

        Raises:
            GraphTypeError: On signature violations.
            ExecutionError: When the implementation fails.
        """
        spec = self.get(name)
        args = spec.bind(values, names)
        try:
            result = spec.impl(ctx, *args)
        except (ExecutionError, UnknownFunctionError):
            raise
        except (ValueError, TypeError, KeyError, IndexError) as exc:
            raise ExecutionError(f"{name}: {exc}") from exc
        if spec.returns != "Any" and not matches_tag(result, spec.returns):
            raise GraphTypeError(f"{name}: returned {value_tag(result)}, declared {spec.returns}")
        logger.debug("called %s -> %s", name, value_tag(result))
        return result
