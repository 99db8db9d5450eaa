import json
import logging
from pathlib import Path
from typing import Callable, Optional

from .types import MaybeCallable, TSchema
from .utils import get_relative, make_callable

logger = logging.getLogger(__name__)


class RunConfigInitializer:
    """
    Writes a default JSON run config and the schema it is checked against.

    Parameters
    ----------
    `default` : dict or function that returns dict
        The default run config, or a factory for it. The factory may take
        keyword overrides, e.g. `seed=7`.
    `schema` : None, dict, or function that returns dict, default None
        The run-config schema, or a function to get it. If None, no schema is
        written and no reference is injected.
    `schema_property` : str, default "$schema"
        The key holding the relative schema path inside the config.
    """

    def __init__(
        self,
        default: MaybeCallable[dict],
        schema: TSchema = None,
        schema_property: str = "$schema",
    ) -> None:
        self._get_schema: Callable[[], Optional[dict]] = make_callable(schema)
        self._default: Callable[..., Optional[dict]] = make_callable(default)
        self.schema_property = schema_property

    @property
    def schema(self) -> Optional[dict]:
        return self._get_schema()

    def with_default(self, default: dict) -> "RunConfigInitializer":
        """A copy that writes `default` instead, keeping the schema"""
        return self.__class__(default, self._get_schema, self.schema_property)

    def inject_schema_path(self, config: dict, schema_path: Path) -> dict:
        return {self.schema_property: str(schema_path), **self.strip_schema_path(config)}

    def strip_schema_path(self, config: dict) -> dict:
        return {k: v for k, v in config.items() if k != self.schema_property}

    def write(self, config: dict, path: Path):
        with path.open("w") as f:
            json.dump(config, f, indent=2)
            f.write("\n")

    def read(self, path: Path) -> dict:
        with path.open("r") as f:
            return json.load(f)

    def init(
        self,
        path: Path,
        schema_path: Optional[Path] = None,
        inject_schema: bool = True,
        **kwargs,
    ):
        """
        Write the default run config to `path`, and the schema to `schema_path`.

        With `inject_schema`, a schema path and a schema, the config gets a
        reference to the schema relative to its own directory; otherwise any
        reference in the default is removed.
        """
        default = self._default(**kwargs)

        self.update_schema(schema_path)

        if default is None:
            return

        if inject_schema and schema_path is not None and self.schema is not None:
            default = self.inject_schema_path(default, get_relative(path, schema_path))
        else:
            default = self.strip_schema_path(default)

        path.parent.mkdir(parents=True, exist_ok=True)
        self.write(default, path)
        logger.debug(f"wrote run config to {path}")

    def update_schema(self, schema_path: Optional[Path] = None):
        """Overwrite the schema file with the current run-config schema"""
        if schema_path is None:
            return

        schema = self.schema
        if schema is None:
            return

        schema_path.parent.mkdir(parents=True, exist_ok=True)
        with schema_path.open("w") as f:
            json.dump(schema, f, indent=2)

    def check_schema(self, schema_path: Path) -> bool:
        """True if the schema file on disk has the current schema's $id"""
        schema = self.schema
        if schema is None:
            return True

        if schema_path.exists():
            with schema_path.open() as f:
                local = json.load(f)
        else:
            local = {}

        return local.get("$id") == schema.get("$id")
