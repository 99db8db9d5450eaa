from pathlib import Path
from typing import IO, Generic, Optional, Protocol, Type, TypeVar, Union
import logging

from .initializers import RunConfigInitializer

S = TypeVar("S")


class IRunConfig(Protocol):
    @classmethod
    def from_file(cls: Type[S], f: IO) -> S:
        ...  # pragma: no cover


T = TypeVar("T", bound=IRunConfig, covariant=True)

PathLike = Union[Path, str, None]

logger = logging.getLogger(__name__)


class ConfigManager(Generic[T]):
    """
    Owns one run-config file (and its schema) relative to a project root:
    creates it on request and loads it, memoized on the resolved path.
    """

    def __init__(
        self,
        constructor: Type[T],
        path: Union[Path, str],
        initializer: RunConfigInitializer,
        schema_path: PathLike = None,
    ) -> None:
        self.path = Path(path)
        self.initializer = initializer
        self.schema_path = Path(schema_path) if schema_path else None
        self.constructor = constructor

        self._config: Optional[T] = None
        self._path: Optional[Path] = None

    def init(
        self,
        root: PathLike = None,
        template: PathLike = None,
        overwrite: bool = False,
        **kwargs,
    ) -> bool:
        """
        Write the run config relative to `root`

        Parameters
        ----------
        `root`: Path, str, or None, default None
            Directory to write into; the current working directory if None
        `template` : Path, str, or None, default None
            Copy the run config found at the same relative path under `template`
            instead of the default
        `overwrite` : bool, default False
            Replace an existing run config
        `kwargs` : dict
            Passed to the initializer, e.g. `inject_schema=False` or overrides
            for the default factory

        Returns
        -------
        bool : True if a run config was written. The schema is refreshed either way.
        """
        root = Path(root or "")
        path = root / self.path
        schema_path = root / self.schema_path if self.schema_path else None

        initializer = self.initializer
        should_init = True

        if template:
            source = Path(template) / self.path
            if source.exists():
                initializer = self.initializer.with_default(self.initializer.read(source))
            else:
                logger.error(f"No run config found in template at {source}")
                should_init = False

        if should_init and path.exists():
            if overwrite:
                logger.warning(f"Overwriting existing run config at {path}")
            else:
                logger.warning(f"Ignoring existing run config at {path}")
                should_init = False

        if should_init:
            initializer.init(path, schema_path, **kwargs)
        else:
            initializer.update_schema(schema_path)

        return should_init

    def clear_cache(self):
        self._config = None
        self._path = None

    def _load(self, path: Path):
        self._path = path

        if not path.exists():
            self._config = None
        else:
            with path.open("r") as f:
                self._config = self.constructor.from_file(f)

    def config(self, root: PathLike = None) -> Optional[T]:
        """The run config under `root`, or None if there is none"""
        path = (Path(root or "") / self.path).resolve()

        if self._config is None or self._path != path:
            self._load(path)

        return self._config
