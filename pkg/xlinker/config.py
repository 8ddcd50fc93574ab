"""
Line-oriented `key = value` configuration files.

    # link settings
    threshold = 0.1
    use-ppr = yes
"""
import logging
from typing import Any, Dict

from .exceptions import ParseError

logger = logging.getLogger(__name__)

TRUE_WORDS = frozenset(["true", "yes", "on"])
FALSE_WORDS = frozenset(["false", "no", "off"])


def normalize_key(key: str) -> str:
    """`use-ppr`, `USE_PPR` and `Use_Ppr` all name `USE_PPR`."""
    return key.strip().replace("-", "_").upper()


def coerce(value: str) -> Any:
    value = value.strip()
    lowered = value.lower()
    if lowered in TRUE_WORDS:
        return True
    if lowered in FALSE_WORDS:
        return False
    for kind in (int, float):
        try:
            return kind(value)
        except ValueError:
            pass
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    return value


class Config(dict):
    """
    A `dict` of upper-case keys that also answers attribute access, so
    settings are read as `getattr(config, "THRESHOLD", default)`.
    """

    def __init__(self, defaults=None, **kwargs):
        super().__init__()
        self.update(defaults or {}, **kwargs)

    def __getattr__(self, attr):
        try:
            return self[attr]
        except KeyError as ke:
            raise AttributeError("Config has no '{}'".format(ke.args[0]))

    def __setattr__(self, attr, value):
        self[attr] = value

    def __setitem__(self, key, value):
        super().__setitem__(normalize_key(key), value)

    def update(self, *args, **kwargs):
        for key, value in dict(*args, **kwargs).items():
            self[key] = value

    def option_map(self) -> Dict[str, Any]:
        """Keys as click parameter names (`USE_PPR` → `use_ppr`)."""
        return {key.lower(): value for key, value in self.items()}


def load_config(path) -> Config:
    """
    Reads `key = value` lines; `#` starts a comment line, blank lines are
    skipped. Values become bool, int, float or str.

    Raises:
        ParseError: On a line without `=` or with an empty key.
    """
    config = Config()
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise ParseError("expected 'key = value'", line_number)
            config[key] = coerce(value)
    logger.debug("Read %d settings from %s", len(config), path)
    return config
