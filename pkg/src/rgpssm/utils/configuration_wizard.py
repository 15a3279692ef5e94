# SPDX-License-Identifier: Apache-2.0
"""Utilities for declaring and loading experiment configuration.

Configuration classes are frozen dataclasses built on the JSON and YAML wizards of the
`dataclass-wizard` package. On top of those this module adds:

1. configfield: declare a field with a camelCase key, help text and environment binding.
2. ConfigWizard.print_help: document every key, default, type and environment variable.
3. ConfigWizard.envvars: enumerate the environment variables a config class reads.
4. ConfigWizard.from_dict / from_file: build a config from a mapping or a file, applying
   environment overrides. `to_dict` writes the same camelCase keys back.
5. read_config_text: parse JSON, YAML or flat `key = value` text.
"""

import copy
import json
import logging
import os
import re
from dataclasses import _MISSING_TYPE
from dataclasses import dataclass
from typing import Any
from typing import Callable
from typing import Dict
from typing import List
from typing import Optional
from typing import TextIO
from typing import Tuple

import yaml
from dataclass_wizard import JSONWizard
from dataclass_wizard import LoadMeta
from dataclass_wizard import YAMLWizard
from dataclass_wizard import errors
from dataclass_wizard import fromdict
from dataclass_wizard import json_field
from dataclass_wizard.models import JSONField
from dataclass_wizard.utils.string_conv import to_camel_case

from rgpssm.utils.errors import ConfigurationError

configclass = dataclass(frozen=True)
ENV_BASE = "RGPSSM"
_LOGGER = logging.getLogger(__name__)
_FLAT_LINE = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*[=:]\s*(.*?)\s*$")


def configfield(name: str, *, env: bool = True, env_name: Optional[str] = None, help_txt: str = "", **kwargs: Any) -> JSONField:
    """Create a data class field whose serialized key is the camelCase form of `name`.

    :param name: The snake_case name of the field.
    :type name: str
    :param env: Whether this field can be set from an environment variable.
    :type env: bool
    :param env_name: Custom environment variable name replacing the generated one.
    :type env_name: Optional[str]
    :param help_txt: Description printed by `print_help`.
    :type help_txt: str
    :param kwargs: Forwarded to `dataclass_wizard.json_field` (default, default_factory, ...).
    :returns: A JSONField carrying the env and help metadata.
    :rtype: JSONField

    :raises TypeError: If the provided name is not a string.
    """
    if not isinstance(name, str):
        raise TypeError("Provided name must be a string.")

    meta = kwargs.get("metadata", {})
    meta["env"] = env
    meta["env_name"] = env_name
    meta["help"] = help_txt
    kwargs["metadata"] = meta
    # dump under the same key, not the YAML mixin's kebab-case default
    kwargs.setdefault("all", True)
    return json_field(to_camel_case(name), **kwargs)


def _field_default(val: Any) -> Any:
    if not isinstance(val.default_factory, _MISSING_TYPE):
        return val.default_factory()
    if isinstance(val.default, _MISSING_TYPE):
        return "NO-DEFAULT-VALUE"
    return val.default


class ConfigWizard(JSONWizard, YAMLWizard):  # type: ignore[misc] # dataclass-wizard doesn't provide stubs
    """A configuration class readable from JSON, YAML, flat key/value text and environment variables."""

    # pylint: disable=arguments-differ,arguments-renamed; this class intentionally reduces arguments for some methods.

    @classmethod
    def _walk(cls, env_parent: str, json_parent: Tuple[str, ...]):
        for val in cls.__dataclass_fields__.values():  # pylint: disable=no-member; member is added by dataclass.
            jsonname = val.json.keys[0]
            custom_env_name = val.metadata.get("env_name")
            full_envname = custom_env_name or f"{ENV_BASE}{env_parent}_{jsonname.upper()}"
            yield val, jsonname, full_envname, hasattr(val.type, "envvars")

    @classmethod
    def print_help(
        cls,
        help_printer: Callable[[str], Any],
        *,
        env_parent: Optional[str] = None,
        json_parent: Optional[Tuple[str, ...]] = None,
    ) -> None:
        """Print the documentation of every configuration key with the provided `write` function.

        :param help_printer: The `write` function used to output the text.
        :type help_printer: Callable[[str], Any]
        :param env_parent: Parent environment variable prefix. Leave blank, used for recursion.
        :type env_parent: Optional[str]
        :param json_parent: Parent key path. Leave blank, used for recursion.
        :type json_parent: Optional[Tuple[str, ...]]
        """
        if not env_parent:
            env_parent = ""
            help_printer("---\n")
        json_parent = json_parent or ()

        for val, jsonname, full_envname, is_embedded_config in cls._walk(env_parent, json_parent):
            indent = len(json_parent) * 2
            default = "" if is_embedded_config else _field_default(val)
            help_printer(f"{' ' * indent}{jsonname}: {default}\n")

            if is_embedded_config:
                indent += 2
            if val.metadata.get("help"):
                help_printer(f"{' ' * indent}# {val.metadata['help']}\n")
            if not is_embedded_config:
                typestr = getattr(val.type, "__name__", None) or str(val.type).replace("typing.", "")
                help_printer(f"{' ' * indent}# Type: {typestr}\n")
                if val.metadata.get("env", True):
                    help_printer(f"{' ' * indent}# ENV Variable: {full_envname}\n")
            help_printer("\n")

            if is_embedded_config:
                val.type.print_help(
                    help_printer,
                    env_parent=f"{env_parent}_{jsonname.upper()}",
                    json_parent=json_parent + (jsonname, ),
                )

    @classmethod
    def envvars(
        cls,
        env_parent: Optional[str] = None,
        json_parent: Optional[Tuple[str, ...]] = None,
    ) -> List[Tuple[str, Tuple[str, ...], type]]:
        """Calculate the environment variables read by this class and where they land.

        :param env_parent: Parent environment variable prefix.
        :type env_parent: Optional[str]
        :param json_parent: Parent key path.
        :type json_parent: Optional[Tuple[str, ...]]
        :returns: One (variable name, key path, field type) tuple per configurable value.
        :rtype: List[Tuple[str, Tuple[str, ...], type]]
        """
        env_parent = env_parent or ""
        json_parent = json_parent or ()
        output = []
        for val, jsonname, full_envname, is_embedded_config in cls._walk(env_parent, json_parent):
            if is_embedded_config:
                output += val.type.envvars(
                    env_parent=f"{env_parent}_{jsonname.upper()}",
                    json_parent=json_parent + (jsonname, ),
                )
            elif val.metadata.get("env", True):
                output.append((full_envname, json_parent + (jsonname, ), val.type))
        return output

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]], overrides: Optional[Dict[str, Any]] = None) -> "ConfigWizard":
        """Create an instance from a mapping; environment variables override it and `overrides` win last.

        :param data: Nested mapping keyed by camelCase field names.
        :type data: Optional[Dict[str, Any]]
        :param overrides: Nested mapping applied after the environment (command-line flags).
        :type overrides: Optional[Dict[str, Any]]
        :returns: The resolved configuration.
        :rtype: ConfigWizard

        :raises ConfigurationError: If the data is not a mapping or fails to parse.
        """
        if data is not None and not isinstance(data, dict):
            raise ConfigurationError("Configuration data is not a dictionary.")
        data = copy.deepcopy(data or {})

        for var_name, conf_path, var_type in cls.envvars():
            var_value = os.environ.get(var_name)
            if var_value:
                var_value = try_json_load(var_value)
                update_dict(data, conf_path, var_value, overwrite=True)
                _LOGGER.debug("Found EnvVar Config - %s:%s = %s", var_name, str(var_type), repr(var_value))
        for conf_path, value in flatten_dict(overrides or {}).items():
            update_dict(data, tuple(conf_path.split(".")), value, overwrite=True)

        LoadMeta(key_transform="CAMEL").bind_to(cls)
        try:
            return fromdict(cls, data)  # type: ignore[no-any-return] # dataclass-wizard doesn't provide stubs
        except (errors.MissingFields, errors.ParseError) as err:
            raise ConfigurationError(f"Invalid configuration: {err}") from err

    @classmethod
    def from_file(cls, filepath: str, overrides: Optional[Dict[str, Any]] = None) -> "ConfigWizard":
        """Load the configuration from a JSON, YAML or flat key/value file.

        :param filepath: Path of the configuration file.
        :type filepath: str
        :param overrides: Nested mapping applied after file and environment.
        :type overrides: Optional[Dict[str, Any]]
        :returns: The fully processed configuration.
        :rtype: ConfigWizard

        :raises ConfigurationError: If the file cannot be read or parsed.
        """
        try:
            with open(filepath, encoding="utf-8") as file:
                data = read_config_text(file)
        except FileNotFoundError as err:
            raise ConfigurationError(f"The configuration file {filepath} cannot be found.") from err
        except PermissionError as err:
            raise ConfigurationError(f"Permission denied when reading {filepath}.") from err
        except ValueError as err:
            raise ConfigurationError(f"Configuration file must be JSON, YAML or key = value text:\n{err}") from err
        return cls.from_dict(data, overrides)


def read_config_text(stream: TextIO) -> Dict[str, Any]:
    """Read a configuration stream without knowing its format.

    JSON is tried first, then YAML, then flat `key = value` lines where dotted keys address
    nested sections. The YAML attempt only counts if it produces a mapping, so a flat file
    such as `seed = 3` falls through to the flat parser.

    :param stream: A seekable text stream.
    :type stream: typing.TextIO
    :returns: The parsed nested mapping.
    :rtype: typing.Dict[str, typing.Any]
    :raises ValueError: If the stream is not seekable or no parser accepts it.
    """
    if not stream.seekable():
        raise ValueError("The provided stream must be seekable.")
    text = stream.read()
    if not text.strip():
        return {}
    failures: Dict[str, str] = {}

    try:
        data = json.loads(text)
    except ValueError as err:
        failures["JSON"] = str(err)
    else:
        if isinstance(data, dict):
            return data
        failures["JSON"] = "top level is not an object"

    try:
        data = yaml.safe_load(text)
    except yaml.error.YAMLError as err:
        failures["YAML"] = str(err)
    else:
        if isinstance(data, dict):
            return data
        failures["YAML"] = "top level is not a mapping"

    try:
        return parse_flat_text(text)
    except ValueError as err:
        failures["Flat"] = str(err)

    raise ValueError("\n\n".join(f"{key} Parser Errors:\n{val}" for key, val in failures.items()))


def parse_flat_text(text: str) -> Dict[str, Any]:
    """Parse `key = value` lines into a nested mapping.

    Keys may be snake_case or camelCase; they are normalised to camelCase per segment.
    Values are JSON-decoded when possible (numbers, booleans, lists), otherwise kept as strings.
    """
    data: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _FLAT_LINE.match(line)
        if not match:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        path = tuple(to_camel_case(part) for part in match.group(1).split("."))
        update_dict(data, path, try_json_load(match.group(2)), overwrite=True)
    return data


def try_json_load(value: str) -> Any:
    """Try parsing the value as JSON and silently ignore errors."""
    try:
        return json.loads(value)
    except (json.JSONDecodeError, TypeError):
        return value


def update_dict(
    data: Dict[str, Any],
    path: Tuple[str, ...],
    value: Any,
    overwrite: bool = False,
) -> None:
    """Set `value` at the nested `path`, creating intermediate mappings.

    :param data: The dictionary to be updated.
    :param path: The key path.
    :param value: The new value.
    :param overwrite: Replace an existing value. Otherwise only fill missing keys.
    """
    target = data
    for key in path[:-1]:
        if not isinstance(target.get(key), dict):
            target[key] = {}
        target = target[key]
    if overwrite or path[-1] not in target:
        target[path[-1]] = value


def flatten_dict(data: Dict[str, Any], parent: str = "") -> Dict[str, Any]:
    """Flatten nested mappings into dotted keys."""
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        name = f"{parent}.{key}" if parent else key
        if isinstance(value, dict):
            flat.update(flatten_dict(value, name))
        else:
            flat[name] = value
    return flat
