import importlib
import os
import yaml
from typing import Any, Dict, Optional, Sequence, Union


def load_config(config_path: str = "src/config/config.yaml") -> Dict[str, Any]:
    """
    Reads a run config. JSON is a subset of YAML, so `.json` files use the same parser.

    Raises:
        FileNotFoundError: If the file does not exist.
        ValueError: If the file is not valid YAML (with the offending line) or is not a mapping.
    """
    if not os.path.exists(config_path):
        raise FileNotFoundError(f"Configuration file not found at {config_path}")
    with open(config_path, "r") as file:
        try:
            config = yaml.safe_load(file)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f"{config_path}:{mark.line + 1}" if mark is not None else config_path
            raise ValueError(f"Error parsing configuration file at {where}: {e}")

    if not isinstance(config, dict) or not config:
        raise ValueError(f"Configuration file at {config_path} is empty or not a mapping.")
    return config


def locate_config_line(config_path: str, loc: Sequence[Union[str, int]]) -> Optional[int]:
    """
    Find the 1-based line of the deepest node reachable along a key path.

    Args:
        config_path (str): The configuration file that was parsed.
        loc (Sequence[Union[str, int]]): Key path, e.g. ("objective", "kind").

    Returns:
        Optional[int]: Line number, or None if the file cannot be re-read.
    """
    try:
        with open(config_path, "r") as file:
            node = yaml.compose(file)
    except (OSError, yaml.YAMLError):
        return None
    if node is None:
        return None

    line = node.start_mark.line + 1
    for key in loc:
        child = None
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                if key_node.value == str(key):
                    child = value_node
                    line = key_node.start_mark.line + 1
                    break
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            child = node.value[key]
            line = child.start_mark.line + 1
        if child is None:
            break
        node = child
    return line


def load_class(module_name: str, class_name: str) -> Any:
    """
    Imports a component class (mesh reader, step rule) by dotted module path and name.

    Raises:
        ImportError: If the module is missing or does not define the class.
    """
    try:
        module = importlib.import_module(module_name)
    except ImportError as e:
        raise ImportError(f"Module '{module_name}' could not be imported: {e}")
    if not hasattr(module, class_name):
        raise ImportError(f"Class '{class_name}' does not exist in module '{module_name}'.")
    return getattr(module, class_name)


def get_instance(config: Dict[str, Any], module_key: str, class_key: str, **kwargs: Any) -> Any:
    """
    Builds the component registered under `config[module_key]`.

    The component block names its class under `class_key` and, optionally, its module
    relative to `src.modules` under `module` (defaults to `module_key`). The class receives
    the whole config, so it can read its own block.

    Args:
        config (Dict[str, Any]): Component configuration, e.g. {"mesh": {"path", "module", "class"}}.
        module_key (str): Component block name ("mesh", "step_rule").
        class_key (str): Key holding the class name inside the block.
        **kwargs (Any): Extra constructor arguments.

    Raises:
        ValueError: If the block or its class name is missing.
        ImportError: If the class cannot be imported.
    """
    block = config.get(module_key)
    if block is None:
        raise ValueError(f"Module key '{module_key}' not found in configuration.")
    class_name: Optional[str] = block.get(class_key)
    if class_name is None:
        raise ValueError(f"Class key '{class_key}' not found in '{module_key}' configuration.")

    module_name = f"src.modules.{block.get('module', module_key)}"
    try:
        component_cls = load_class(module_name, class_name)
    except ImportError as e:
        raise ImportError(f"Error loading class '{class_name}' from module '{module_name}': {e}")
    return component_cls(config=config, **kwargs)
