import dataclasses
import json
import math
from enum import Enum

import numpy as np

from dyadmhd.files import ThreadSafeWriter


class ThreadSafeJsonWriter(ThreadSafeWriter):
    """
    JSON-lines writer. Keys are sorted so that equal records always produce identical lines.
    """

    def write(self, obj):
        self.append(json.dumps(as_json_serializable(obj), sort_keys=True) + "\n")


def as_json_serializable(val, _parents=()):
    """
    Makes sure all entries are json-serializable. Numpy scalars and arrays become Python numbers and lists, enums their values, dataclasses dictionaries and non-finite floats their string representation. Any other entry is converted to its string representation.

    :raises ValueError: if a container holds itself.
    """
    if isinstance(val, (dict, list, tuple)) or (dataclasses.is_dataclass(val) and not isinstance(val, type)):
        if id(val) in _parents:
            raise ValueError(f"Circular reference to a {type(val).__name__}.")
        _parents = _parents + (id(val),)
    if dataclasses.is_dataclass(val) and not isinstance(val, type):
        return {
            _fld.name: as_json_serializable(getattr(val, _fld.name), _parents)
            for _fld in dataclasses.fields(val)
        }
    elif isinstance(val, dict):
        return {str(_key): as_json_serializable(_val, _parents) for _key, _val in val.items()}
    elif isinstance(val, (list, tuple, np.ndarray)):
        return [as_json_serializable(_val, _parents) for _val in val]
    elif isinstance(val, Enum):
        return as_json_serializable(val.value)
    elif isinstance(val, (bool, np.bool_)):
        return bool(val)
    elif isinstance(val, (int, np.integer)):
        return int(val)
    elif isinstance(val, (float, np.floating)):
        return float(val) if math.isfinite(val) else str(float(val))
    elif val is None or isinstance(val, str):
        return val
    else:
        return str(val)
