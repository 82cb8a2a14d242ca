from json import JSONEncoder

import numpy as np


class ReportEncoder(JSONEncoder):
    def default(self, o):
        if hasattr(o, 'as_dict'):
            result = o.as_dict()
            # Recursively process nested objects in the result
            if isinstance(result, dict):
                return {k: self._process_value(v) for k, v in result.items()}
            elif isinstance(result, list):
                return [self._process_value(item) for item in result]
            return result
        if isinstance(o, np.ndarray):
            return [self._process_value(item) for item in o.tolist()]
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, complex):
            return [o.real, o.imag]
        return super().default(o)

    def _process_value(self, value):
        """Recursively process values to handle nested objects"""
        if hasattr(value, 'as_dict') or isinstance(value, (np.ndarray, np.generic, complex)):
            return self.default(value)
        elif isinstance(value, dict):
            return {k: self._process_value(v) for k, v in value.items()}
        elif isinstance(value, (list, tuple)):
            return [self._process_value(item) for item in value]
        return value


CSV_SCHEMA_VERSION = 1


def format_csv_value(value) -> str:
    """Shortest round-trip text for floats so reruns and re-reads are exact"""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)
