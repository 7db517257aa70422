import configparser, json, os

SCHEMA_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'schemas')


def _parse_value(text):
    """
    Parse a single INI value using JSON semantics where possible, falling
    back to the raw string.
    """
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    # Allow Python-style literals commonly typed by hand
    lowered = text.lower()
    if lowered in ('true', 'yes', 'on'):
        return True
    elif lowered in ('false', 'no', 'off'):
        return False
    elif lowered in ('none', 'null', ''):
        return None
    return text


def _load_ini(path):
    """
    Load a `key = value` sectioned text file into a nested `dict`. Keys in
    the `[run]` section are placed at the top level.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    with open(path) as f:
        parser.read_file(f)
    doc = {}
    for section in parser.sections():
        values = {key: _parse_value(val) for key, val in parser.items(section)}
        if section == 'run':
            doc.update(values)
        else:
            doc[section] = values
    return doc


def _load_schema(obj, search_paths=[SCHEMA_PATH]):
    """
    Helper function for loading dict/JSON/INI document data from a provided
    object and potential search paths.
    """
    # If dictionary, return
    if isinstance(obj, dict):
        return obj

    # If string, try to load JSON or INI file
    elif isinstance(obj, (str, os.PathLike)):
        obj = os.fspath(obj)
        # Define possible search paths
        paths = [obj]
        paths.extend([os.path.join(path, obj) for path in search_paths])
        # Try to load file
        for path in paths:
            if os.path.isfile(path):
                try:
                    if path.lower().endswith(('.ini', '.cfg', '.conf')):
                        return _load_ini(path)
                    with open(path) as f:
                        return json.load(f)
                except (json.JSONDecodeError, configparser.Error) as e:
                    raise ValueError(
                        f"Unable to parse document file at provided path "
                        f"({path}): {e}"
                    ) from e
        # Allow JSON-structured strings
        try:
            doc = json.loads(obj)
        except json.JSONDecodeError:
            doc = None
        if isinstance(doc, dict):
            return doc
        raise ValueError(
            f"Unable to load JSON or INI document at provided path "
            f"({obj})"
        )
    else:
        raise TypeError(
            "Input document must be a `dict`, a path to a valid JSON or INI "
            "file, or a loadable JSON-structured `str`."
        )


def _flatten(doc, prefix=''):
    """
    Flatten a nested `dict` into dotted keys.
    """
    flat = {}
    for key, val in doc.items():
        name = f'{prefix}{key}'
        if isinstance(val, dict):
            flat.update(_flatten(val, prefix=f'{name}.'))
        else:
            flat[name] = val
    return flat


def _set_dotted(doc, key, value):
    """
    Set a dotted key such as `medium.alpha` inside a nested `dict`.
    """
    parts = key.split('.')
    target = doc
    for part in parts[:-1]:
        target = target.setdefault(part, {})
        if not isinstance(target, dict):
            raise ValueError(f"Cannot set `{key}`, `{part}` is not a section.")
    target[parts[-1]] = value
    return doc
