import inspect, logging, operator, time
from layeredpulse.helpers import _load_schema

logger = logging.getLogger(__name__)

_TESTERS = {
    'lt': operator.lt,
    'gt': operator.gt,
    'lte': operator.le,
    'gte': operator.ge,
    'eq': operator.eq,
}
ACTIONS = ['get'] + list(_TESTERS)
_REQUIRED_KEYS = ('label', 'parameters', 'actions', 'data')


class ProcessorBase(object):
    """
    Shared label and tag handling of study processors. Subclasses define
    `parameters`, `returns` and `analyze`; calling a processor analyzes it.
    """

    def __call__(self, **kwargs):
        return self.analyze(**kwargs)

    @property
    def __name__(self):
        return self.label

    @property
    def tags(self):
        return self._tags

    @tags.setter
    def tags(self, tags):
        self._tags = [] if tags is None else list(tags)

    @property
    def optional(self):
        return []

    def __repr__(self):
        return f"{type(self).__name__}({self.label!r}, tags={self.tags})"


class ProcessFunction(ProcessorBase):
    """
    This class is built around a single callable which takes a number of
    named parameters and performs a single study task. Its output is stored
    under the processor label, which is how later layers refer to it.
    Numerical stages of a study (building a spectral grid, integrating an
    ensemble, fitting a slope) are registered this way.

    Parameters
    ----------
    obj : callable
        Callable whose argument names are the processor parameters.
    label : str, optional
        Label of the output. Defaults to the name of the callable.
    tags : list, optional
        Tags shared between processors, allowing their outputs to be
        referenced collectively as `__{tag}`.
    """

    def __init__(self, obj, label=None, tags=None):
        if not callable(obj):
            raise ValueError(
                f"Input `obj` must be callable, got {type(obj).__name__}.")
        self.func = obj
        self._signature = inspect.signature(obj)
        self.label = obj.__name__ if label is None else label
        self.tags = tags

    @property
    def parameters(self):
        return list(self._signature.parameters)

    @property
    def optional(self):
        return [
            name for name, p in self._signature.parameters.items()
            if p.default is not inspect.Parameter.empty
        ]

    @property
    def returns(self):
        return [self.label]

    def analyze(self, **kwargs):
        start = time.perf_counter()
        result = self.func(**kwargs)
        logger.debug("Processor %s finished in %.3f s",
                     self.label, time.perf_counter() - start)
        return {self.label: result}


class ProcessSchema(ProcessorBase):
    """
    This class is built around a schema `dict` or `JSON` file holding a
    nested lookup table. Each level is traversed with one parameter and one
    action: `get` indexes the level by the parameter value, while the
    comparison actions (`lt`, `gt`, `lte`, `gte`, `eq`) test the value
    against the numeric keys in order and descend into the first match. The
    final level is either a single value or a `dict` of outputs. Scenario
    presets and the regime table of the package are stored this way.

    Schema Structure
    ----------------
    doc = {
        "label": "regime",
        "parameters": ["gamma"],
        "actions": ["lt"],
        "data": {
            "1": {"regime": "long_range"},
            "inf": {"regime": "short_range"}
        }
    }

    ```
    >>> ProcessSchema(doc).analyze(gamma=0.5)
    {'regime': 'long_range'}
    ```

    Parameters
    ----------
    schema : dict, str, or path
        Schema data as a `dict`, a path to a JSON file, or a file name
        within the package `schemas` directory.
    label : str, optional
        Label of a single-valued output. Defaults to the schema `label`.
    tags : list, optional
    """

    def __init__(self, schema, label=None, tags=None):
        doc = _load_schema(schema)
        missing = [key for key in _REQUIRED_KEYS if key not in doc]
        if missing:
            raise KeyError(f"Input schema is missing the required {missing} information.")
        if len(doc['actions']) != len(doc['parameters']):
            raise ValueError(
                f"Schema {doc['label']!r} lists {len(doc['actions'])} actions for "
                f"{len(doc['parameters'])} parameters; they must match.")
        unknown = [a for a in doc['actions'] if a not in ACTIONS]
        if unknown:
            raise ValueError(f"Unknown schema actions {unknown}; options are {ACTIONS}.")
        self.schema = doc
        self.label = doc['label'] if label is None else label
        self.tags = tags

    @property
    def parameters(self):
        return self.schema['parameters']

    @property
    def actions(self):
        return self.schema['actions']

    @property
    def data(self):
        return self.schema['data']

    @property
    def keys(self):
        """
        Keys of the first level of the lookup table.
        """
        return list(self.data)

    @property
    def returns(self):
        # Output keys of the first leaf
        leaf = self.data
        for _ in self.parameters:
            leaf = next(iter(leaf.values()))
        return list(leaf) if isinstance(leaf, dict) else [self.label]

    def _descend(self, level, parameter, action, value):
        if action == 'get':
            try:
                return level[value]
            except (KeyError, TypeError):
                raise ValueError(
                    f"No `{parameter}` entry {value!r} in schema {self.schema['label']!r}; "
                    f"options are {list(level)}.")
        tester = _TESTERS[action]
        for key, child in level.items():
            if tester(value, float(key)):
                return child
        raise ValueError(
            f"Value {value!r} of `{parameter}` fails every `{action}` threshold "
            f"of schema {self.schema['label']!r}.")

    def analyze(self, **params):
        level = self.data
        for parameter, action in zip(self.parameters, self.actions):
            if parameter not in params:
                raise KeyError(f"Missing required `ProcessSchema` parameter `{parameter}`.")
            level = self._descend(level, parameter, action, params[parameter])
        if isinstance(level, dict):
            return dict(level)
        return {self.label: level}
