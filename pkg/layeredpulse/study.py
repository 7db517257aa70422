import itertools, logging, time
from dataclasses import dataclass, field, asdict
from layeredpulse.processors import ProcessFunction, ProcessSchema
from layeredpulse.validation import ExtendedValidator as Validator
from layeredpulse.helpers import _load_schema

logger = logging.getLogger(__name__)


@dataclass
class Check:
    """
    Outcome of a single tolerance check within a study.
    """
    name: str
    value: float
    bound: float
    passed: bool
    detail: str = ''

    @classmethod
    def at_most(cls, name, value, bound, detail=''):
        return cls(name, float(value), float(bound), bool(value <= bound), detail)

    @classmethod
    def within(cls, name, value, target, tolerance, detail=''):
        return cls(
            name, float(value), float(tolerance),
            bool(abs(value - target) <= tolerance),
            detail or f'target {target:.6g}'
        )


@dataclass
class Artifact:
    """
    Output file of a study: a `pandas.DataFrame` is written as CSV, any
    other object as JSON.
    """
    name: str
    data: object


@dataclass
class CheckReport:
    """
    Collection of tolerance checks gathered from the `check`-tagged
    processors of a study.
    """
    study: str
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    @property
    def failures(self):
        return [check for check in self.checks if not check.passed]

    def to_dict(self):
        return {
            'study': self.study,
            'passed': self.passed,
            'checks': [asdict(check) for check in self.checks],
        }


def _union(items, attr):
    collected = set()
    for item in items:
        collected.update(getattr(item, attr))
    return sorted(collected)


class Study(object):
    """
    Layered pipeline used to assemble every numerical study of the package.
    Layers are created with `add_layer()` and run in order by `analyze()`;
    the processors of each layer also run in order.

    Each processor receives the arguments it names from the study inputs
    and the outputs of all earlier layers, so a processor can take an
    earlier processor's label as an argument. Outputs of processors sharing
    a tag are also available together as a `dict` under `__{tag}`, which is
    how the acceptance checks of a study are gathered.

    Processors are either a `ProcessFunction` (one callable, one output) or
    a `ProcessSchema` (a JSON lookup table such as the scenario presets).

    Parameters
    ----------
    label : str, optional
        Name of the study, used in reports and logs.
    """

    def __init__(self, label=None):
        self.label = label
        self._layers = []
        self._validator = None

    def __repr__(self):
        return f"Study({self.label!r}, layers={[layer.label for layer in self._layers]})"

    @property
    def layers(self):
        return self._layers

    @property
    def processors(self):
        """
        Processors of each layer, as a list of lists.
        """
        return [layer.processors for layer in self._layers]

    def _all_processors(self):
        return list(itertools.chain.from_iterable(self.processors))

    @property
    def returns(self):
        return _union(self._layers, 'returns')

    @property
    def tags(self):
        return _union(self._all_processors(), 'tags')

    @property
    def tagged(self):
        """
        Processors carrying each tag.
        """
        processors = self._all_processors()
        return {tag: [p for p in processors if tag in p.tags] for tag in self.tags}

    @property
    def parameters(self):
        """
        Arguments named by any processor and produced by none of them, i.e.
        the study inputs.
        """
        produced = set(self.returns) | {f'__{tag}' for tag in self.tags}
        return [p for p in _union(self._layers, 'parameters') if p not in produced]

    @property
    def required(self):
        """
        Study inputs without a default value in any processor.
        """
        optional = set(_union(self._layers, 'optional'))
        return [p for p in self.parameters if p not in optional]

    @property
    def structure(self):
        return {
            layer.label: [p.label for p in layer.processors] for layer in self._layers
        }

    def add_validation(self, schema, require_all=False, allow_unknown=True, **kwargs):
        """
        Attach a `cerberus` schema checked against the inputs of `analyze()`.
        Extra keyword arguments go to the validator.

        Parameters
        ----------
        schema : dict, str, or path
        require_all : bool, default False
            Whether every field of the schema must be present.
        allow_unknown : bool, default True
            Whether inputs missing from the schema are accepted.
        """
        self._validator = Validator(
            _load_schema(schema), require_all=require_all,
            allow_unknown=allow_unknown, **kwargs)

    def validate(self, expand_dict=False, **params) -> dict:
        """
        Validation errors of the inputs keyed by field, empty when valid or
        when no schema is attached. With `expand_dict`, every input appears
        with an empty list when it passed.
        """
        if self._validator is None:
            return {}
        self._validator.validate(params)
        errors = self._validator.errors
        if expand_dict:
            return {key: errors.get(key, []) for key in params}
        return errors

    def analyze(self, **params):
        """
        Run every layer on the keyword inputs and return the `dict` of inputs
        and processor outputs. See `required` for the inputs to provide.

        Raises
        ------
        ValueError
            If the inputs fail the attached validation schema.
        KeyError
            If a required input is missing.
        """
        errors = self.validate(**params)
        if errors:
            raise ValueError(f"Study {self.label!r} inputs failed validation: {errors}")
        missing = [p for p in self.required if p not in params]
        if missing:
            raise KeyError(f"Missing required study parameters: {missing}")

        tag_returns = {
            f'__{tag}': list(itertools.chain.from_iterable(p.returns for p in ps))
            for tag, ps in self.tagged.items()
        }
        logger.info("Running study %s", self.label)
        start = time.perf_counter()
        available = dict(params)
        for layer in self._layers:
            logger.debug("Layer %s", layer.label)
            # Outputs become visible to the next layer only
            produced = {}
            for processor in layer.processors:
                kwargs = {}
                for name in processor.parameters:
                    if name in tag_returns:
                        kwargs[name] = {
                            key: available[key] for key in tag_returns[name]
                            if key in available
                        }
                    elif name in available:
                        kwargs[name] = available[name]
                produced.update(processor.analyze(**kwargs))
            available.update(produced)
        logger.info("Study %s finished in %.2f s", self.label, time.perf_counter() - start)
        return available

    def add_layer(self, label=None, **kwargs):
        """
        Append a new `ProcessLayer`, which receives later processors.
        """
        layer = ProcessLayer(label=label or f'Layer #{len(self._layers) + 1}', **kwargs)
        self._layers.append(layer)
        return layer

    def _select_layer(self, layer_index):
        if not self._layers:
            self.add_layer()
        if layer_index is None:
            return self._layers[-1]
        try:
            return self._layers[layer_index]
        except IndexError:
            raise IndexError(
                f"Study has {len(self._layers)} layers, unable to select "
                f"layer index {layer_index}.")

    def add_function(self, obj, tags=None, layer_index=None, **kwargs):
        """
        Add a `ProcessFunction` built from `obj` to the selected layer, the
        latest one by default.
        """
        return self._select_layer(layer_index).add_function(obj, tags=tags, **kwargs)

    def add_schema(self, schema, tags=None, layer_index=None, **kwargs):
        return self._select_layer(layer_index).add_schema(schema, tags=tags, **kwargs)

    def add_wrapped(self, tags=None, layer_index=None, **kwargs):
        """
        Decorator form of `add_function`; the decorated function is returned
        unchanged.
        """
        def decorator(obj):
            self.add_function(obj, tags=tags, layer_index=layer_index, **kwargs)
            return obj
        return decorator

    def _gather(self, results, tag, kind):
        found = []
        for processor in self.tagged.get(tag, []):
            for key in processor.returns:
                value = results.get(key)
                values = value if isinstance(value, (list, tuple)) else [value]
                found.extend(v for v in values if isinstance(v, kind))
        return found

    def report(self, results, tag='check'):
        """
        Collect the `Check` outputs of processors tagged `tag` from an
        `analyze()` result into a `CheckReport`.
        """
        report = CheckReport(study=self.label, checks=self._gather(results, tag, Check))
        for check in report.checks:
            logger.info("Check %s: value=%.6g bound=%.6g %s", check.name,
                        check.value, check.bound, 'ok' if check.passed else 'FAILED')
        return report

    def artifacts(self, results, tag='artifact'):
        return self._gather(results, tag, Artifact)


class ProcessLayer(object):
    """
    Ordered group of processors run within one step of a `Study`.
    """

    def __init__(self, label=None, **kwargs):
        self.label = label
        self._processors = []

    @property
    def processors(self):
        return self._processors

    @property
    def parameters(self):
        return _union(self._processors, 'parameters')

    @property
    def optional(self):
        return _union(self._processors, 'optional')

    @property
    def returns(self):
        return _union(self._processors, 'returns')

    def add_function(self, obj, **kwargs):
        """
        Add a `ProcessFunction`, either given directly or built from a
        callable.
        """
        pf = obj if isinstance(obj, ProcessFunction) else ProcessFunction(obj, **kwargs)
        self._processors.append(pf)
        return pf

    def add_schema(self, schema, **kwargs):
        """
        Add a `ProcessSchema`, either given directly or built from a schema
        `dict` or JSON path.
        """
        ps = schema if isinstance(schema, ProcessSchema) else ProcessSchema(schema, **kwargs)
        self._processors.append(ps)
        return ps
