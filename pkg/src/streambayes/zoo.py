"""Predefined latent-variable templates and a builder for custom ones.

Every template is a pure function of the data attributes and its knobs and
returns an untrained learner.  Latent names follow the usual conventions:
``HiddenVar`` for a mixture or chain state, ``GlobalHidden`` and
``LocalHidden<i>`` for builder-made models.
"""

from __future__ import annotations

import re
from pathlib import Path

from .core import DAG, LATENT, CLGaussian, Variable
from .datastream import Attributes
from .dynamic import DynamicLearnableModel, transition_dag
from .errors import AttributeTypeError, ConfigError, ParseError, SchemaError, StructureError
from .learning import LearnableModel, LearningConfig, build_learner

HIDDEN = "HiddenVar"
STATIC_TEMPLATES = ("gmm", "nb", "blr", "fa")
DYNAMIC_TEMPLATES = ("hmm", "kf")


def _attrs(attributes):
    if isinstance(attributes, Attributes):
        attributes = attributes.regular()
    out = [Variable(a.name, a.space) for a in attributes]
    if not out:
        from .errors import EmptyModel

        raise EmptyModel("no attributes")
    return out


def _require_real(variables, what):
    for v in variables:
        if v.is_discrete:
            raise AttributeTypeError(f"{what} needs real attributes; {v.name!r} is discrete")


def gaussian_mixture(attributes, k: int = 2, config: LearningConfig | None = None) -> LearnableModel:
    """Latent ``HiddenVar`` with ``k`` states, parent of every attribute."""
    obs = _attrs(attributes)
    _require_real(obs, "a Gaussian mixture")
    if k < 2:
        raise ConfigError("the mixture variable needs at least 2 states")
    hidden = Variable.finite(HIDDEN, k, role=LATENT)
    dag = DAG([hidden] + obs, {v.name: [HIDDEN] for v in obs})
    return build_learner(dag, config=config, name="gmm")


def naive_bayes(attributes, class_attr: str | None = None, config=None) -> LearnableModel:
    """Class variable as the only parent of every other attribute."""
    obs = _attrs(attributes)
    if class_attr is None:
        class_attr = obs[-1].name
    by_name = {v.name: v for v in obs}
    if class_attr not in by_name:
        raise SchemaError(f"no attribute named {class_attr!r}")
    if not by_name[class_attr].is_discrete:
        raise AttributeTypeError(f"class attribute {class_attr!r} must be discrete")
    dag = DAG(obs, {v.name: [class_attr] for v in obs if v.name != class_attr})
    return build_learner(dag, config=config, name="nb")


def bayesian_linear_regression(attributes, target: str | None = None, config=None) -> LearnableModel:
    """Target Gaussian with every other attribute as a linear covariate."""
    obs = _attrs(attributes)
    _require_real(obs, "linear regression")
    if target is None:
        target = obs[-1].name
    if target not in {v.name for v in obs}:
        raise SchemaError(f"no attribute named {target!r}")
    covs = [v.name for v in obs if v.name != target]
    dag = DAG(obs, {target: covs})
    return build_learner(dag, config=config, name="blr")


def factor_analysis(attributes, n_factors: int = 1, config=None) -> LearnableModel:
    """``n_factors`` standard-normal latent roots feeding every attribute."""
    obs = _attrs(attributes)
    _require_real(obs, "factor analysis")
    if n_factors < 1 or n_factors >= len(obs):
        raise ConfigError(f"need 1 <= n_factors < {len(obs)} (the attribute count)")
    factors = [Variable.real(f"Factor{i}", role=LATENT) for i in range(n_factors)]
    names = [f.name for f in factors]
    dag = DAG(factors + obs, {v.name: names for v in obs})
    fixed = {n: CLGaussian.normal(0.0, 1.0) for n in names}
    return build_learner(dag, fixed=fixed, config=config, name="fa")


def hmm(attributes, n_states: int = 2, config=None) -> DynamicLearnableModel:
    """Discrete hidden chain emitting every attribute."""
    obs = _attrs(attributes)
    if n_states < 2:
        raise ConfigError("the hidden chain needs at least 2 states")
    hidden = Variable.finite(HIDDEN, n_states, role=LATENT)
    slice_dag = DAG([hidden] + obs, {v.name: [HIDDEN] for v in obs})
    trans = transition_dag(slice_dag, {HIDDEN: [HIDDEN]})
    return DynamicLearnableModel(slice_dag, trans, config=config, name="hmm")


def kalman_filter(attributes, n_hidden: int = 1, config=None) -> DynamicLearnableModel:
    """``n_hidden`` Gaussian chains; each attribute regresses on all of them."""
    obs = _attrs(attributes)
    _require_real(obs, "a linear dynamical system")
    if n_hidden < 1:
        raise ConfigError("n_hidden must be >= 1")
    hidden = [Variable.real(f"{HIDDEN}{i}", role=LATENT) for i in range(n_hidden)]
    names = [h.name for h in hidden]
    slice_dag = DAG(hidden + obs, {v.name: names for v in obs})
    trans = transition_dag(slice_dag, {n: [n] for n in names})
    return DynamicLearnableModel(slice_dag, trans, config=config, name="kf")


# -- custom builder ------------------------------------------------------------

_KINDS = {"multinomial": "multinomial", "discrete": "multinomial", "gaussian": "gaussian", "normal": "gaussian"}


class ModelBuilder:
    """Plate-style model assembly over a fixed attribute set.

    ``"*"`` in :meth:`link` stands for every attribute; a local-latent
    prefix followed by ``"*"`` links each local latent to its own attribute.
    """

    def __init__(self, attributes):
        self.observed = _attrs(attributes)
        self.latents: list[Variable] = []
        self.local_groups: dict[str, list[str]] = {}
        self.edges: list[tuple[str, str]] = []

    def _names(self):
        return {v.name for v in self.observed} | {v.name for v in self.latents}

    def _new_latent(self, name, kind, states):
        kind = _KINDS.get(str(kind).lower())
        if kind is None:
            raise ConfigError(f"unknown latent kind; use one of {sorted(_KINDS)}")
        if name in self._names():
            raise StructureError(f"duplicate variable name {name!r}")
        if kind == "multinomial":
            if states is None or states < 2:
                raise ConfigError(f"discrete latent {name!r} needs at least 2 states")
            return Variable.finite(name, int(states), role=LATENT)
        return Variable.real(name, role=LATENT)

    def add_global_latent(self, name: str, kind: str = "multinomial", states: int | None = 2):
        self.latents.append(self._new_latent(name, kind, states))
        return self

    def add_local_latent_per_attribute(self, prefix: str, kind: str = "gaussian", states: int | None = 2):
        if prefix in self.local_groups:
            raise StructureError(f"duplicate local latent prefix {prefix!r}")
        names = []
        for i in range(len(self.observed)):
            v = self._new_latent(f"{prefix}{i}", kind, states)
            self.latents.append(v)
            names.append(v.name)
        self.local_groups[prefix] = names
        return self

    def _expand(self, token):
        if token == "*":
            return [v.name for v in self.observed]
        if token.endswith("*") and token[:-1] in self.local_groups:
            return list(self.local_groups[token[:-1]])
        if token not in self._names():
            raise StructureError(f"unknown variable {token!r} in link")
        return [token]

    def link(self, parent: str, child: str):
        ps, cs = self._expand(parent), self._expand(child)
        if len(ps) > 1 and len(cs) > 1:
            if len(ps) != len(cs):
                raise StructureError("pairwise link needs groups of equal size")
            pairs = list(zip(ps, cs))
        else:
            pairs = [(p, c) for p in ps for c in cs]
        for p, c in pairs:
            if (p, c) not in self.edges:
                self.edges.append((p, c))
        return self

    def dag(self) -> DAG:
        parents: dict[str, list[str]] = {}
        for p, c in self.edges:
            parents.setdefault(c, []).append(p)
        return DAG(self.latents + self.observed, parents)

    def build(self, config=None) -> LearnableModel:
        dag = self.dag()
        if dag.topological_order() is None:
            raise StructureError("the links create a directed cycle")
        return build_learner(dag, config=config, name="custom")


def new_builder(attributes) -> ModelBuilder:
    return ModelBuilder(attributes)


def parse_builder_script(text: str, attributes) -> ModelBuilder:
    """Replay a builder script, one call per line::

        global GlobalHidden multinomial 2
        local LocalHidden gaussian
        link GlobalHidden *
        link LocalHidden* *

    ``#`` starts a comment.
    """
    b = new_builder(attributes)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        op, args = parts[0].lower(), parts[1:]
        try:
            if op == "global" and len(args) in (2, 3):
                b.add_global_latent(args[0], args[1], int(args[2]) if len(args) == 3 else None)
            elif op == "local" and len(args) in (2, 3):
                b.add_local_latent_per_attribute(args[0], args[1], int(args[2]) if len(args) == 3 else None)
            elif op == "link" and len(args) == 2:
                b.link(args[0], args[1])
            else:
                raise ParseError(f"cannot parse builder call {line!r}", lineno)
        except ValueError:
            raise ParseError(f"bad number in {line!r}", lineno) from None
    return b


# -- template identifiers ------------------------------------------------------

_KNOBS = {
    "gmm": {"k": int},
    "nb": {"class": str},
    "blr": {"target": str},
    "fa": {"factors": int},
    "hmm": {"states": int},
    "kf": {"hidden": int},
}

_ID = re.compile(r"^(?P<name>[a-z]+)(?::(?P<rest>.*))?$")


def parse_template_id(template_id: str):
    """``"kf:hidden=2"`` -> ``("kf", {"hidden": 2})``; ``custom:<file>`` keeps the path."""
    m = _ID.match(template_id.strip())
    if not m:
        raise ConfigError(f"malformed template id {template_id!r}")
    name, rest = m.group("name"), m.group("rest")
    if name == "custom":
        if not rest:
            raise ConfigError("custom templates need a file: custom:<path>")
        return name, {"path": rest}
    if name not in _KNOBS:
        raise ConfigError(f"unknown template {name!r}; known: {sorted(_KNOBS) + ['custom']}")
    knobs = {}
    for item in filter(None, (rest or "").split(",")):
        key, sep, value = item.partition("=")
        if not sep or key not in _KNOBS[name]:
            raise ConfigError(f"unknown knob {item!r} for template {name!r}")
        try:
            knobs[key] = _KNOBS[name][key](value)
        except ValueError:
            raise ConfigError(f"bad value for knob {key!r}: {value!r}") from None
    return name, knobs


def is_dynamic_template(template_id: str) -> bool:
    return parse_template_id(template_id)[0] in DYNAMIC_TEMPLATES


def template_from_id(template_id: str, attributes, config=None):
    name, knobs = parse_template_id(template_id)
    if name == "gmm":
        return gaussian_mixture(attributes, knobs.get("k", 2), config)
    if name == "nb":
        return naive_bayes(attributes, knobs.get("class"), config)
    if name == "blr":
        return bayesian_linear_regression(attributes, knobs.get("target"), config)
    if name == "fa":
        return factor_analysis(attributes, knobs.get("factors", 1), config)
    if name == "hmm":
        return hmm(attributes, knobs.get("states", 2), config)
    if name == "kf":
        return kalman_filter(attributes, knobs.get("hidden", 1), config)
    text = Path(knobs["path"]).read_text()
    return parse_builder_script(text, attributes).build(config)
