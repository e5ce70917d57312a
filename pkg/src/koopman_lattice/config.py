"""Run configuration: JSON ingestion, validation and default resolution.

A configuration names exactly one system plus optional measure, dictionary,
quadrature, tolerance, analysis and output sections.  Unknown keys are
rejected.  Example::

    {
      "system": {"kind": "circle-rotation", "alpha": 0.25},
      "dictionary": {"type": "fourier", "order": 2},
      "quadrature": {"method": "grid-1d", "n": 128}
    }
"""

import copy
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .dynamics import AffineContraction, CircleRotation, Composition, Doubling, Logistic, MarkovChain
from .errors import ConfigError, InvariantError
from .measure import SAMPLE_METHODS, ProbabilityMeasure
from .observables import CLAMP_MODES, Dictionary

__all__ = ["RunConfig", "load_config", "parse_config", "ANALYSES"]

ANALYSES = ("spectrum", "lattice_check", "weyl_seq", "markov_closure")

_TOP_KEYS = {"system", "measure", "dictionary", "quadrature", "tolerances", "analyses", "output"}
_SYSTEM_KEYS = {
    "circle-rotation": {"kind", "alpha"},
    "doubling": {"kind"},
    "affine-contraction": {"kind", "a", "b"},
    "logistic": {"kind", "r"},
    "composition": {"kind", "maps"},
    "markov": {"kind", "matrix", "matrix_file"},
}
_MEASURE_KEYS = {
    "uniform-circle": {"kind"},
    "uniform-box": {"kind", "lower", "upper"},
    "gaussian": {"kind", "mean", "variance"},
    "finite-discrete": {"kind", "weights"},
}
_DEFAULT_TOLERANCES = {
    "membership": "auto",
    "closure": 1e-9,
    "unit_disk": 1e-8,
    "regularization": 1e-10,
}


@dataclass
class RunConfig:
    """Validated configuration with defaults resolved.

    ``resolved`` is the plain-data echo (what the report prints and hashes);
    the remaining fields are the live objects built from it.
    """

    resolved: dict
    system: object
    measure: ProbabilityMeasure
    dictionary: object
    analyses: dict
    base_dir: str = "."
    output: dict = field(default_factory=dict)

    @property
    def is_markov(self):
        return isinstance(self.system, MarkovChain)

    @property
    def quadrature(self):
        return self.resolved["quadrature"]

    @property
    def tolerances(self):
        return self.resolved["tolerances"]

    def with_seed(self, seed):
        """Copy with the quadrature seed replaced."""
        resolved = copy.deepcopy(self.resolved)
        resolved["quadrature"]["seed"] = int(seed)
        out = copy.copy(self)
        out.resolved = resolved
        return out


def _check_keys(d, allowed, path):
    if not isinstance(d, dict):
        raise ConfigError("expected an object", path)
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown field {key!r}", f"{path}.{key}" if path else key)


def _number(v, path, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise ConfigError("expected a finite number", path)
    if positive and not v > 0:
        raise ConfigError("must be > 0", path)
    if nonneg and v < 0:
        raise ConfigError("must be >= 0", path)
    return float(v)


def _integer(v, path, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError("expected an integer", path)
    if minimum is not None and v < minimum:
        raise ConfigError(f"must be >= {minimum}", path)
    return v


def _vector(v, path):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not v:
        raise ConfigError("expected a nonempty list of numbers", path)
    return [_number(x, f"{path}[{i}]") for i, x in enumerate(v)]


def _build_system(spec, path, base_dir):
    _check_keys(spec, {"kind", "alpha", "a", "b", "r", "maps", "matrix", "matrix_file"}, path)
    kind = spec.get("kind")
    if kind not in _SYSTEM_KEYS:
        raise ConfigError(f"unknown system kind {kind!r}", f"{path}.kind")
    _check_keys(spec, _SYSTEM_KEYS[kind], path)
    try:
        if kind == "circle-rotation":
            alpha = _number(spec.get("alpha"), f"{path}.alpha")
            return CircleRotation(alpha), {"kind": kind, "alpha": alpha}
        if kind == "doubling":
            return Doubling(), {"kind": kind}
        if kind == "affine-contraction":
            a = _vector(spec.get("a"), f"{path}.a")
            b = _vector(spec.get("b", [0.0] * len(a)), f"{path}.b")
            return AffineContraction(tuple(a), tuple(b)), {"kind": kind, "a": a, "b": b}
        if kind == "logistic":
            r = _number(spec.get("r"), f"{path}.r")
            return Logistic(r), {"kind": kind, "r": r}
        if kind == "composition":
            maps = spec.get("maps")
            if not isinstance(maps, list) or not maps:
                raise ConfigError("expected a nonempty list of maps", f"{path}.maps")
            built = [_build_system(m, f"{path}.maps[{i}]", base_dir) for i, m in enumerate(maps)]
            if any(isinstance(m, MarkovChain) for m, _ in built):
                raise ConfigError("Markov chains cannot be composed", f"{path}.maps")
            return Composition(tuple(m for m, _ in built)), {"kind": kind, "maps": [r for _, r in built]}
    except InvariantError as exc:
        raise ConfigError(str(exc), path) from exc
    return _build_markov(spec, path, base_dir)


def _build_markov(spec, path, base_dir):
    if ("matrix" in spec) == ("matrix_file" in spec):
        raise ConfigError("give exactly one of 'matrix' or 'matrix_file'", path)
    if "matrix_file" in spec:
        fname = spec["matrix_file"]
        if not isinstance(fname, str):
            raise ConfigError("expected a path string", f"{path}.matrix_file")
        full = fname if os.path.isabs(fname) else os.path.join(base_dir, fname)
        if not os.path.exists(full):
            raise ConfigError(f"file {fname!r} does not exist", f"{path}.matrix_file")
        try:
            rows = np.loadtxt(full, dtype=float, ndmin=2).tolist()
        except ValueError as exc:
            raise ConfigError(f"unreadable matrix file: {exc}", f"{path}.matrix_file") from exc
        where = f"{path}.matrix_file"
    else:
        rows = spec["matrix"]
        where = f"{path}.matrix"
        if not isinstance(rows, list) or not rows:
            raise ConfigError("expected a list of rows", where)
        rows = [_vector(r, f"{where}[{i}]") for i, r in enumerate(rows)]
    m = len(rows)
    for i, row in enumerate(rows):
        if len(row) != m:
            raise ConfigError(f"row has {len(row)} entries, expected {m}", f"{where}[{i}]")
        if any(v < 0 for v in row):
            raise ConfigError("negative transition probability", f"{where}[{i}]")
        if abs(sum(row) - 1.0) > 1e-12:
            raise ConfigError(f"row {i} sums to {sum(row)!r}, not 1", f"{where}[{i}]")
    try:
        chain = MarkovChain(rows)
    except InvariantError as exc:
        raise ConfigError(str(exc), where) from exc
    return chain, {"kind": "markov", "matrix": [list(map(float, r)) for r in rows]}


def _default_measure(system):
    if isinstance(system, MarkovChain):
        return {"kind": "finite-discrete", "weights": [1.0 / system.n_states] * system.n_states}
    if system.space == "real":
        return {"kind": "gaussian", "mean": [0.0] * system.dim, "variance": [1.0] * system.dim}
    if system.space == "interval":
        return {"kind": "uniform-box", "lower": [0.0], "upper": [1.0]}
    return {"kind": "uniform-circle"}


def _build_measure(spec, system, path):
    if spec is None:
        spec = _default_measure(system)
    _check_keys(spec, {"kind", "lower", "upper", "mean", "variance", "weights"}, path)
    kind = spec.get("kind")
    if kind not in _MEASURE_KEYS:
        raise ConfigError(f"unknown measure kind {kind!r}", f"{path}.kind")
    _check_keys(spec, _MEASURE_KEYS[kind], path)
    try:
        if kind == "uniform-circle":
            mu, echo = ProbabilityMeasure.uniform_circle(), {"kind": kind}
        elif kind == "uniform-box":
            lo, hi = _vector(spec.get("lower"), f"{path}.lower"), _vector(spec.get("upper"), f"{path}.upper")
            mu, echo = ProbabilityMeasure.uniform_box(lo, hi), {"kind": kind, "lower": lo, "upper": hi}
        elif kind == "gaussian":
            mean = _vector(spec.get("mean", [0.0] * system.dim), f"{path}.mean")
            var = _vector(spec.get("variance", [1.0] * len(mean)), f"{path}.variance")
            mu, echo = ProbabilityMeasure.gaussian(mean, var), {"kind": kind, "mean": mean, "variance": var}
        else:
            w = _vector(spec.get("weights"), f"{path}.weights")
            mu, echo = ProbabilityMeasure.finite_discrete(w), {"kind": kind, "weights": w}
    except InvariantError as exc:
        raise ConfigError(str(exc), path) from exc
    if isinstance(system, MarkovChain):
        if kind != "finite-discrete" or mu.n_states != system.n_states:
            raise ConfigError("Markov chains need a finite-discrete measure over their states", path)
    else:
        if kind == "finite-discrete":
            raise ConfigError("finite-discrete measures need a Markov chain system", path)
        if mu.dim != system.dim:
            raise ConfigError(f"measure dimension {mu.dim} != system dimension {system.dim}", path)
        if system.space == "circle" and kind != "uniform-circle":
            raise ConfigError("circle maps need the uniform-circle measure", path)
    return mu, echo


def _build_dictionary(spec, system, path):
    if isinstance(system, MarkovChain):
        if spec is not None:
            raise ConfigError("Markov chains use their transition matrix directly; omit 'dictionary'", path)
        m = system.n_states
        return Dictionary.indicator(m), {"type": "indicator", "order": m}
    if spec is None:
        spec = {"type": "fourier" if system.space == "circle" else "monomial", "order": 4}
    _check_keys(spec, {"type", "order"}, path)
    kind = spec.get("type")
    order = _integer(spec.get("order"), f"{path}.order", minimum=0)
    if kind == "fourier":
        if system.space != "circle":
            raise ConfigError("fourier dictionaries need a circle map", f"{path}.type")
        d = Dictionary.fourier(order)
    elif kind == "monomial":
        d = Dictionary.monomial(order, system.dim)
    elif kind == "indicator":
        raise ConfigError("indicator dictionaries need a Markov chain system", f"{path}.type")
    else:
        raise ConfigError(f"unknown dictionary type {kind!r}", f"{path}.type")
    if len(d) > 512:
        raise ConfigError("dictionary larger than 512 elements", f"{path}.order")
    return d, {"type": kind, "order": order}


def _build_quadrature(spec, system, measure, path):
    if isinstance(system, MarkovChain):
        # exact summation is forced for finite chains
        seed = 0
        if isinstance(spec, dict) and "seed" in spec:
            seed = _integer(spec["seed"], f"{path}.seed", minimum=0)
        if spec is not None:
            _check_keys(spec, {"method", "n", "seed"}, path)
        return {"method": "exact-discrete", "n": measure.n_states, "seed": seed}
    default_method = "grid-1d" if measure.dim == 1 and measure.kind != "gaussian" else "monte-carlo"
    default_n = 256 if default_method == "grid-1d" else 10000
    spec = {} if spec is None else spec
    _check_keys(spec, {"method", "n", "seed"}, path)
    method = spec.get("method", default_method)
    if method not in SAMPLE_METHODS or method == "exact-discrete":
        raise ConfigError(f"method {method!r} is not available for {measure.kind}", f"{path}.method")
    if method == "grid-1d" and measure.dim != 1:
        raise ConfigError("grid-1d needs a 1-dimensional measure", f"{path}.method")
    n = _integer(spec.get("n", default_n), f"{path}.n", minimum=1)
    seed = _integer(spec.get("seed", 0), f"{path}.seed", minimum=0)
    return {"method": method, "n": n, "seed": seed}


def _build_tolerances(spec, path):
    spec = {} if spec is None else spec
    _check_keys(spec, set(_DEFAULT_TOLERANCES), path)
    out = dict(_DEFAULT_TOLERANCES)
    out.update(spec)
    if out["membership"] != "auto":
        out["membership"] = _number(out["membership"], f"{path}.membership", positive=True)
    out["closure"] = _number(out["closure"], f"{path}.closure", positive=True)
    out["unit_disk"] = _number(out["unit_disk"], f"{path}.unit_disk", positive=True)
    out["regularization"] = _number(out["regularization"], f"{path}.regularization", nonneg=True)
    return out


def _catalog_kind(system):
    if isinstance(system, CircleRotation):
        return "rotation"
    if isinstance(system, AffineContraction) and all(v == 0.0 for v in system.b):
        return "contraction"
    return None


def _pair_ref(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, str)):
        raise ConfigError("expected an integer order/index or a catalog label", path)
    return v


def _build_analyses(spec, system, path):
    catalog = _catalog_kind(system)
    markov = isinstance(system, MarkovChain)
    if spec is None:
        spec = {"spectrum": True, "lattice_check": True, "weyl_seq": catalog is not None,
                "markov_closure": markov}
    _check_keys(spec, set(ANALYSES), path)
    out = {}

    if spec.get("spectrum", False) not in (False, None):
        if spec["spectrum"] is not True:
            raise ConfigError("expected true/false", f"{path}.spectrum")
        out["spectrum"] = True

    lc = spec.get("lattice_check", False)
    if lc not in (False, None):
        lc = {} if lc is True else lc
        p = f"{path}.lattice_check"
        _check_keys(lc, {"pairs", "max_order", "max_sum_order"}, p)
        pairs = lc.get("pairs", "all-catalog" if catalog else "all-eigenpairs")
        if pairs not in ("all-catalog", "all-eigenpairs"):
            raise ConfigError("expected 'all-catalog' or 'all-eigenpairs'", f"{p}.pairs")
        if pairs == "all-catalog" and catalog is None:
            raise ConfigError("this system has no eigenpair catalog", f"{p}.pairs")
        entry = {"pairs": pairs}
        if pairs == "all-catalog":
            entry["max_order"] = _integer(lc.get("max_order", 4), f"{p}.max_order", minimum=0)
            mso = lc.get("max_sum_order")
            entry["max_sum_order"] = None if mso is None else _integer(mso, f"{p}.max_sum_order", minimum=0)
        else:
            for key in ("max_order", "max_sum_order"):
                if key in lc:
                    raise ConfigError("only meaningful with pairs='all-catalog'", f"{p}.{key}")
        out["lattice_check"] = entry

    ws = spec.get("weyl_seq", False)
    if ws not in (False, None):
        ws = {} if ws is True else ws
        p = f"{path}.weyl_seq"
        _check_keys(ws, {"source", "f", "g", "k_max", "clamp_mode"}, p)
        source = ws.get("source", "catalog" if catalog else "eigenpairs")
        if source not in ("catalog", "eigenpairs"):
            raise ConfigError("expected 'catalog' or 'eigenpairs'", f"{p}.source")
        if source == "catalog" and catalog is None:
            raise ConfigError("this system has no eigenpair catalog", f"{p}.source")
        default_f, default_g = {"rotation": (1, 2), "contraction": (1, 1)}.get(catalog, (0, 0))
        mode = ws.get("clamp_mode", "auto")
        if mode not in CLAMP_MODES:
            raise ConfigError(f"expected one of {CLAMP_MODES}", f"{p}.clamp_mode")
        out["weyl_seq"] = {
            "source": source,
            "f": _pair_ref(ws.get("f", default_f), f"{p}.f"),
            "g": _pair_ref(ws.get("g", default_g), f"{p}.g"),
            "k_max": _integer(ws.get("k_max", 10), f"{p}.k_max", minimum=1),
            "clamp_mode": mode,
        }

    mc = spec.get("markov_closure", False)
    if mc not in (False, None):
        if mc is not True:
            raise ConfigError("expected true/false", f"{path}.markov_closure")
        if not markov:
            raise ConfigError("markov_closure needs a Markov chain system", f"{path}.markov_closure")
        out["markov_closure"] = True
    return out


def _build_output(spec, path):
    spec = {} if spec is None else spec
    _check_keys(spec, {"dir", "format"}, path)
    fmt = spec.get("format", "json")
    if fmt not in ("json", "csv-bundle"):
        raise ConfigError("expected 'json' or 'csv-bundle'", f"{path}.format")
    out_dir = spec.get("dir", "out")
    if not isinstance(out_dir, str):
        raise ConfigError("expected a path string", f"{path}.dir")
    return {"dir": out_dir, "format": fmt}


def parse_config(data, base_dir="."):
    """Validate a configuration given as plain data."""
    _check_keys(data, _TOP_KEYS, "")
    if "system" not in data:
        raise ConfigError("missing required field", "system")
    system, system_echo = _build_system(data["system"], "system", base_dir)
    measure, measure_echo = _build_measure(data.get("measure"), system, "measure")
    dictionary, dict_echo = _build_dictionary(data.get("dictionary"), system, "dictionary")
    quad = _build_quadrature(data.get("quadrature"), system, measure, "quadrature")
    tols = _build_tolerances(data.get("tolerances"), "tolerances")
    analyses = _build_analyses(data.get("analyses"), system, "analyses")
    output = _build_output(data.get("output"), "output")
    resolved = {
        "system": system_echo,
        "measure": measure_echo,
        "dictionary": dict_echo,
        "quadrature": quad,
        "tolerances": tols,
        "analyses": analyses,
    }
    return RunConfig(resolved, system, measure, dictionary, analyses, base_dir, output)


def load_config(path):
    """Read and validate a JSON configuration file.

    Raises
    ------
    ConfigError
        On JSON syntax errors (with line and column), validation errors
        (with the field path) and unknown fields.
    """
    with open(path) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(data, os.path.dirname(os.path.abspath(path)))
