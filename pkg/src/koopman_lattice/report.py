"""Analysis orchestration and bit-stable report emission.

:func:`run` executes the selected analyses in the fixed order spectrum,
lattice check, Weyl sequence, Markov closure.  :func:`emit` writes either a
canonical JSON report (sorted keys, floats with 17 significant digits) or a
CSV bundle.  Wall-clock timings are kept on the :class:`RunReport` object but
never written into the report files, so identical configurations produce
byte-identical output.
"""

import csv
import hashlib
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from ._version import __version__
from .dynamics import MarkovChain, exact_eigenpairs, markov_koopman_matrix
from .errors import ConfigError, KoopmanError
from .galerkin import edmd, eigendecompose
from .lattice import (
    build_weyl_sequence,
    catalog_lattice_check,
    eigenpair_lattice_check,
    finite_spectrum_lattice_closure,
    unit_disk_check,
)
from .measure import sample
from .observables import Dictionary, Indicator

__all__ = ["TOOL_NAME", "PhaseError", "RunReport", "run", "emit", "canonical_json", "EIGEN_COLUMNS",
           "LATTICE_COLUMNS", "WEYLSEQ_COLUMNS"]

log = logging.getLogger(__name__)

TOOL_NAME = "koopman-lattice"
EIGEN_COLUMNS = ["index", "re", "im", "abs", "matrix_residual", "weyl_residual"]
LATTICE_COLUMNS = ["analysis", "lambda_re", "lambda_im", "eta_re", "eta_im", "product_re",
                   "product_im", "residual", "tolerance", "verdict"]
WEYLSEQ_COLUMNS = ["k", "m", "residual", "bound", "bound_satisfied"]


class PhaseError(KoopmanError):
    """A numerical failure inside one analysis phase."""

    def __init__(self, phase, exc):
        super().__init__(f"{phase} phase failed: {exc}")
        self.phase = phase
        self.__cause__ = exc


def _fmt(x):
    if x is None:
        return "null"
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def canonical_json(obj):
    """Deterministic JSON text: sorted keys, 17-digit floats, complex as ``{re, im}``."""
    parts = []
    _dump(obj, parts)
    return "".join(parts) + "\n"


def _dump(obj, out):
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append("null" if obj is None else ("true" if obj else "false"))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt(obj))
    elif isinstance(obj, (complex, np.complexfloating)):
        _dump({"re": obj.real, "im": obj.imag}, out)
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key)) + ":")
            _dump(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _dump(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _opt(v):
    return None if v is None or (isinstance(v, float) and math.isnan(v)) else float(v)


def _empty_sections():
    return {
        "spectrum": {"ran": False, "source": None, "dictionary": None, "gram_condition": None,
                     "regularization_threshold": None, "rank": None, "eigenvalues": [],
                     "unit_disk": {"tolerance": None, "inside": None, "offenders": []}},
        "lattice": {"ran": False, "pairs": None, "verdict": None, "records": []},
        "weyl_seq": {"ran": False, "lambda": None, "eta": None, "target": None,
                     "n_k": "not applicable", "clamp_mode": None, "steps": []},
        "markov_closure": {"ran": False, "verdict": None, "tolerance": None, "records": [],
                           "unmatched_products": [], "power_tests": [],
                           "unit_disk": {"tolerance": None, "inside": None, "offenders": []}},
    }


@dataclass
class RunReport:
    """Result of :func:`run`; ``to_dict`` is what gets serialized."""

    config: object
    sections: dict
    quadrature: dict
    timings: dict = field(default_factory=dict)

    @property
    def config_digest(self):
        return hashlib.sha256(canonical_json(self.config.resolved).encode()).hexdigest()

    def to_dict(self):
        return {
            "tool": {"name": TOOL_NAME, "version": __version__},
            "config": self.config.resolved,
            "config_digest": self.config_digest,
            "analyses_run": [k for k in ("spectrum", "lattice", "weyl_seq", "markov_closure")
                             if self.sections[k]["ran"]],
            "quadrature": self.quadrature,
            **self.sections,
        }

    def to_json(self):
        return canonical_json(self.to_dict())


def _record_dict(r):
    return {"lambda": r.lam, "eta": r.eta, "product": r.product, "residual": _opt(r.residual),
            "verdict": r.verdict, "tolerance": r.tolerance, "labels": list(r.labels), "note": r.note}


class _Runner:
    def __init__(self, config):
        self.config = config
        q = config.quadrature
        self.samples = sample(config.measure, q["n"], q["seed"], q["method"])
        self.reg = config.tolerances["regularization"]
        mem = config.tolerances["membership"]
        self.tol = None if mem == "auto" else mem
        self._eig = None
        self.weyl_errors = []

    def eigen(self):
        if self._eig is None:
            system = self.config.system
            if isinstance(system, MarkovChain):
                m = system.n_states
                basis = Dictionary([Indicator(j, m) for j in range(1, m + 1)], f"states-{m}")
                eig = eigendecompose(markov_koopman_matrix(system), basis, self.samples, system)
                eig.eigenvalue_errors = np.zeros(len(eig))
                self._eig = (eig, None, None, "transition-matrix")
            else:
                eig, gram, kmat = edmd(self.config.dictionary, system, self.samples, self.reg)
                self._eig = (eig, gram, kmat, "edmd")
        return self._eig

    def spectrum(self, sec):
        eig, gram, kmat, source = self.eigen()
        tol = self.config.tolerances["unit_disk"]
        inside, offenders = unit_disk_check(eig.eigenvalues, tol)
        rows = []
        for i, lam in enumerate(eig.eigenvalues):
            rows.append({
                "index": i, "eigenvalue": complex(lam), "abs": abs(lam),
                "matrix_residual": float(eig.matrix_residuals[i]),
                "weyl_residual": _opt(eig.weyl_residuals[i]),
                "weyl_error": _opt(eig.weyl_errors[i]),
                "stderr": float(eig.eigenvalue_errors[i]),
            })
        self.weyl_errors += [e for e in eig.weyl_errors if np.isfinite(e)]
        sec.update({
            "ran": True, "source": source,
            "dictionary": eig.dictionary.label if source == "edmd" else None,
            "gram_condition": None if gram is None else gram.condition,
            "regularization_threshold": None if kmat is None else kmat.threshold,
            "rank": None if kmat is None else kmat.rank,
            "eigenvalues": rows,
            "unit_disk": {"tolerance": tol, "inside": inside, "offenders": offenders},
        })

    def lattice(self, sec):
        spec = self.config.analyses["lattice_check"]
        system = self.config.system
        if spec["pairs"] == "all-catalog":
            catalog = exact_eigenpairs(system, spec["max_order"])
            rep = catalog_lattice_check(system, self.samples, catalog, spec["max_sum_order"], self.tol)
        else:
            eig = self.eigen()[0]
            keep = [i for i in range(len(eig)) if eig.l2_norms[i] > 0]
            rep = eigenpair_lattice_check([eig.eigenvalues[i] for i in keep],
                                          [eig.eigenfunction(i) for i in keep],
                                          system, self.samples, self.tol)
        sec.update({"ran": True, "pairs": spec["pairs"], "verdict": rep.verdict,
                    "records": [_record_dict(r) for r in rep.records]})

    def _pick(self, ref, source):
        system = self.config.system
        if source == "catalog":
            spec = self.config.analyses["weyl_seq"]
            orders = [abs(v) for v in (spec["f"], spec["g"]) if isinstance(v, int)]
            catalog = exact_eigenpairs(system, max(orders + [4]))
            for p in catalog:
                if (isinstance(ref, int) and p.order == ref) or p.label == ref:
                    return p.eigenvalue, p.eigenfunction
            raise ConfigError(f"no catalog eigenpair {ref!r}", "analyses.weyl_seq")
        eig = self.eigen()[0]
        if not isinstance(ref, int) or not 0 <= ref < len(eig):
            raise ConfigError(f"eigenpair index {ref!r} out of range", "analyses.weyl_seq")
        return eig.eigenvalues[ref], eig.eigenfunction(ref)

    def weyl_seq(self, sec):
        spec = self.config.analyses["weyl_seq"]
        lam, f = self._pick(spec["f"], spec["source"])
        eta, g = self._pick(spec["g"], spec["source"])
        trace = build_weyl_sequence(f, g, lam, eta, self.config.system, self.samples,
                                    spec["k_max"], self.tol, spec["clamp_mode"])
        self.weyl_errors += [s.error for s in trace.steps]
        sec.update({
            "ran": True, "lambda": trace.lam, "eta": trace.eta, "target": trace.target,
            "clamp_mode": spec["clamp_mode"],
            "steps": [{"k": s.k, "m": s.m, "clamp_lower": s.params.lower, "clamp_upper": s.params.m,
                       "product_norm": s.product_norm, "residual": s.residual, "error": s.error,
                       "bound": s.bound, "bound_satisfied": s.bound_satisfied,
                       "norm_floor_ok": s.norm_floor_ok} for s in trace.steps],
        })

    def markov_closure(self, sec):
        eig = self.eigen()[0]
        tol = self.config.tolerances["closure"]
        rep = finite_spectrum_lattice_closure(eig.eigenvalues, tol)
        disk_tol = self.config.tolerances["unit_disk"]
        inside, offenders = unit_disk_check(eig.eigenvalues, disk_tol)
        sec.update({
            "ran": True, "verdict": rep.verdict, "tolerance": tol,
            "records": [_record_dict(r) for r in rep.records],
            "unmatched_products": rep.unmatched_products,
            "power_tests": [{"eigenvalue": p.eigenvalue, "escaped": p.escaped,
                             "escape_power": p.escape_power, "max_power": p.max_power}
                            for p in rep.power_tests],
            "unit_disk": {"tolerance": disk_tol, "inside": inside, "offenders": offenders},
        })


_PHASES = (("spectrum", "spectrum"), ("lattice_check", "lattice"),
           ("weyl_seq", "weyl_seq"), ("markov_closure", "markov_closure"))


def run(config):
    """Execute the analyses selected in ``config``.

    Raises
    ------
    PhaseError
        Wrapping any numerical error, tagged with the phase name.
    """
    timings = {}
    t0 = time.perf_counter()
    try:
        runner = _Runner(config)
    except KoopmanError as exc:
        raise PhaseError("quadrature", exc) from exc
    timings["quadrature"] = time.perf_counter() - t0
    sections = _empty_sections()
    for key, name in _PHASES:
        if key not in config.analyses:
            continue
        t0 = time.perf_counter()
        try:
            getattr(runner, name)(sections[name])
        except ConfigError:
            raise
        except (KoopmanError, np.linalg.LinAlgError) as exc:
            raise PhaseError(name, exc) from exc
        timings[name] = time.perf_counter() - t0
        log.info("%s phase finished in %.3f s", name, timings[name])
    s = runner.samples
    quad = {
        "method": s.method, "n": len(s), "seed": s.seed,
        "max_weyl_error": max(runner.weyl_errors) if runner.weyl_errors else None,
    }
    eig_info = runner._eig
    quad["max_eigenvalue_error"] = (float(np.max(eig_info[0].eigenvalue_errors))
                                    if eig_info is not None else None)
    return RunReport(config, sections, quad, timings)


def _csv_num(x):
    if x is None:
        return ""
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def emit(report, out_dir, fmt="json"):
    """Write ``report`` into ``out_dir``; returns the list of written paths."""
    os.makedirs(out_dir, exist_ok=True)
    if fmt == "json":
        path = os.path.join(out_dir, "report.json")
        with open(path, "w", newline="\n") as fh:
            fh.write(report.to_json())
        return [path]
    if fmt != "csv-bundle":
        raise ValueError(f"unknown report format {fmt!r}")
    sec = report.sections
    eig_rows = [[r["index"], _csv_num(r["eigenvalue"].real), _csv_num(r["eigenvalue"].imag),
                 _csv_num(r["abs"]), _csv_num(r["matrix_residual"]), _csv_num(r["weyl_residual"])]
                for r in sec["spectrum"]["eigenvalues"]]
    lat_rows = []
    for name, key in (("lattice-check", "lattice"), ("markov-closure", "markov_closure")):
        for r in sec[key]["records"]:
            lat_rows.append([name, _csv_num(r["lambda"].real), _csv_num(r["lambda"].imag),
                             _csv_num(r["eta"].real), _csv_num(r["eta"].imag),
                             _csv_num(r["product"].real), _csv_num(r["product"].imag),
                             _csv_num(r["residual"]), _csv_num(r["tolerance"]), r["verdict"]])
    ws_rows = [[s["k"], s["m"], _csv_num(s["residual"]), _csv_num(s["bound"]),
                "true" if s["bound_satisfied"] else "false"] for s in sec["weyl_seq"]["steps"]]
    paths = [os.path.join(out_dir, n) for n in ("eigenvalues.csv", "lattice.csv", "weylseq.csv")]
    _write_csv(paths[0], EIGEN_COLUMNS, eig_rows)
    _write_csv(paths[1], LATTICE_COLUMNS, lat_rows)
    _write_csv(paths[2], WEYLSEQ_COLUMNS, ws_rows)
    return paths
