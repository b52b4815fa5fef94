"""Command-line driver.

Usage::

    bellsim chsh-sweep --state cat --epsilon 1e-6 --theta 0:90:0.5
    bellsim polarization-sweep --state cat --theta-star 22.5 --eps 0.05:1.0:0.05
    bellsim --config run.cfg --output out.csv

A config document is a flat ``key = value`` file whose keys are the long flag
names without the leading dashes (``theta-star = 22.5``). Flags given on the
command line override the document. Angles are degrees at this boundary.

Exit status: 0 success, 1 validation error, 2 internal invariant failure.
Errors are reported as one JSON line on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .bell import (
    InequalitySpec,
    chsh_spec,
    evaluate_inequality,
    is_violation,
    sample_inequality,
)
from .channels import RelaxationParams
from .densmat import InvariantError, PureState, ValidationError, pure_to_density
from .lrhvm import (
    EnsembleRun,
    bulk_chsh_curve,
    bulk_correlation,
    detected_state,
    lrhvm_applicable,
    polarization_sweep,
    prepare_bulk,
    pure_chsh_curve,
)
from .pps import STATE_LABELS, fidelity_delta, make_pps, named_state, prepare, relax_polarized
from .readout import (
    measure_pauli_expectations,
    tomography_reconstruct,
    tomography_settings,
)
from .serialize import emit, matrix_to_json, render_csv, render_json, rounded

COMMANDS = ("chsh-sweep", "bell-eval", "pps-prep", "tomography", "polarization-sweep", "lrhvm-compare")
MAX_GRID_POINTS = 10**6
EXIT_OK, EXIT_VALIDATION, EXIT_INTERNAL = 0, 1, 2

DEFAULTS: Dict[str, Any] = {
    "state": "cat",
    "amplitudes": None,
    "qubits": 2,
    "epsilon": 1e-6,
    "theta": "0:90:0.5",
    "theta-star": 22.5,
    "eps": "0.05:1.0:0.05",
    "t1": None,
    "t2": None,
    "duration": 0.015,
    "shots": None,
    "seed": 0,
    "prep": "equilibrium",
    "inequality": None,
    "output": None,
    "format": "csv",
}


@dataclasses.dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    step: float

    @classmethod
    def parse(cls, text: str) -> "Grid":
        parts = str(text).split(":")
        try:
            if len(parts) == 1:
                v = float(parts[0])
                return cls(v, v, 1.0)
            if len(parts) != 3:
                raise ValueError
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise ValidationError(f"grid {text!r} is not start:stop:step") from None
        if not step > 0:
            raise ValidationError(f"grid step must be positive, got {step}")
        if start > stop:
            raise ValidationError(f"grid start {start} exceeds stop {stop}")
        if (stop - start) / step + 1 > MAX_GRID_POINTS:
            raise ValidationError(f"grid {text!r} has more than {MAX_GRID_POINTS} points")
        return cls(start, stop, step)

    def points(self) -> List[float]:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [self.start + i * self.step for i in range(count)]

    def __str__(self) -> str:
        return f"{self.start:g}:{self.stop:g}:{self.step:g}"


@dataclasses.dataclass(frozen=True)
class RunConfig:
    command: str
    state: str
    amplitudes: Optional[Tuple[complex, ...]]
    qubits: int
    epsilon: float
    theta: Grid
    theta_star: float
    eps: Grid
    relaxation: Optional[Tuple[RelaxationParams, ...]]
    shots: Optional[int]
    seed: int
    prep: str
    inequality: Optional[str]
    output: Optional[str]
    format: str

    @property
    def num_qubits(self) -> int:
        if self.state == "custom":
            return len(self.amplitudes).bit_length() - 1
        return self.qubits

    def target(self) -> PureState:
        return named_state(self.state, self.num_qubits, self.amplitudes)

    def provenance(self) -> Dict[str, Any]:
        relax = None
        if self.relaxation:
            relax = {
                "t1": [p.t1 for p in self.relaxation],
                "t2": [p.t2 for p in self.relaxation],
                "duration": self.relaxation[0].duration,
            }
        return {
            "version": __version__,
            "command": self.command,
            "state": self.state,
            "amplitudes": None
            if self.amplitudes is None
            else ",".join(_complex_text(a) for a in self.amplitudes),
            "qubits": self.num_qubits,
            "epsilon": self.epsilon,
            "theta": str(self.theta),
            "theta-star": self.theta_star,
            "eps": str(self.eps),
            "relaxation": relax,
            "shots": self.shots,
            "seed": self.seed,
            "prep": self.prep,
            "inequality": self.inequality,
            "format": self.format,
        }


def _complex_text(z: complex) -> str:
    return f"{z.real:.12g}{z.imag:+.12g}j" if z.imag else f"{z.real:.12g}"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bellsim", description="Density-matrix simulation of NMR Bell-inequality tests.")
    p.add_argument("command", nargs="?", choices=COMMANDS, help="what to run (may also come from --config)")
    p.add_argument("--config", help="flat key = value document; flags override it")
    p.add_argument("--state", help=f"target state: {', '.join(STATE_LABELS)}")
    p.add_argument("--amplitudes", help="comma-separated complex amplitudes for --state custom, e.g. 1,0,0,1j")
    p.add_argument("--qubits", help="qubit count for zero/uniform/cat (default 2)")
    p.add_argument("--epsilon", help="polarization of the pseudo-pure state (default 1e-6)")
    p.add_argument("--theta", help="theta grid in degrees, start:stop:step (default 0:90:0.5)")
    p.add_argument("--theta-star", dest="theta_star", help="single theta in degrees (default 22.5)")
    p.add_argument("--eps", help="polarization grid start:stop:step for polarization-sweep")
    p.add_argument("--t1", help="T1 in seconds, one value or comma-separated per qubit")
    p.add_argument("--t2", help="T2 in seconds, one value or comma-separated per qubit")
    p.add_argument("--duration", help="relaxation time in seconds (default 0.015)")
    p.add_argument("--shots", help="finite-shot sampling per correlation term")
    p.add_argument("--seed", help="sampling seed (default 0)")
    p.add_argument("--prep", help="equilibrium (spatial averaging from rho_eq when possible) or direct")
    p.add_argument("--inequality", help="JSON inequality document for bell-eval (default CHSH at theta-star)")
    p.add_argument("--output", "-o", help="output path (default stdout)")
    p.add_argument("--format", help="csv or json (default csv)")
    return p


def read_config_document(path: str) -> Dict[str, str]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path!r}: {exc.strerror}") from exc
    doc = {}
    for no, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            key, sep, value = line.partition(":")
        key = key.strip().lstrip("-").replace("_", "-")
        if not sep or not key:
            raise ValidationError(f"{path}:{no}: expected 'key = value'")
        if key not in DEFAULTS and key != "command":
            raise ValidationError(f"{path}:{no}: unknown key {key!r}")
        doc[key] = value.strip()
    return doc


def _floats(text: Any, what: str) -> List[float]:
    try:
        return [float(v) for v in str(text).split(",")]
    except ValueError:
        raise ValidationError(f"{what} must be a number or comma-separated numbers, got {text!r}") from None


def _number(text: Any, what: str, cast=float):
    try:
        return cast(text)
    except (TypeError, ValueError):
        raise ValidationError(f"{what} must be a {cast.__name__}, got {text!r}") from None


def resolve_config(argv: Sequence[str]) -> RunConfig:
    args = build_parser().parse_args(argv)
    merged: Dict[str, Any] = dict(DEFAULTS)
    command = None
    if args.config:
        doc = read_config_document(args.config)
        command = doc.pop("command", None)
        merged.update(doc)
    flags = {k.replace("_", "-"): v for k, v in vars(args).items() if v is not None}
    flags.pop("config", None)
    command = flags.pop("command", command)
    merged.update(flags)
    if command not in COMMANDS:
        raise ValidationError(f"command must be one of {', '.join(COMMANDS)}, got {command!r}")

    state = str(merged["state"])
    if state not in STATE_LABELS:
        raise ValidationError(f"unknown state label {state!r}; expected one of {', '.join(STATE_LABELS)}")
    amplitudes = None
    if state == "custom":
        if not merged["amplitudes"]:
            raise ValidationError("--state custom needs --amplitudes")
        try:
            amplitudes = tuple(complex(a.strip().replace(" ", "")) for a in str(merged["amplitudes"]).split(","))
        except ValueError:
            raise ValidationError(f"bad amplitudes {merged['amplitudes']!r}") from None
        PureState.normalized(amplitudes)
    qubits = _number(merged["qubits"], "qubits", int)
    if qubits < 1:
        raise ValidationError("qubits must be at least 1")

    epsilon = _number(merged["epsilon"], "epsilon")
    if not 0 < epsilon <= 1:
        raise ValidationError(f"epsilon must lie in (0, 1], got {epsilon}")
    theta = Grid.parse(merged["theta"])
    if theta.start < 0 or theta.stop > 90:
        raise ValidationError("theta grid must lie within [0, 90] degrees")
    eps = Grid.parse(merged["eps"])

    relaxation = None
    if merged["t1"] is not None or merged["t2"] is not None:
        if merged["t1"] is None or merged["t2"] is None:
            raise ValidationError("relaxation needs both --t1 and --t2")
        t1s, t2s = _floats(merged["t1"], "t1"), _floats(merged["t2"], "t2")
        duration = _number(merged["duration"], "duration")
        n = qubits if state != "custom" else len(amplitudes).bit_length() - 1
        if len(t1s) == 1:
            t1s = t1s * n
        if len(t2s) == 1:
            t2s = t2s * n
        if len(t1s) != n or len(t2s) != n:
            raise ValidationError(f"need 1 or {n} values for --t1 and --t2")
        relaxation = tuple(RelaxationParams(a, b, duration) for a, b in zip(t1s, t2s))

    shots = None if merged["shots"] in (None, "") else _number(merged["shots"], "shots", int)
    if shots is not None and shots < 1:
        raise ValidationError("shots must be at least 1")
    prep = str(merged["prep"])
    if prep not in ("equilibrium", "direct"):
        raise ValidationError(f"prep must be 'equilibrium' or 'direct', got {prep!r}")
    fmt = str(merged["format"])
    if fmt not in ("csv", "json"):
        raise ValidationError(f"format must be csv or json, got {fmt!r}")

    return RunConfig(
        command=command,
        state=state,
        amplitudes=amplitudes,
        qubits=qubits,
        epsilon=epsilon,
        theta=theta,
        theta_star=_number(merged["theta-star"], "theta-star"),
        eps=eps,
        relaxation=relaxation,
        shots=shots,
        seed=_number(merged["seed"], "seed", int),
        prep=prep,
        inequality=merged["inequality"],
        output=merged["output"],
        format=fmt,
    )


def workers_from_env() -> Optional[int]:
    raw = os.environ.get("BELLSIM_THREADS")
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"BELLSIM_THREADS must be an integer, got {raw!r}") from None
    return max(value, 1)


def _table(cfg: RunConfig, columns, rows, summary=None, extra=None) -> str:
    if cfg.format == "csv":
        comments = {**cfg.provenance(), **(summary or {})}
        comments = {k: v if isinstance(v, str) else json.dumps(rounded(v)) for k, v in comments.items()}
        return render_csv(columns, rows, comments)
    doc = {"config": cfg.provenance(), "columns": list(columns), "records": [dict(zip(columns, r)) for r in rows]}
    if summary:
        doc["summary"] = summary
    if extra:
        doc.update(extra)
    return render_json(doc)


# --- commands -----------------------------------------------------------------


def _ensemble_run(cfg: RunConfig, relaxation=None) -> EnsembleRun:
    return EnsembleRun(
        target=cfg.target(),
        epsilon=cfg.epsilon,
        theta_grid=[math.radians(t) for t in cfg.theta.points()],
        relaxation=relaxation,
        from_equilibrium=cfg.prep == "equilibrium",
        label=cfg.state,
    )


def cmd_chsh_sweep(cfg: RunConfig) -> str:
    _require_two_qubits(cfg)
    run = _ensemble_run(cfg, cfg.relaxation)
    result = bulk_chsh_curve(run, workers=workers_from_env())
    qm = pure_chsh_curve(run.target, run.theta_grid)
    columns = ["theta_deg", "chsh_normalized", "chsh_raw", "qm_prediction", "violated"]
    rows = [
        [math.degrees(r.theta), r.value_normalized, r.value_raw, q, r.violated_normalized]
        for r, q in zip(result.records, qm)
    ]
    if cfg.shots:
        columns += ["chsh_sampled", "chsh_stderr"]
        seen = detected_state(run.target, cfg.relaxation)
        for i, theta in enumerate(run.theta_grid):
            value, err, _ = sample_inequality(chsh_spec(theta), seen, cfg.shots, cfg.seed + i)
            rows[i] += [value, err]
    return _table(cfg, columns, rows)


def cmd_lrhvm_compare(cfg: RunConfig) -> str:
    _require_two_qubits(cfg)
    workers = workers_from_env()
    run = _ensemble_run(cfg)
    bulk = bulk_chsh_curve(run, workers=workers)
    qm = pure_chsh_curve(run.target, run.theta_grid)
    columns = ["theta_deg", "qm_pure", "bulk_ensemble", "abs_diff"]
    rows = [
        [math.degrees(r.theta), q, r.value_normalized, abs(q - r.value_normalized)]
        for r, q in zip(bulk.records, qm)
    ]
    if cfg.relaxation:
        relaxed = bulk_chsh_curve(_ensemble_run(cfg, cfg.relaxation), workers=workers)
        columns.append("bulk_ensemble_relaxed")
        for row, r in zip(rows, relaxed.records):
            row.append(r.value_normalized)
    gate = lrhvm_applicable(cfg.epsilon, run.target.num_qubits)
    summary = {
        "max_abs_diff": max(row[3] for row in rows),
        "separability_bound": gate.bound,
        "lrhvm_applicable": gate.applicable,
        "lrhvm_margin": gate.margin,
    }
    return _table(cfg, columns, rows, summary)


def cmd_polarization_sweep(cfg: RunConfig) -> str:
    _require_two_qubits(cfg)
    target = cfg.target()
    grid = cfg.eps.points()
    if any(not 0 < e <= 1 for e in grid):
        raise ValidationError("polarization grid values must lie in (0, 1]")
    sweep = polarization_sweep(
        target, grid, math.radians(cfg.theta_star), label=cfg.state, workers=workers_from_env()
    )
    n = target.num_qubits
    columns = ["record", "epsilon", "chsh_raw", "chsh_normalized", "violated", "lrhvm_applicable"]
    rows = [
        ["grid", r.epsilon, r.value_raw, r.value_normalized, r.violated_raw, lrhvm_applicable(r.epsilon, n).applicable]
        for r in sweep.records
    ]
    if sweep.threshold_epsilon is not None:
        ec = sweep.threshold_epsilon
        rows.append(["threshold", ec, chsh_spec(0).classical_bound, None, False, lrhvm_applicable(ec, n).applicable])
    summary = {"threshold_epsilon": sweep.threshold_epsilon}
    return _table(cfg, columns, rows, summary)


def _load_inequality(cfg: RunConfig) -> InequalitySpec:
    if not cfg.inequality:
        return chsh_spec(math.radians(cfg.theta_star))
    try:
        with open(cfg.inequality, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read inequality {cfg.inequality!r}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"inequality {cfg.inequality!r} is not JSON: {exc.msg}") from exc
    return InequalitySpec.from_document(doc)


def cmd_bell_eval(cfg: RunConfig) -> str:
    spec = _load_inequality(cfg)
    target = cfg.target()
    if spec.num_observers != target.num_qubits:
        raise ValidationError(
            f"inequality has {spec.num_observers} observers but the state has {target.num_qubits} qubits"
        )
    sample = prepare_bulk(target, cfg.epsilon, cfg.relaxation, cfg.prep == "equilibrium")
    pure = evaluate_inequality(spec, pure_to_density(target))
    terms, value, raw = [], 0.0, 0.0
    for (key, c, e_qm) in pure.per_term:
        e_norm, e_raw = bulk_correlation(sample, spec.term_directions(key))
        value += c * e_norm
        raw += c * e_raw
        terms.append(["-".join(map(str, key)), c, e_norm, e_raw, e_qm])
    columns = ["settings", "coefficient", "e_normalized", "e_raw", "e_qm_pure"]
    summary = {
        "value_normalized": value,
        "value_raw": raw,
        "value_qm_pure": pure.value,
        "bound": spec.classical_bound,
        "violated": is_violation(value, spec.classical_bound),
        "violated_raw": is_violation(raw, spec.classical_bound),
    }
    if cfg.shots:
        sampled, err, _ = sample_inequality(spec, detected_state(target, cfg.relaxation), cfg.shots, cfg.seed)
        summary.update({"value_sampled": sampled, "sampled_stderr": err})
    return _table(cfg, columns, terms, summary, extra={"inequality": spec.to_document()})


def cmd_pps_prep(cfg: RunConfig) -> str:
    target = cfg.target()
    prepared = prepare(target, cfg.epsilon, cfg.prep == "equilibrium").rho
    if cfg.relaxation:
        prepared = relax_polarized(prepared, cfg.epsilon, cfg.relaxation)
    ideal = make_pps(target, cfg.epsilon).rho
    delta = fidelity_delta(prepared, ideal)
    gate = lrhvm_applicable(cfg.epsilon, target.num_qubits)
    summary = {"delta_vs_ideal": delta, "lrhvm_applicable": gate.applicable, "separability_bound": gate.bound}
    m = prepared.matrix
    if cfg.format == "csv":
        rows = [[i, j, m[i, j].real, m[i, j].imag] for i in range(m.shape[0]) for j in range(m.shape[1])]
        return _table(cfg, ["row", "col", "re", "im"], rows, summary)
    doc = {"config": cfg.provenance(), **matrix_to_json(prepared), "summary": summary}
    return render_json(doc)


def cmd_tomography(cfg: RunConfig) -> str:
    target = cfg.target()
    n = target.num_qubits
    sample = prepare_bulk(target, cfg.epsilon, cfg.relaxation, cfg.prep == "equilibrium")
    raw = measure_pauli_expectations(sample.rho)
    # same normalization as the spectra: the strongest line of the |0...0> reference
    lines = sample.reference.line_amplitudes
    scale = float(lines[np.argmax(np.abs(lines))])
    expectations = {k: (1.0 if set(k) == {"I"} else v / scale) for k, v in raw.items()}
    result = tomography_reconstruct(expectations)
    ideal = pure_to_density(target)
    delta = fidelity_delta(result.rho_reconstructed, ideal)
    settings = [s.label for s in tomography_settings(n)]
    report = result.validity
    summary = {
        "settings": settings,
        "delta_vs_ideal": delta,
        "hermiticity_residue": report.hermiticity_residue,
        "trace_deviation": report.trace_deviation,
        "min_eigenvalue": report.min_eigenvalue,
        "valid": report.passed,
    }
    if cfg.format == "csv":
        rows = [[k, v] for k, v in result.pauli_expectations.items()]
        summary["settings"] = " ".join(settings)
        return _table(cfg, ["pauli", "expectation"], rows, summary)
    doc = {
        "config": cfg.provenance(),
        "settings": settings,
        "pauli_expectations": result.pauli_expectations,
        "reconstructed": matrix_to_json(result.rho_reconstructed),
        "deviation_real": np.real(result.rho_reconstructed.matrix - np.eye(2**n) / 2**n).tolist(),
        "summary": summary,
    }
    return render_json(doc)


def _require_two_qubits(cfg: RunConfig) -> None:
    if cfg.num_qubits != 2:
        raise ValidationError(f"{cfg.command} runs CHSH and needs two qubits, got {cfg.num_qubits}")


HANDLERS = {
    "chsh-sweep": cmd_chsh_sweep,
    "bell-eval": cmd_bell_eval,
    "pps-prep": cmd_pps_prep,
    "tomography": cmd_tomography,
    "polarization-sweep": cmd_polarization_sweep,
    "lrhvm-compare": cmd_lrhvm_compare,
}


def _fail(kind: str, message: str, stderr) -> None:
    stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    argv = sys.argv[1:] if argv is None else list(argv)
    if any(a in ("-h", "--help") for a in argv):
        build_parser().print_help(stdout)
        return EXIT_OK
    try:
        cfg = resolve_config(argv)
        text = HANDLERS[cfg.command](cfg)
        emit(text, cfg.output, stdout)
    except ValidationError as exc:
        _fail("validation", str(exc), stderr)
        return EXIT_VALIDATION
    except InvariantError as exc:
        _fail("invariant", str(exc), stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - reported as an internal failure
        _fail("internal", f"{type(exc).__name__}: {exc}", stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
