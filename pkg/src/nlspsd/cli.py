"""Command-line front end.

Every subcommand except ``quartets`` reads one YAML or JSON experiment file.
The file is validated against :data:`CONFIG_SCHEMA`; schema errors are
reported with the line and column of the offending entry.  All physical
quantities are written as ``{value: ..., unit: ...}``.  Outputs are CSV
tables, JSON summaries and a plain gnuplot script over the CSV files.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml
from jsonschema import Draft202012Validator

from . import __version__
from .kernels import BACKEND
from .models import gn_psd, gn_psd_multispan, kz_psd, kz_psd_multispan
from .oracle import (
    THREADS_ENV,
    DispersionSpec,
    GaussianSampler,
    LinkConfig,
    StepConfig,
    estimate_psd_mc,
    mode_trajectory,
    propagate,
    propagate_spans,
    realization_rng,
)
from .perturbation import perturbation_error_curve
from .quartets import DispersionRelation, enumerate_resonant, write_quartets_csv
from .spectral import Psd, TimeGrid, ensemble_hamiltonian, forward_transform, gaussian_pulse, hamiltonian
from .wdm import (
    SymbolMoments,
    WdmConfig,
    corrected_psds,
    interference_report,
    pulse_basis,
    rrc_basis,
    tone_basis,
)

CSV_VERSION = "1"
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

UNITS = {
    "length": {"1": 1.0, "km": 1.0, "m": 1e-3},
    "time": {"1": 1.0, "s": 1.0, "ns": 1e-9, "ps": 1e-12},
    "loss": {"1": 1.0, "1/km": 1.0, "dB/km": math.log(10.0) / 10.0},
    "gamma": {"1": 1.0, "1/(W km)": 1.0},
    "beta2": {"1": 1.0, "s^2/km": 1.0, "ps^2/km": 1e-24},
    "beta3": {"1": 1.0, "s^3/km": 1.0, "ps^3/km": 1e-36},
    "amplitude": {"1": 1.0, "sqrt(W)": 1.0},
}


def _quantity(kind: str) -> dict:
    return {
        "type": "object",
        "required": ["value", "unit"],
        "additionalProperties": False,
        "properties": {"value": {"type": "number"}, "unit": {"enum": sorted(UNITS[kind])}},
    }


CONFIG_SCHEMA: dict = {
    "type": "object",
    "required": ["grid", "link", "input"],
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "grid": {
            "type": "object",
            "required": ["period", "n"],
            "additionalProperties": False,
            "properties": {"period": _quantity("time"), "n": {"type": "integer", "minimum": 4}},
        },
        "link": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "coeff": {"type": "number"},
                "sign": {"enum": [1, -1]},
                "gamma": _quantity("gamma"),
                "alpha": _quantity("loss"),
                "beta2": _quantity("beta2"),
                "beta3": _quantity("beta3"),
                "span_length": _quantity("length"),
                "n_spans": {"type": "integer", "minimum": 1},
            },
        },
        "input": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["pulse", "gaussian_process", "wdm"]},
                "amplitude": _quantity("amplitude"),
                "width": {"type": "number", "exclusiveMinimum": 0},
                "amplitudes": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "psd": {
                    "type": "object",
                    "required": ["shape"],
                    "additionalProperties": False,
                    "properties": {
                        "shape": {"enum": ["gaussian", "table"]},
                        "amplitude": {"type": "number", "minimum": 0},
                        "width": {"type": "number", "exclusiveMinimum": 0},
                        "values": {"type": "array", "items": {"type": "number", "minimum": 0}},
                    },
                },
                "wdm": {
                    "type": "object",
                    "required": ["users_per_side", "symbols_per_user"],
                    "additionalProperties": False,
                    "properties": {
                        "users_per_side": {"type": "integer", "minimum": 0},
                        "symbols_per_user": {"type": "integer", "minimum": 1},
                        "basis": {"enum": ["tone", "pulse", "rrc"]},
                        "rolloff": {"type": "number", "minimum": 0, "maximum": 1},
                        "symbols": {"enum": ["gaussian", "psk", "qam16"]},
                        "power": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
        },
        "z": _quantity("length"),
        "z_samples": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "modes": {"type": "array", "items": {"type": "integer"}},
        "realizations": {"type": "integer", "minimum": 2},
        "models": {"type": "array", "items": {"enum": ["GN", "KZ"]}},
        "step": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "h": {"type": "number", "exclusiveMinimum": 0},
                "max_phase": {"type": "number", "exclusiveMinimum": 0},
                "min_steps": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "prefix": {"type": "string"}},
        },
    },
}


class ConfigError(ValueError):
    """Invalid experiment file; the message carries file, line and column."""


def _node_at(node: yaml.Node, path: Sequence[Any]) -> yaml.Node:
    for key in path:
        if isinstance(node, yaml.MappingNode):
            match = [v for k, v in node.value if k.value == str(key)]
            if not match:
                break
            node = match[0]
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            break
    return node


def load_config(path: str | Path) -> dict:
    """Parse and validate an experiment file (YAML or JSON).

    Raises
    ------
    ConfigError
        With ``file:line:column`` diagnostics for every schema violation.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else str(path)
        raise ConfigError(f"{where}: {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1:1: top level must be a mapping")
    errors = sorted(Draft202012Validator(CONFIG_SCHEMA).iter_errors(data), key=lambda e: list(e.path))
    if errors:
        lines = []
        for err in errors:
            mark = _node_at(root, list(err.absolute_path)).start_mark
            loc = "/".join(str(p) for p in err.absolute_path) or "<root>"
            lines.append(f"{path}:{mark.line + 1}:{mark.column + 1}: {loc}: {err.message}")
        raise ConfigError("\n".join(lines))
    return data


def _si(q: dict | None, kind: str, default: float | None = None) -> float | None:
    if q is None:
        return default
    return float(q["value"]) * UNITS[kind][q["unit"]]


def _units(cfg: dict) -> list[str]:
    out = []

    def walk(x):
        if isinstance(x, dict):
            if set(x) == {"value", "unit"}:
                out.append(x["unit"])
            for v in x.values():
                walk(v)
        elif isinstance(x, list):
            for v in x:
                walk(v)

    walk(cfg)
    return out


def _dimensionless(cfg: dict) -> bool:
    units = _units(cfg)
    dimless = [u == "1" for u in units]
    if any(dimless) and not all(dimless):
        raise ConfigError("mixing dimensionless ('1') and physical units is not allowed")
    return all(dimless)


@dataclass
class Experiment:
    """Typed view of a validated config."""

    raw: dict
    grid: TimeGrid
    link: LinkConfig
    z: float
    seed: int
    step: StepConfig
    dimensionless: bool

    @classmethod
    def from_dict(cls, cfg: dict) -> "Experiment":
        dimless = _dimensionless(cfg)
        g = cfg["grid"]
        try:
            grid = TimeGrid(_si(g["period"], "time"), g["n"])
            link = _link(cfg.get("link", {}), dimless)
        except ValueError as exc:
            raise ConfigError(f"grid/link: {exc}") from exc
        z = _si(cfg.get("z"), "length", 1.0)
        if link.span_length is not None and "z" not in cfg:
            z = link.total_length
        st = cfg.get("step", {})
        step = StepConfig(
            h=st.get("h"), max_phase=st.get("max_phase", 0.05), min_steps=st.get("min_steps", 200)
        )
        return cls(cfg, grid, link, z, int(cfg.get("seed", 0)), step, dimless)

    def base_psd(self) -> Psd:
        inp = self.raw["input"]
        if inp["kind"] == "wdm":
            return self.wdm().base_psd()
        if inp["kind"] != "gaussian_process" or "psd" not in inp:
            raise ConfigError("this command needs input.kind 'gaussian_process' with a psd entry")
        psd = inp["psd"]
        if psd["shape"] == "table":
            vals = np.asarray(psd.get("values", []), dtype=np.float64)
            if vals.size != self.grid.n:
                raise ConfigError(f"input.psd.values needs {self.grid.n} entries, got {vals.size}")
            return Psd(self.grid, vals)
        amp = float(psd.get("amplitude", 1.0))
        width = float(psd.get("width", 1.0))
        return Psd(self.grid, amp**2 * np.exp(-((self.grid.omega / width) ** 2)))

    def pulse(self, amplitude: float | None = None):
        inp = self.raw["input"]
        amp = amplitude if amplitude is not None else _si(inp.get("amplitude"), "amplitude", 1.0)
        return gaussian_pulse(self.grid, amp, float(inp.get("width", 1.0)))

    def wdm(self) -> WdmConfig:
        w = self.raw["input"].get("wdm")
        if w is None:
            raise ConfigError("input.wdm is required for WDM inputs")
        m = w["symbols_per_user"]
        kind = w.get("basis", "pulse")
        basis = {"tone": lambda: tone_basis(m), "pulse": lambda: pulse_basis(m),
                 "rrc": lambda: rrc_basis(m, w.get("rolloff", 0.5))}[kind]()
        moments = SymbolMoments.named(w.get("symbols", "gaussian"), w.get("power", 1.0))
        try:
            return WdmConfig(w["users_per_side"], basis, moments, self.grid.period, self.grid.n)
        except ValueError as exc:
            raise ConfigError(f"input.wdm: {exc}") from exc


def _link(spec: dict, dimless: bool) -> LinkConfig:
    span = _si(spec.get("span_length"), "length")
    kw = dict(
        alpha=_si(spec.get("alpha"), "loss", 0.0),
        sign=spec.get("sign", 1),
        span_length=span,
        n_spans=spec.get("n_spans", 1),
    )
    if dimless and "beta2" not in spec:
        if "gamma" in spec:
            raise ConfigError("dimensionless links set 'coeff', not 'gamma'")
        return LinkConfig.dimensionless(spec.get("coeff", 1.0), **kw)
    beta2 = _si(spec.get("beta2"), "beta2", 0.0)
    beta3 = _si(spec.get("beta3"), "beta3", 0.0)
    return LinkConfig(DispersionSpec.from_beta(beta2, beta3), gamma=_si(spec.get("gamma"), "gamma", 1.0), **kw)


class Output:
    """Writes deterministic CSV/JSON files and a gnuplot script to one directory."""

    def __init__(self, directory: str | Path, prefix: str):
        self.dir = Path(directory)
        self.prefix = prefix
        self.dir.mkdir(parents=True, exist_ok=True)
        self.plots: list[str] = []

    def path(self, name: str) -> Path:
        return self.dir / f"{self.prefix}{name}"

    def csv(self, name: str, header: Sequence[str], rows, plot: tuple[int, Sequence[int]] | None = None):
        p = self.path(name)
        with p.open("w", newline="") as fh:
            fh.write(f"# nlspsd csv v{CSV_VERSION}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        if plot is not None:
            x, ys = plot
            parts = [f"'{p.name}' using {x + 1}:{y + 1} with lines title '{header[y]}'" for y in ys]
            self.plots.append("plot " + ", \\\n     ".join(parts))
        return p

    def json(self, name: str, data: dict) -> Path:
        p = self.path(name)
        p.write_text(json.dumps(data, indent=2, sort_keys=True, default=_fmt) + "\n")
        return p

    def close(self) -> None:
        if not self.plots:
            return
        lines = ["# gnuplot script; run from this directory", "set datafile separator ','",
                 "set key autotitle columnhead"]
        for i, cmd in enumerate(self.plots):
            lines += [f"set term pngcairo size 800,500", f"set output '{self.prefix}plot{i}.png'", cmd]
        self.path("plot.gp").write_text("\n".join(lines) + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_fmt(x) for x in v.tolist()]
    return v


def _mc(exp: Experiment, psd: Psd, realizations: int, through_spans: bool):
    return estimate_psd_mc(
        GaussianSampler(psd), exp.link, None if through_spans else exp.z, realizations, exp.seed, exp.step
    )


def cmd_oracle(exp: Experiment, out: Output, args) -> dict:
    inp = exp.raw["input"]
    if inp["kind"] == "pulse":
        sig = exp.pulse()
    elif inp["kind"] == "gaussian_process":
        from .spectral import Spectrum, inverse_transform

        q0 = GaussianSampler(exp.base_psd()).draw(realization_rng(exp.seed, 0))
        sig = inverse_transform(Spectrum(exp.grid, q0))
    else:
        raise ConfigError("oracle supports pulse and gaussian_process inputs")
    spans = exp.link.span_length is not None
    res = propagate_spans(sig, exp.link, exp.step) if spans else propagate(sig, exp.link, exp.z, exp.step)
    c0, c1 = forward_transform(sig).coeffs, forward_transform(res).coeffs
    out.csv("oracle.csv", ["k", "abs_q0", "abs_qz"],
            zip(exp.grid.modes, np.abs(c0), np.abs(c1)), plot=(0, [1, 2]))
    e0, e1 = float(np.sum(np.abs(c0) ** 2)), float(np.sum(np.abs(c1) ** 2))
    summary = {"energy_in": e0, "energy_out": e1, "relative_drift": abs(e1 - e0) / e0 if e0 else 0.0}
    if e1 > 0:
        summary["hamiltonian_ratio_out"] = hamiltonian(res).ratio
    out.json("oracle.json", summary)
    return summary


def _model_rows(exp: Experiment, names: Sequence[str]):
    s0 = exp.base_psd()
    multispan = exp.link.span_length is not None
    res = {}
    for name in names:
        if multispan:
            fn = gn_psd_multispan if name == "GN" else kz_psd_multispan
            res[name] = fn(s0, exp.link)
        elif exp.dimensionless and exp.link.alpha == 0 and exp.link.n_spans == 1:
            fn = gn_psd if name == "GN" else kz_psd
            res[name] = fn(s0, exp.z, exp.link.gamma / 2.0)
        else:
            raise ConfigError("physical single-span models need link.span_length")
    return s0, res


def _cmd_model(name: str):
    def run(exp: Experiment, out: Output, args) -> dict:
        s0, res = _model_rows(exp, [name])
        tot = res[name].total.values
        low = name.lower()
        out.csv(f"{low}.csv", ["k", "S0", f"S_{name}", "correction"],
                zip(exp.grid.modes, s0.values, tot, res[name].correction), plot=(0, [1, 2]))
        return {"model": name, "input_power": s0.total, "output_power": float(np.sum(tot))}

    return run


def cmd_compare(exp: Experiment, out: Output, args) -> dict:
    s0, res = _model_rows(exp, ["GN", "KZ"])
    real = args.realizations or exp.raw.get("realizations", 1000)
    mc, err = _mc(exp, s0, real, exp.link.span_length is not None)
    gn, kz = res["GN"].total.values, res["KZ"].total.values
    out.csv("compare.csv", ["k", "S0", "S_GN", "S_KZ", "S_MC", "stderr"],
            zip(exp.grid.modes, s0.values, gn, kz, mc.values, err), plot=(0, [1, 2, 3, 4]))
    summary = {
        "realizations": real,
        "l2_gn_mc": float(np.linalg.norm(gn - mc.values)),
        "l2_kz_mc": float(np.linalg.norm(kz - mc.values)),
    }
    out.json("compare.json", summary)
    print(f"L2(GN-MC)={summary['l2_gn_mc']:.6g} L2(KZ-MC)={summary['l2_kz_mc']:.6g}")
    return summary


def cmd_perturb(exp: Experiment, out: Output, args) -> dict:
    amps = exp.raw["input"].get("amplitudes") or [round(0.1 * i, 10) for i in range(1, 11)]
    rows = perturbation_error_curve(amps, exp.z, exp.grid, step=exp.step)
    out.csv("perturb.csv", ["amplitude", "a", "e"],
            [(r.amplitude, r.ratio, r.error) for r in rows], plot=(1, [2]))
    return {"points": len(rows), "max_error": max(r.error for r in rows)}


def cmd_modes(exp: Experiment, out: Output, args) -> dict:
    zs = exp.raw.get("z_samples") or list(np.linspace(0.0, exp.z, 51))
    modes = exp.raw.get("modes") or [0, exp.grid.n // 2 - 1]
    tr = mode_trajectory(exp.pulse(), exp.link, zs, modes, exp.step)
    header = ["z"] + [f"abs_q[{m}]" for m in modes] + ["energy"]
    rows = [[z, *mag, e] for z, mag, e in zip(tr.z, tr.magnitudes, tr.energy)]
    out.csv("modes.csv", header, rows, plot=(0, list(range(1, len(modes) + 1))))
    drift = float(np.max(np.abs(tr.energy - tr.energy[0])) / tr.energy[0])
    return {"samples": len(zs), "max_energy_drift": drift}


def cmd_wdm(exp: Experiment, out: Output, args) -> dict:
    cfg = exp.wdm()
    models = exp.raw.get("models") or ["GN", "KZ"]
    coeff = exp.link.gamma / 2.0
    cols, header = [exp.grid.modes, cfg.base_psd().values], ["k", "S0"]
    reports = {}
    for name in models:
        res = corrected_psds(cfg, exp.z, name, coeff)
        header += [f"S_{name}", f"S_{name}_gaussian"]
        cols += [res.total.values, res.base.values + res.components["base"]]
        reports[name] = interference_report(cfg, exp.z, name, coeff)
        reports[name]["s4"], reports[name]["s6"] = res.params["s4"], res.params["s6"]
    out.csv("wdm.csv", header, zip(*cols), plot=(0, list(range(1, len(header)))))
    out.json("wdm.json", reports)
    return {"models": models}


def cmd_multispan(exp: Experiment, out: Output, args) -> dict:
    if exp.link.span_length is None:
        raise ConfigError("multispan needs link.span_length and link.n_spans")
    s0, res = _model_rows(exp, ["GN", "KZ"])
    cols = [exp.grid.modes, s0.values, res["GN"].total.values, res["KZ"].total.values]
    header = ["k", "S0", "S_GN", "S_KZ"]
    summary = {"n_spans": exp.link.n_spans}
    if args.realizations:
        mc, err = _mc(exp, s0, args.realizations, True)
        cols += [mc.values, err]
        header += ["S_MC", "stderr"]
        summary["l2_gn_mc"] = float(np.linalg.norm(cols[2] - mc.values))
        summary["l2_kz_mc"] = float(np.linalg.norm(cols[3] - mc.values))
    out.csv("multispan.csv", header, zip(*cols), plot=(0, list(range(1, len(header) - ("stderr" in header)))))
    out.json("multispan.json", summary)
    return summary


def cmd_quartets(args) -> int:
    zeta = DispersionRelation.parse(args.zeta)
    quartets = enumerate_resonant(zeta, args.box)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_quartets_csv(quartets, zeta, fh)
    else:
        write_quartets_csv(quartets, zeta, sys.stdout)
    return 0


COMMANDS = {
    "oracle": cmd_oracle,
    "gn": _cmd_model("GN"),
    "kz": _cmd_model("KZ"),
    "compare": cmd_compare,
    "perturb": cmd_perturb,
    "modes": cmd_modes,
    "wdm": cmd_wdm,
    "multispan": cmd_multispan,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlspsd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND})")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="YAML or JSON experiment file")
        sp.add_argument("-o", "--out-dir", help="output directory (overrides output.dir)")
        sp.add_argument("--threads", type=int, help=f"worker threads (overrides ${THREADS_ENV})")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("-R", "--realizations", type=int, help="Monte-Carlo realizations")
    q = sub.add_parser("quartets", help="enumerate resonant quartets")
    q.add_argument("--zeta", required=True, help="integer dispersion polynomial, e.g. 'k^3+3k^2'")
    q.add_argument("--box", type=int, required=True, help="index bound K")
    q.add_argument("--out", help="CSV path (default stdout)")
    return p


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "quartets":
            if args.box < 1:
                raise ConfigError("--box must be >= 1")
            return cmd_quartets(args)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            os.environ[THREADS_ENV] = str(args.threads)
        raw = load_config(args.config)
        if args.seed is not None:
            raw["seed"] = args.seed
        exp = Experiment.from_dict(raw)
        o = raw.get("output", {})
        out = Output(args.out_dir or o.get("dir", "."), o.get("prefix", ""))
        summary = COMMANDS[args.command](exp, out, args)
        out.close()
    except ConfigError as exc:
        print(f"nlspsd: config error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError, RuntimeError, OverflowError) as exc:
        print(f"nlspsd {args.command}: {type(exc).__module__}.{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if summary:
        print(json.dumps(summary, sort_keys=True, default=_fmt))
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
