"""Command-line entry points: run, compare, calibrate.

Scenario files are YAML documents validated against a closed schema; unknown
keys are rejected and every diagnostic carries the file and line it came
from. All tables are plain CSV with full-precision floats.
"""

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from .corrmodels import CorrelationModelSpec
from .errors import CorrDivError, InvalidParameterError, ScenarioError
from .montecarlo import (
    Scenario,
    empirical_cdf,
    percentile,
    pooled_expected_snr_db,
    run_scenario,
)
from .propagation import (
    GeometryConfig,
    MeasuredAngularModel,
    calibrate_attenuation_constant,
)

_TOP_KEYS = {"m", "l", "rho_t_db", "sigma2", "model", "geometry", "run"}
_MODEL_KEYS = {
    "type",
    "xi",
    "phase_range_deg",
    "angular_spread_deg",
    "mean_doa",
    "spacing_wavelengths",
    "measured",
}
_MEASURED_KEYS = {"spread_mean_deg", "spread_std_deg", "spread_floor_deg"}
_GEOMETRY_KEYS = {
    "cell_radius_m",
    "reference_distance_m",
    "alpha",
    "sigma_sh_db",
    "attenuation_constant",
    "calibrate",
}
_RUN_KEYS = {"n_drops", "n_fading", "seed"}


def _collect_marks(node, path, marks):
    marks[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            _collect_marks(value_node, path + (key_node.value,), marks)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _collect_marks(item, path + (i,), marks)


class _Parser:
    """Schema walker that turns violations into located ScenarioErrors."""

    def __init__(self, path, data, marks):
        self.path = str(path)
        self.data = data
        self.marks = marks

    def fail(self, keys, message):
        label = ".".join(str(k) for k in keys) if keys else "document"
        raise ScenarioError(f"{label}: {message}", path=self.path, line=self.marks.get(keys))

    def mapping(self, value, keys, allowed, required):
        if not isinstance(value, dict):
            self.fail(keys, "expected a mapping")
        for key in value:
            if key not in allowed:
                self.fail(keys + (key,), f"unknown key {key!r}")
        for key in required:
            if key not in value:
                self.fail(keys, f"missing required key {key!r}")
        return value

    def number(self, mapping, keys, key, default=None):
        if key not in mapping:
            if default is None:
                self.fail(keys, f"missing required key {key!r}")
            return default
        value = mapping[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(keys + (key,), f"expected a number, got {value!r}")
        return float(value)

    def integer(self, mapping, keys, key):
        if key not in mapping:
            self.fail(keys, f"missing required key {key!r}")
        value = mapping[key]
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(keys + (key,), f"expected an integer, got {value!r}")
        return value


def _parse_model(p: _Parser, raw) -> CorrelationModelSpec:
    keys = ("model",)
    raw = p.mapping(raw, keys, _MODEL_KEYS, {"type"})
    variant = raw["type"]
    if variant not in ("exponential", "clerckx", "one_ring"):
        p.fail(keys + ("type",), f"unknown model type {variant!r}")

    allowed_for = {
        "exponential": {"type", "xi"},
        "clerckx": {"type", "xi", "phase_range_deg"},
        "one_ring": {"type", "angular_spread_deg", "mean_doa", "spacing_wavelengths", "measured"},
    }[variant]
    for key in raw:
        if key not in allowed_for:
            p.fail(keys + (key,), f"key {key!r} does not apply to model type {variant!r}")

    kwargs = {"variant": variant}
    if variant in ("exponential", "clerckx"):
        xi = p.number(raw, keys, "xi")
        if not 0 <= xi <= 1:
            p.fail(keys + ("xi",), f"xi must be in [0, 1], got {xi}")
        kwargs["xi"] = xi
    if variant == "clerckx":
        rng = raw.get("phase_range_deg")
        if (
            not isinstance(rng, list)
            or len(rng) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in rng)
        ):
            p.fail(keys + ("phase_range_deg",), "expected a [low, high] pair of numbers")
        kwargs["phase_range_deg"] = (float(rng[0]), float(rng[1]))
    if variant == "one_ring":
        if "angular_spread_deg" not in raw:
            p.fail(keys, "missing required key 'angular_spread_deg'")
        spread = raw["angular_spread_deg"]
        if isinstance(spread, str):
            if spread != "measured":
                p.fail(keys + ("angular_spread_deg",), f"expected a number or 'measured', got {spread!r}")
            kwargs["angular_spread_deg"] = spread
        elif isinstance(spread, bool) or not isinstance(spread, (int, float)):
            p.fail(keys + ("angular_spread_deg",), f"expected a number or 'measured', got {spread!r}")
        else:
            kwargs["angular_spread_deg"] = float(spread)
        doa = raw.get("mean_doa", "uniform")
        if isinstance(doa, str):
            if doa != "uniform":
                p.fail(keys + ("mean_doa",), f"expected a number or 'uniform', got {doa!r}")
            kwargs["mean_doa_deg"] = doa
        elif isinstance(doa, bool) or not isinstance(doa, (int, float)):
            p.fail(keys + ("mean_doa",), f"expected a number or 'uniform', got {doa!r}")
        else:
            kwargs["mean_doa_deg"] = float(doa)
        kwargs["spacing_wavelengths"] = p.number(raw, keys, "spacing_wavelengths", default=0.5)
        if "measured" in raw and raw["angular_spread_deg"] != "measured":
            p.fail(keys + ("measured",), "measured block requires angular_spread_deg: measured")

    try:
        return CorrelationModelSpec(**kwargs)
    except InvalidParameterError as exc:
        p.fail(keys, str(exc))


def _parse_measured(p: _Parser, raw) -> MeasuredAngularModel:
    keys = ("model", "measured")
    raw = p.mapping(raw, keys, _MEASURED_KEYS, set())
    try:
        return MeasuredAngularModel(
            spread_mean_deg=p.number(raw, keys, "spread_mean_deg", default=14.02),
            spread_std_deg=p.number(raw, keys, "spread_std_deg", default=6.45),
            spread_floor_deg=p.number(raw, keys, "spread_floor_deg", default=1.0),
        )
    except InvalidParameterError as exc:
        p.fail(keys, str(exc))


def _parse_geometry(p: _Parser, raw):
    keys = ("geometry",)
    raw = p.mapping(raw, keys, _GEOMETRY_KEYS, set())
    calibrate = raw.get("calibrate", False)
    if not isinstance(calibrate, bool):
        p.fail(keys + ("calibrate",), f"expected true or false, got {calibrate!r}")
    if calibrate and "attenuation_constant" in raw:
        p.fail(keys, "give either attenuation_constant or calibrate: true, not both")
    if not calibrate and "attenuation_constant" not in raw:
        p.fail(keys, "geometry needs attenuation_constant or calibrate: true")
    try:
        config = GeometryConfig(
            cell_radius_m=p.number(raw, keys, "cell_radius_m", default=500.0),
            reference_distance_m=p.number(raw, keys, "reference_distance_m", default=50.0),
            attenuation_exponent=p.number(raw, keys, "alpha", default=3.67),
            shadowing_std_db=p.number(raw, keys, "sigma_sh_db", default=6.0),
            attenuation_constant=(
                1.0 if calibrate else p.number(raw, keys, "attenuation_constant")
            ),
        )
    except InvalidParameterError as exc:
        p.fail(keys, str(exc))
    return config, calibrate


def load_scenario_file(path):
    """Parse and validate a scenario file.

    Returns ``(scenario, wants_calibration)``. The scenario carries a
    placeholder attenuation constant of 1.0 when calibration was requested.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}", path=str(path))
    try:
        data = yaml.safe_load(text)
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError(
            f"invalid YAML: {str(exc).strip()}",
            path=str(path),
            line=None if mark is None else mark.line + 1,
        )
    marks = {}
    if node is not None:
        _collect_marks(node, (), marks)
    p = _Parser(path, data, marks)

    data = p.mapping(data, (), _TOP_KEYS, {"m", "l", "model", "geometry", "run"})
    m = p.integer(data, (), "m")
    l = p.integer(data, (), "l")
    rho_t_db = p.number(data, (), "rho_t_db", default=0.0)
    sigma2 = p.number(data, (), "sigma2", default=1.0)

    model = _parse_model(p, data["model"])
    measured = None
    if isinstance(data["model"], dict) and "measured" in data["model"]:
        measured = _parse_measured(p, data["model"]["measured"])
    geometry, wants_calibration = _parse_geometry(p, data["geometry"])

    run_keys = ("run",)
    run_raw = p.mapping(data["run"], run_keys, _RUN_KEYS, _RUN_KEYS)
    n_drops = p.integer(run_raw, run_keys, "n_drops")
    n_fading = p.integer(run_raw, run_keys, "n_fading")
    seed = p.integer(run_raw, run_keys, "seed")

    try:
        scenario = Scenario(
            m=m,
            l=l,
            model=model,
            n_drops=n_drops,
            n_fading=n_fading,
            seed=seed,
            rho_t_db=rho_t_db,
            sigma2=sigma2,
            geometry=geometry,
            measured_model=measured,
        )
    except InvalidParameterError as exc:
        p.fail((), str(exc))
    return scenario, wants_calibration


def scenario_to_dict(scenario: Scenario) -> dict:
    """Serializable scenario in the file schema (attenuation resolved)."""
    model = scenario.model
    model_doc = {"type": model.variant}
    if model.variant in ("exponential", "clerckx"):
        model_doc["xi"] = model.xi
    if model.variant == "clerckx":
        model_doc["phase_range_deg"] = list(model.phase_range_deg)
    if model.variant == "one_ring":
        model_doc["angular_spread_deg"] = model.angular_spread_deg
        model_doc["mean_doa"] = model.mean_doa_deg
        model_doc["spacing_wavelengths"] = model.spacing_wavelengths
        if model.angular_spread_deg == "measured":
            mm = scenario.measured_model
            model_doc["measured"] = {
                "spread_mean_deg": mm.spread_mean_deg,
                "spread_std_deg": mm.spread_std_deg,
                "spread_floor_deg": mm.spread_floor_deg,
            }
    return {
        "m": scenario.m,
        "l": scenario.l,
        "rho_t_db": scenario.rho_t_db,
        "sigma2": scenario.sigma2,
        "model": model_doc,
        "geometry": {
            "cell_radius_m": scenario.geometry.cell_radius_m,
            "reference_distance_m": scenario.geometry.reference_distance_m,
            "alpha": scenario.geometry.attenuation_exponent,
            "sigma_sh_db": scenario.geometry.shadowing_std_db,
            "attenuation_constant": scenario.geometry.attenuation_constant,
        },
        "run": {
            "n_drops": scenario.n_drops,
            "n_fading": scenario.n_fading,
            "seed": scenario.seed,
        },
    }


def _fmt(value) -> str:
    return format(float(value), ".17g")


def _resolve_attenuation(scenario: Scenario) -> float:
    """Calibrate A on the reference configuration under this scenario's
    geometry, noise power, seed, and Monte Carlo sizes."""
    baseline = Scenario(
        m=64,
        l=6,
        model=CorrelationModelSpec(variant="exponential", xi=0.9),
        n_drops=scenario.n_drops,
        n_fading=scenario.n_fading,
        seed=scenario.seed,
        rho_t_db=0.0,
        sigma2=scenario.sigma2,
        geometry=replace(scenario.geometry, attenuation_constant=1.0),
        radial_law=scenario.radial_law,
    )
    return calibrate_attenuation_constant(baseline)


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    return scenario


def _write_drops_table(path, result):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "drop",
                "terminal",
                "distance_m",
                "beta_db",
                "expected_snr_sim_db",
                "expected_snr_cf_db",
                "trace_sq",
            ]
        )
        for drop in result.drops:
            beta_db = 10.0 * np.log10(drop.link_gains)
            for term in range(drop.link_gains.size):
                writer.writerow(
                    [
                        drop.drop_index,
                        term,
                        _fmt(drop.distances_m[term]),
                        _fmt(beta_db[term]),
                        _fmt(drop.per_terminal_expected_snr_db[term]),
                        _fmt(drop.per_terminal_closed_form_snr_db[term]),
                        _fmt(drop.trace_sq),
                    ]
                )


def _write_summary_table(path, summary):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["metric", "value"])
        for key, value in summary.items():
            writer.writerow([key, value if isinstance(value, int) else _fmt(value)])


def _write_manifest(path, scenario):
    with open(path, "w") as handle:
        yaml.safe_dump(scenario_to_dict(scenario), handle, sort_keys=False)


def cmd_run(args) -> int:
    scenario, wants_calibration = load_scenario_file(args.scenario)
    scenario = _apply_overrides(scenario, args)
    if wants_calibration:
        constant = _resolve_attenuation(scenario)
        scenario = replace(
            scenario, geometry=replace(scenario.geometry, attenuation_constant=constant)
        )
    result = run_scenario(scenario, workers=args.workers)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_drops_table(out / "drops.csv", result)
    _write_summary_table(out / "summary.csv", result.summary)
    _write_manifest(out / "manifest.yaml", scenario)
    print(f"wrote {out / 'drops.csv'}, {out / 'summary.csv'}, {out / 'manifest.yaml'}")
    print(
        "median expected SNR "
        f"{result.summary['expected_snr_db_median']:.3f} dB over "
        f"{result.summary['n_drops_completed']} drops"
    )
    return 0


def _compatibility_signature(scenario: Scenario, wants_calibration: bool):
    return (
        scenario.m,
        scenario.l,
        scenario.seed,
        scenario.geometry,
        wants_calibration,
        scenario.n_drops,
        scenario.n_fading,
    )


def cmd_compare(args) -> int:
    paths = args.scenario
    if len(paths) < 2:
        raise ScenarioError("compare needs at least two --scenario files")
    parsed = [load_scenario_file(p) for p in paths]
    scenarios = [_apply_overrides(s, args) for s, _ in parsed]
    flags = [w for _, w in parsed]

    signatures = {_compatibility_signature(s, w) for s, w in zip(scenarios, flags)}
    if len(signatures) > 1:
        raise ScenarioError(
            "scenarios are incompatible: M, L, seed, geometry and run sizes must match"
        )
    if flags[0]:
        constant = _resolve_attenuation(scenarios[0])
        scenarios = [
            replace(s, geometry=replace(s.geometry, attenuation_constant=constant))
            for s in scenarios
        ]

    labels = []
    for i, p in enumerate(paths):
        stem = Path(p).stem
        labels.append(stem if stem not in labels else f"{stem}#{i}")

    results = [run_scenario(s, workers=args.workers) for s in scenarios]
    pooled = [pooled_expected_snr_db(r) for r in results]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "cdf.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["scenario", "expected_snr_db", "cdf_prob"])
        for label, samples in zip(labels, pooled):
            for value, prob in empirical_cdf(samples):
                writer.writerow([label, _fmt(value), _fmt(prob)])

    gain_rows = []
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            diff = pooled[j] - pooled[i]
            gain_rows.append(
                (
                    labels[i],
                    labels[j],
                    percentile(diff, 50.0),
                    percentile(pooled[j], 50.0) - percentile(pooled[i], 50.0),
                )
            )
    with open(out / "gains.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["baseline", "alternative", "median_gain_db", "delta_median_db"])
        for base, alt, gain, delta in gain_rows:
            writer.writerow([base, alt, _fmt(gain), _fmt(delta)])

    for base, alt, gain, _ in gain_rows:
        print(f"median gain of {alt} over {base}: {gain:.3f} dB")
    print(f"wrote {out / 'cdf.csv'}, {out / 'gains.csv'}")
    return 0


def cmd_calibrate(args) -> int:
    scenario, wants_calibration = load_scenario_file(args.scenario)
    if not wants_calibration:
        raise ScenarioError(
            "geometry.calibrate: true is required for the calibrate command",
            path=str(args.scenario),
        )
    scenario = _apply_overrides(scenario, args)
    constant = _resolve_attenuation(scenario)
    resolved = replace(
        scenario, geometry=replace(scenario.geometry, attenuation_constant=constant)
    )

    # measure the achieved percentile at the calibrated constant
    from .montecarlo import collect_instantaneous_snr_db

    baseline = Scenario(
        m=64,
        l=6,
        model=CorrelationModelSpec(variant="exponential", xi=0.9),
        n_drops=resolved.n_drops,
        n_fading=resolved.n_fading,
        seed=resolved.seed,
        rho_t_db=0.0,
        sigma2=resolved.sigma2,
        geometry=resolved.geometry,
        radial_law=resolved.radial_law,
    )
    achieved = percentile(collect_instantaneous_snr_db(baseline, workers=args.workers), 5.0)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    resolved_path = out / f"{Path(args.scenario).stem}.resolved.yaml"
    _write_manifest(resolved_path, resolved)
    print(f"attenuation_constant: {_fmt(constant)}")
    print(f"achieved 5th percentile of instantaneous ZF SNR: {achieved:.6f} dB")
    print(f"wrote {resolved_path}")
    return 0


def _build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrdiv",
        description=(
            "Monte Carlo engine for downlink zero-forcing MU-MIMO under "
            "per-terminal correlation diversity"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario and write result tables")
    run_p.add_argument("--scenario", required=True, help="scenario YAML file")
    run_p.add_argument("--out", default=".", help="output directory")
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run_p.add_argument("--workers", type=int, default=1, help="drop-level worker processes")
    run_p.set_defaults(handler=cmd_run)

    cmp_p = sub.add_parser("compare", help="run several scenarios and report pairwise gains")
    cmp_p.add_argument(
        "--scenario",
        action="append",
        required=True,
        help="scenario YAML file (repeat for each scenario)",
    )
    cmp_p.add_argument("--out", default=".", help="output directory")
    cmp_p.add_argument("--seed", type=int, default=None, help="override every scenario seed")
    cmp_p.add_argument("--workers", type=int, default=1, help="drop-level worker processes")
    cmp_p.set_defaults(handler=cmd_compare)

    cal_p = sub.add_parser("calibrate", help="calibrate the attenuation constant")
    cal_p.add_argument("--scenario", required=True, help="scenario YAML file with calibrate: true")
    cal_p.add_argument("--out", default=".", help="output directory for the resolved scenario")
    cal_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    cal_p.add_argument("--workers", type=int, default=1, help="drop-level worker processes")
    cal_p.set_defaults(handler=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = _build_arg_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CorrDivError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
