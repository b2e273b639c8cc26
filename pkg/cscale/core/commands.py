"""
Subcommand handlers
Each handler takes the parsed argparse namespace and returns an exit code;
library errors propagate to main.py, which maps them to exit codes.
"""

import argparse
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from config.detection_config import (
    DetectionConfig,
    EmbeddingOverride,
    build_detection_config,
    load_config_file,
    load_preset,
)
from config.settings import settings
from core.embedding import EmbeddingParams, delay_embed, select_embedding
from core.errors import ContinuityScalingError, UsageError
from core.experiments import is_monotone, sweep_logistic_coupling, sweep_lorenz
from core.generators import (
    LorenzPairSpec,
    add_observation_noise,
    generate_coupled_lorenz,
    generate_logistic_network,
    logistic_pair_spec,
    ring_network_spec,
    tree_network_spec,
    truth_edges,
)
from core.inference import CausalityResult, detect_pair, infer_network, roc_auroc
from core.io import (
    RunManifest,
    curve_dump_name,
    input_record,
    load_manifest,
    network_to_dict,
    package_versions,
    read_edges,
    read_scores,
    read_series_csv,
    result_to_dict,
    roc_to_dict,
    utc_now,
    write_curve_dump,
    write_edges,
    write_json,
    write_points_csv,
    write_series_csv,
    write_table_csv,
)

logger = logging.getLogger(__name__)

# Flags shared by every command that runs detection; also the keys a config file may set
DETECTION_FLAGS = (
    "eps-shrink", "eps-count", "theiler", "dd", "alpha", "segments", "replicates", "seed",
    "embed-dim", "embed-lag", "max-lag", "max-dim", "mi-bins", "fnn-rtol", "fnn-atol", "threads",
)
INPUT_FLAGS = ("input", "cols", "index-col")


def _attr(flag: str) -> str:
    return flag.replace("-", "_")


def parse_list(text: Optional[str], cast=str) -> Optional[List[Any]]:
    """Comma-separated list; `a-b` ranges are expanded for integers."""
    if text is None:
        return None
    items: List[Any] = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        if cast is int and "-" in part[1:]:
            lo, hi = part.split("-", 1)
            items.extend(range(int(lo), int(hi) + 1))
        else:
            items.append(cast(part))
    return items


def merge_flags(args: argparse.Namespace) -> Dict[str, Any]:
    """
    Effective flag values: defaults < preset < config file < command line.

    Args:
        args: Parsed command line

    Returns:
        Flat mapping of long flag name -> value
    """
    flags: Dict[str, Any] = {"threads": settings.threads, "seed": settings.default_seed}
    try:
        if getattr(args, "preset", None):
            flags.update(load_preset(args.preset))
            logger.info(f"Using preset: {args.preset}")
        if getattr(args, "config", None):
            file_values = load_config_file(args.config)
            unknown = sorted(set(file_values) - set(DETECTION_FLAGS) - set(INPUT_FLAGS))
            if unknown:
                logger.warning(f"Ignoring unknown config keys: {unknown}")
            flags.update({k: v for k, v in file_values.items() if k not in unknown})
    except (ValueError, FileNotFoundError) as e:
        raise UsageError(str(e)) from e

    for flag in DETECTION_FLAGS + INPUT_FLAGS:
        value = getattr(args, _attr(flag), None)
        if value is not None:
            flags[flag] = value
    return flags


def resolve_config(flags: Dict[str, Any]) -> DetectionConfig:
    try:
        return build_detection_config(flags)
    except ValueError as e:
        raise UsageError(f"invalid detection settings: {e}") from e


def _flags_for_run(args: argparse.Namespace) -> Tuple[Dict[str, Any], Optional[RunManifest]]:
    """Flags from --from-manifest when given, else from the command line."""
    manifest_path = getattr(args, "from_manifest", None)
    if not manifest_path:
        flags = merge_flags(args)
        if not flags.get("input"):
            raise UsageError("--input is required (or --from-manifest)")
        return flags, None

    manifest = load_manifest(manifest_path)
    if manifest.command != args.command:
        raise UsageError(f"manifest was written by '{manifest.command}', not '{args.command}'")
    logger.info(f"Re-running from manifest {manifest_path} (recorded {manifest.started_at})")
    return dict(manifest.flags), manifest


def _read_inputs(flags: Dict[str, Any], manifest: Optional[RunManifest]):
    cols = flags.get("cols")
    if isinstance(cols, str):
        cols = parse_list(cols)
    series = read_series_csv(flags["input"], cols=cols, index_col=flags.get("index-col"))
    record = input_record(flags["input"], series)
    if manifest is not None and manifest.inputs and manifest.inputs[0].sha256 != record.sha256:
        logger.warning(f"Input {flags['input']} changed since the manifest was written")
    return series, record


def _manifest(command: str, flags: Dict[str, Any], cfg: DetectionConfig, inputs, started_at: str,
              start: float) -> Dict[str, Any]:
    manifest = RunManifest(
        command=command,
        flags=flags,
        config=cfg.model_dump(mode="json"),
        inputs=inputs,
        versions=package_versions(),
        started_at=started_at,
        elapsed_seconds=time.time() - start,
    )
    return manifest.model_dump(mode="json")


def summary_line(result: CausalityResult) -> str:
    verdict = "significant" if result.significant else "not significant"
    return f"{result.cause} -> {result.effect}: slope={result.slope:.6f} p={result.p_value:.4g} {verdict}"


def _dump_curves(curves_dir: Optional[str], results: Sequence[CausalityResult]) -> None:
    if not curves_dir:
        return
    directory = Path(curves_dir)
    directory.mkdir(parents=True, exist_ok=True)
    for result in results:
        write_curve_dump(directory / curve_dump_name(result), result)
    logger.info(f"Wrote {len(results)} curve dumps to {directory}")


def run_detect(args: argparse.Namespace) -> int:
    """Both directions between exactly two series."""
    started_at, start = utc_now(), time.time()
    flags, manifest = _flags_for_run(args)
    cfg = resolve_config(flags)
    series, record = _read_inputs(flags, manifest)
    if len(series) != 2:
        raise UsageError(f"detect needs exactly 2 series, got {len(series)}; use --cols")

    logger.info("=" * 60)
    logger.info(f"[DETECT] {series[0].label} <-> {series[1].label}, seed={cfg.surrogates.master_seed}")
    logger.info("=" * 60)

    results = list(detect_pair(series[0], series[1], cfg))
    for result in results:
        print(summary_line(result))

    write_json(args.out, {
        "command": "detect",
        "results": [result_to_dict(r) for r in results],
        "manifest": _manifest("detect", flags, cfg, [record], started_at, start),
    })
    _dump_curves(args.curves_dir, results)
    return 0


def run_network(args: argparse.Namespace) -> int:
    """All ordered pairs of a table, with optional ROC against truth edges."""
    started_at, start = utc_now(), time.time()
    flags, manifest = _flags_for_run(args)
    cfg = resolve_config(flags)
    series, record = _read_inputs(flags, manifest)
    if len(series) < 2:
        raise UsageError(f"network needs at least 2 series, got {len(series)}")

    network = infer_network(series, cfg)
    for edge in sorted(network.results):
        print(summary_line(network.results[edge]))
    for (cause, effect), message in sorted(network.errors.items()):
        print(f"{cause} -> {effect}: ERROR {message}")

    payload = {"command": "network", **network_to_dict(network)}
    truth_path = getattr(args, "truth", None) or flags.get("truth")
    if truth_path:
        flags["truth"] = truth_path
        truth = read_edges(truth_path)
        unknown = {label for edge in truth for label in edge} - set(network.labels)
        if unknown:
            logger.warning(f"Truth edges name unknown series: {sorted(unknown)}")
        roc = roc_auroc(network.slope_scores(), truth)
        print(f"AUROC: {roc.auroc:.4f}")
        payload["roc"] = roc_to_dict(roc)

    payload["manifest"] = _manifest("network", flags, cfg, [record], started_at, start)
    write_json(args.out, payload)
    _dump_curves(args.curves_dir, [network.results[e] for e in sorted(network.results)])
    return 1 if network.errors else 0


def run_evaluate(args: argparse.Namespace) -> int:
    """ROC of stored scores against a truth edge list."""
    scores = read_scores(args.scores)
    truth = read_edges(args.truth)
    roc = roc_auroc(scores, truth)
    print(f"AUROC: {roc.auroc:.4f}")
    if args.out:
        write_json(args.out, {"command": "evaluate", "roc": roc_to_dict(roc)})
    return 0


def _generate_series(args: argparse.Namespace):
    """Series and true edges for the chosen benchmark system."""
    system = args.system
    if system == "lorenz":
        spec = LorenzPairSpec(
            mu12=args.mu12,
            mu21=args.mu21,
            dt=args.dt,
            omega=args.omega,
            time_shift=args.shift,
            n_samples=args.samples,
            transient_time=args.transient_time,
        )
        series = list(generate_coupled_lorenz(spec))
        edges = set()
        if spec.mu21 != 0.0:
            edges.add(("y1", "y2"))
        if spec.mu12 != 0.0:
            edges.add(("y2", "y1"))
        return series, edges

    if system == "logistic-pair":
        spec = logistic_pair_spec(mu21=args.mu21, mu12=args.mu12, length=args.length, transient=args.transient)
    elif system == "ring":
        spec = ring_network_spec(n_nodes=args.nodes, coupling=args.coupling, length=args.length,
                                 transient=args.transient)
    elif system == "tree":
        spec = tree_network_spec(coupling=args.coupling, length=args.length, transient=args.transient)
    else:
        raise UsageError(f"unknown system {system!r}")
    return generate_logistic_network(spec, seed_for_initials=args.initial_seed), truth_edges(spec)


def run_generate(args: argparse.Namespace) -> int:
    """Write a benchmark system to CSV (and its true links to an edge file)."""
    try:
        series, edges = _generate_series(args)
    except ContinuityScalingError:
        raise
    except ValueError as e:
        raise UsageError(f"invalid generator settings: {e}") from e

    if args.noise:
        noise_seed = args.noise_seed if args.noise_seed is not None else settings.default_seed
        series = [add_observation_noise(s, args.noise, seed=noise_seed + k) for k, s in enumerate(series)]
        logger.info(f"[GENERATE] added observation noise at level {args.noise}")

    write_series_csv(args.out, series)
    if args.truth_out:
        write_edges(args.truth_out, edges)
    print(f"Wrote {len(series)} series of length {len(series[0])} to {args.out}")
    return 0


def run_embed(args: argparse.Namespace) -> int:
    """Report (d, tau) per series, optionally dumping the delay vectors."""
    flags = merge_flags(args)
    if not flags.get("input"):
        raise UsageError("--input is required")
    cfg = resolve_config(flags)
    series, _ = _read_inputs(flags, None)

    report = []
    for s in series:
        override = cfg.embedding_for(s.label)
        entry: Dict[str, Any] = {"label": s.label, "length": len(s)}
        if override is not None:
            params = EmbeddingParams(dimension=override.dimension, lag=override.lag)
            entry["source"] = "override"
        else:
            params, lag_sel, dim_sel = select_embedding(
                s, max_lag=cfg.max_lag, max_dim=cfg.max_dim, bins=cfg.mi_bins,
                rtol=cfg.fnn_rtol, atol=cfg.fnn_atol,
            )
            entry.update({
                "source": "auto",
                "lag_is_local_minimum": lag_sel.is_local_minimum,
                "mi_bins": lag_sel.bins,
                "mi_noise_floor": lag_sel.noise_floor,
                "mi_profile": [float(v) for v in lag_sel.mi_profile],
                "fnn_converged": dim_sel.converged,
                "fnn_fractions": [float(v) for v in dim_sel.fnn_fractions],
            })
        emb = delay_embed(s, params)
        entry.update({"dimension": params.dimension, "lag": params.lag, "points": len(emb)})
        report.append(entry)
        print(f"{s.label}: d={params.dimension} lag={params.lag} ({entry['source']}), T0={len(emb)}")

        if args.dump_points:
            directory = Path(args.dump_points)
            directory.mkdir(parents=True, exist_ok=True)
            write_points_csv(directory / f"points_{s.label}.csv", emb)

    if args.out:
        write_json(args.out, {"command": "embed", "series": report})
    return 0


def run_sweep(args: argparse.Namespace) -> int:
    """Coupling (and sampling) sweeps of the benchmark pairs, written as CSV."""
    flags = merge_flags(args)
    cfg = resolve_config(flags)
    mu21_values = parse_list(args.mu21_values, float)
    seeds = parse_list(args.seeds, int)
    if not mu21_values or not seeds:
        raise UsageError("--mu21 and --seeds must list at least one value")

    if args.system == "logistic":
        if cfg.default_embedding is None:
            cfg = cfg.model_copy(update={"default_embedding": EmbeddingOverride(dimension=3, lag=1)})
        table = sweep_logistic_coupling(mu21_values, seeds, cfg=cfg, length=args.length)
        medians = table.median_forward_slopes()
        for mu, median in medians.items():
            print(f"mu21={mu}: median slope {median:.6f}")
        print(f"monotone: {is_monotone(list(medians.values()))}")
    else:
        omegas = parse_list(args.omega_values, float) or [0.05]
        dimension = cfg.default_embedding.dimension if cfg.default_embedding else 7
        table = sweep_lorenz(mu21_values, omegas, seeds, cfg=cfg, n_samples=args.samples, dimension=dimension)
        for omega in omegas:
            rates = table.detection_rate(cfg.alpha, omega=omega)
            print(f"omega={omega}: detection rate y1->y2 {rates}")

    write_table_csv(args.out, table.records())
    return 0
