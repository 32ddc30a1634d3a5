# ramdp/commands.py

import logging
from pathlib import Path

from . import database
from .config_loader import CFG, get_base_dir, get_worker_count
from .environments import ENVIRONMENTS, export_environment
from .experiment_config import (
    ConfigError,
    dump_experiment_config,
    load_experiment_config,
    parse_experiment_config,
    save_experiment_config,
    with_overrides,
)
from .harness import aggregate, run_experiment
from .model_io import load_model, save_policy
from .models import Direction, Mdp, ModelError, Semantics, SpecKind, Specification
from .results_io import AGGREGATE_FILE, RECORDS_FILE, write_aggregate_csv, write_records_csv
from .solver import solve_model

logger = logging.getLogger('Ramdp')

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

SPEC_KINDS = {
    "pmax": (False, Direction.MAX),
    "pmin": (False, Direction.MIN),
    "rmax": (True, Direction.MAX),
    "rmin": (True, Direction.MIN),
}


def _resolve_dir(path, setting):
    if path:
        return Path(path)
    configured = Path(CFG["paths"].get(setting, "results"))
    return configured if configured.is_absolute() else Path(get_base_dir()) / configured


def _store_run(db_path, config, records):
    run_id = database.insert_run(db_path, dump_experiment_config(config), config.seed)
    database.insert_records(db_path, run_id, records)
    return run_id


def _write_outputs(records, out_dir, what):
    write_records_csv(records, out_dir / RECORDS_FILE)
    try:
        write_aggregate_csv(aggregate(records), out_dir / AGGREGATE_FILE)
    except ValueError as e:
        logger.warning(f"⚠️ Skipping aggregate.csv for {what}: {e}")


def cmd_run(config_path, out_dir=None, seed=None, workers=None, db_path=None, timing=False):
    try:
        config = load_experiment_config(config_path)
    except ConfigError as e:
        logger.error(f"❌ {e}")
        return EXIT_CONFIG

    config = with_overrides(config, seed=seed, record_timing=True if timing else None)
    workers = get_worker_count(workers if workers is not None else config.workers)
    out_dir = _resolve_dir(out_dir, "results_dir")
    db_path = db_path or CFG["paths"].get("db_path") or None

    try:
        records, failures = run_experiment(config, workers)
    except Exception as e:
        logger.error(f"❌ Experiment {config_path} aborted: {e}", exc_info=True)
        return EXIT_RUNTIME
    total = len(config.learners) * config.repetitions
    if len(failures) == total:
        logger.error(f"❌ All {total} repetitions failed; first error: {failures[0].message}")
        return EXIT_RUNTIME

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        save_experiment_config(config, out_dir / "config.json")
        _write_outputs(records, out_dir, config_path)
        if db_path:
            run_id = _store_run(db_path, config, records)
            logger.info(f"Stored run {run_id} in {db_path}")
    except Exception as e:
        logger.error(f"❌ Failed to write results for {config_path}: {e}", exc_info=True)
        return EXIT_RUNTIME

    for failure in failures:
        logger.warning(f"⚠️ {failure.learner} repetition {failure.repetition} excluded: {failure.message}")
    logger.info(f"Finished {config_path}: {len(records)} records in {out_dir}")
    return EXIT_OK


def parse_spec(model, spec_name, targets, avoid=(), semantics=None):
    """Build a Specification from CLI tokens; labels are resolved against the model."""
    key = spec_name.lower()
    if key not in SPEC_KINDS:
        raise ModelError(f"Unknown spec {spec_name!r}; use Pmax, Pmin, Rmax or Rmin")
    is_reward, direction = SPEC_KINDS[key]
    if not targets:
        raise ModelError("At least one --targets label is required")
    if is_reward and avoid:
        raise ModelError("--avoid is only meaningful for Pmax/Pmin")
    if semantics is None:
        semantics = Semantics.EXACT if isinstance(model, Mdp) else Semantics.PESSIMISTIC
    if avoid:
        kind = SpecKind.REACH_AVOID
    else:
        kind = SpecKind.EXPECTED_REWARD if is_reward else SpecKind.REACH
    return Specification(
        kind,
        {model.state_index(label) for label in targets},
        avoid_states={model.state_index(label) for label in avoid},
        direction=direction,
        semantics=semantics,
        target_name="|".join(targets),
        avoid_name="|".join(avoid) if avoid else "avoid",
    )


def cmd_solve(model_path, spec_name="Pmax", targets=(), avoid=(), semantics=None,
              tolerance=None, policy_path=None):
    try:
        model = load_model(model_path)
        spec = parse_spec(
            model, spec_name, targets, avoid, Semantics(semantics) if semantics else None
        )
    except (OSError, ModelError) as e:
        logger.error(f"❌ {e}")
        return EXIT_CONFIG

    try:
        result = solve_model(model, spec, tolerance=tolerance)
    except ModelError as e:
        logger.error(f"❌ {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"❌ Solving {model_path} failed: {e}", exc_info=True)
        return EXIT_RUNTIME

    print(f"{result.value_at(model.initial_state):.10g}")
    logger.info(f"{spec.describe()} on {model_path}: {result.iterations} sweeps, residual {result.residual:.3g}")
    if policy_path:
        save_policy(model, result.policy, policy_path)
    return EXIT_OK


def format_environment_table():
    rows = []
    for sheet in ENVIRONMENTS:
        mdp, spec = sheet.build()
        params = " ".join(f"{key}={value}" for key, value in sheet.parameters.items())
        rows.append((
            sheet.name,
            f"{mdp.n_states} states",
            f"{mdp.n_transitions} transitions",
            spec.describe(),
            params,
        ))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines)


def cmd_list_envs():
    print(format_environment_table())
    return EXIT_OK


def cmd_export_env(key, out_path):
    try:
        mdp = export_environment(key, out_path)
    except ModelError as e:
        logger.error(f"❌ {e}")
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"❌ Cannot write {out_path}: {e}")
        return EXIT_RUNTIME
    logger.info(f"Exported {key} ({mdp.n_states} states) to {out_path}")
    return EXIT_OK


def cmd_summarize(db_path, run_id, out_dir=None):
    if not Path(db_path).exists():
        logger.error(f"❌ Database not found at {db_path}")
        return EXIT_CONFIG
    try:
        document = database.fetch_run_config(db_path, run_id)
        records = database.fetch_records(db_path, run_id) if document is not None else []
    except Exception as e:
        logger.error(f"❌ Reading run {run_id} from {db_path} failed: {e}")
        return EXIT_RUNTIME
    if document is None:
        logger.error(f"❌ Run {run_id} not found in {db_path}")
        return EXIT_CONFIG
    if not records:
        logger.error(f"❌ Run {run_id} has no records in {db_path}")
        return EXIT_CONFIG

    out_dir = _resolve_dir(out_dir, "results_dir")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        try:
            save_experiment_config(parse_experiment_config(document, f"run {run_id}"), out_dir / "config.json")
        except ConfigError as e:
            logger.warning(f"⚠️ Stored config of run {run_id} no longer parses, skipping config.json: {e}")
        _write_outputs(records, out_dir, f"run {run_id}")
    except OSError as e:
        logger.error(f"❌ Failed to write summary for run {run_id}: {e}")
        return EXIT_RUNTIME
    return EXIT_OK
