# ramdp/harness.py

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np
import pandas as pd

from .environments import SwitchingEnvironment, get_environment, switching_oracle
from .exploration import (
    SamplingOracle,
    ScheduleState,
    make_rng,
    optimistic_policy,
    randomize_policy,
    run_iteration,
    uniform_policy,
)
from .graph_utils import classify_states
from .learners import current_model, initial_learner_state, learner_step
from .models import Mdp, Semantics, check_same_support, is_point_interval
from .solver import evaluate_policy, exact_value_iteration, robust_value_iteration

logger = logging.getLogger('Ramdp')

HORIZON_FACTOR = 10
CI_Z = 1.96
METRICS = ("perf_true", "perf_model", "est_error", "model_error")


@dataclass(frozen=True)
class ExperimentRecord:
    rep: int
    learner: str
    iteration: int
    trajectories: int
    perf_true: float
    perf_model: float
    est_error: float
    model_error: float
    wall_ms: float


@dataclass(frozen=True)
class FailedRepetition:
    learner: str
    repetition: int
    message: str


def metric_performance(true_mdp, policy, spec):
    """Value of the learned policy on the true environment."""
    return evaluate_policy(true_mdp, policy, spec)


def metric_estimation_error(perf_model, perf_true):
    """perf_model - perf_true; a divergence the model predicts counts as no error."""
    if math.isinf(perf_model) and perf_model == perf_true:
        return 0.0
    return perf_model - perf_true


def metric_model_error(true_mdp, learned):
    """Mean distance from each true probability to the far end of its learned interval.

    Point estimates count |p - estimate|; probability-one transitions are excluded.
    """
    check_same_support(true_mdp, learned)
    point = isinstance(learned, Mdp)
    errors = []
    for state, action in true_mdp.pairs():
        learned_entries = learned.edges[(state, action)]
        if len(learned_entries) == 1:
            continue
        for (successor, prob), entry in zip(true_mdp.transitions[(state, action)], learned_entries):
            if point:
                errors.append(abs(prob - entry[1]))
                continue
            _, lower, upper = entry
            if is_point_interval(lower, upper):
                continue
            errors.append(max(abs(prob - lower), abs(prob - upper)))
    if not errors:
        return 0.0
    return float(np.mean(errors))


def _solve_learned(model, spec, config, classification=None):
    """(policy, performance_model): pessimistic robust solution, or the exact optimum for MAP."""
    if isinstance(model, Mdp):
        result = exact_value_iteration(
            model, spec.with_semantics(Semantics.EXACT), config.tolerance, config.max_iterations,
            classification,
        )
    else:
        result = robust_value_iteration(
            model, spec.with_semantics(Semantics.PESSIMISTIC), config.tolerance, config.max_iterations,
            classification,
        )
    return result.policy, result.value_at(model.initial_state)


def _exploration_policy(model, graph, spec, config, classification=None):
    if config.exploration == "uniform":
        return uniform_policy(graph)
    policy = optimistic_policy(model, spec, config.tolerance, config.max_iterations, classification)
    if config.xi < 1.0:
        policy = randomize_policy(policy, graph, config.xi)
    return policy


def _make_oracle(config, true_mdp):
    if config.switching is None:
        return SamplingOracle(true_mdp)
    env_b, _ = get_environment(config.switching.environment)
    return switching_oracle(SwitchingEnvironment(true_mdp, env_b, config.switching.after))


def run_repetition(config, learner_config, repetition):
    """One seeded learning run; a record after the prior and after every iteration."""
    true_mdp, spec = get_environment(config.environment)
    oracle = _make_oracle(config, true_mdp)
    classification = classify_states(true_mdp, spec)
    horizon = config.horizon if config.horizon is not None else HORIZON_FACTOR * true_mdp.n_states
    rng = make_rng(config.seed, repetition)

    state = initial_learner_state(learner_config, true_mdp)
    graph = state.graph
    model = current_model(learner_config, state)
    schedule = ScheduleState()
    records = []

    def snapshot(iteration, policy, perf_model, wall_ms):
        active = oracle.current_mdp
        perf_true = metric_performance(active, policy, spec)
        records.append(ExperimentRecord(
            rep=repetition,
            learner=learner_config.label,
            iteration=iteration,
            trajectories=schedule.trajectories_done,
            perf_true=perf_true,
            perf_model=perf_model,
            est_error=metric_estimation_error(perf_model, perf_true),
            model_error=metric_model_error(active, model),
            wall_ms=wall_ms if config.record_timing else 0.0,
        ))

    started = time.perf_counter()
    policy, perf_model = _solve_learned(model, spec, config, classification)
    snapshot(0, policy, perf_model, (time.perf_counter() - started) * 1000.0)

    iteration = 0
    while schedule.trajectories_done < config.trajectories:
        if spec.meets_threshold(perf_model, config.stop_threshold):
            logger.info(
                f"{learner_config.label} rep {repetition}: threshold {config.stop_threshold} met "
                f"after {schedule.trajectories_done} trajectories"
            )
            break
        exploration = _exploration_policy(model, graph, spec, config, classification)
        schedule, iteration_counts = run_iteration(
            schedule, oracle, exploration, spec, classification, horizon,
            config.trajectories - schedule.trajectories_done, rng,
            on_transitions=config.doubling_on_transitions, graph=graph,
        )
        iteration += 1
        started = time.perf_counter()
        state, model = learner_step(learner_config, state, iteration_counts, max(1, schedule.steps_done))
        policy, perf_model = _solve_learned(model, spec, config, classification)
        snapshot(iteration, policy, perf_model, (time.perf_counter() - started) * 1000.0)

    logger.debug(
        f"{learner_config.label} rep {repetition}: {iteration} iterations, "
        f"{schedule.trajectories_done} trajectories, {schedule.steps_done} steps"
    )
    return records


def _run_job(job):
    config, learner_index, repetition = job
    learner_config = config.learners[learner_index]
    try:
        return run_repetition(config, learner_config, repetition), None
    except Exception as e:
        logger.warning(f"⚠️ Repetition {repetition} of {learner_config.label} failed: {e}", exc_info=True)
        return [], FailedRepetition(learner_config.label, repetition, str(e))


def run_experiment(config, workers=1):
    """All (learner, repetition) runs; returns (records, failures) in a deterministic order."""
    jobs = [
        (config, learner_index, repetition)
        for learner_index in range(len(config.learners))
        for repetition in range(config.repetitions)
    ]
    logger.info(
        f"Running {len(config.learners)} learner(s) x {config.repetitions} repetitions on "
        f"{config.environment} with {workers} worker(s)"
    )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(_run_job, jobs))
    else:
        outcomes = [_run_job(job) for job in jobs]

    records = []
    failures = []
    for job_records, failure in outcomes:
        records.extend(job_records)
        if failure is not None:
            failures.append(failure)
    order = {learner.label: i for i, learner in enumerate(config.learners)}
    records.sort(key=lambda r: (order[r.learner], r.rep, r.iteration))
    if failures:
        logger.warning(f"⚠️ {len(failures)} repetition(s) failed and are excluded")
    return records, failures


def records_frame(records):
    columns = [f.name for f in fields(ExperimentRecord)]
    return pd.DataFrame([asdict(record) for record in records], columns=columns)


def aggregate(records):
    """Mean and 95% normal confidence band per learner over a shared trajectory grid.

    Each repetition is aligned to the union of recorded trajectory counts by
    carrying its last observation forward.
    """
    frame = records_frame(records)
    if frame.empty:
        raise ValueError("Nothing to aggregate: no records")
    rows = []
    for learner, group in frame.groupby("learner", sort=False):
        repetitions = group["rep"].nunique()
        if repetitions < 2:
            raise ValueError(f"Aggregation needs at least 2 repetitions, {learner} has {repetitions}")
        grid = np.sort(group["trajectories"].unique())
        aligned = []
        for _, rep_rows in group.groupby("rep"):
            series = (
                rep_rows.drop_duplicates("trajectories", keep="last")
                .set_index("trajectories")[list(METRICS)]
                .reindex(grid)
                .ffill()
            )
            aligned.append(series.to_numpy())
        stacked = np.stack(aligned)
        infinite = int(np.isinf(stacked).sum())
        if infinite:
            logger.warning(f"⚠️ {learner}: {infinite} infinite metric value(s), their bands collapse to the mean")
        with np.errstate(invalid="ignore"):
            mean = stacked.mean(axis=0)
            half = CI_Z * stacked.std(axis=0, ddof=1) / math.sqrt(repetitions)
        half = np.where(np.isinf(mean), 0.0, half)
        block = pd.DataFrame({"learner": learner, "trajectories": grid, "reps": repetitions})
        for i, metric in enumerate(METRICS):
            block[f"mean_{metric}"] = mean[:, i]
            block[f"ci_lo_{metric}"] = mean[:, i] - half[:, i]
            block[f"ci_hi_{metric}"] = mean[:, i] + half[:, i]
        rows.append(block)
    return pd.concat(rows, ignore_index=True)
