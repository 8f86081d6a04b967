import numpy as np
import pytest

from composer import (
    AdaptiveScheme,
    ComposerConfig,
    Evaluator,
    FitnessCache,
    Individual,
    Objective,
    PipelineGrower,
    Reproducer,
    compose,
    crossover,
    crowding_distance,
    enumerate_pipelines,
    evaluate_population,
    init_population,
    make_validator,
    non_dominated_sort,
    read_telemetry,
    regularize,
    select_survivors,
    update_adaptive_rates,
)
from composer.telemetry import FIELDNAMES
from dataio import Dataset, TaskType
from errors import BudgetExhaustedBeforeFirstEvaluation, InitialAssumptionInvalidError, ReproductionStallError
from pipeline import Node, Pipeline, canonical_signature, validate


def quick_config(**overrides):
    settings = dict(pop_size=6, max_generations=3, time_limit_seconds=120.0, max_depth=3, max_nodes=4, seed=1)
    settings.update(overrides)
    return ComposerConfig(**settings)


def grower_for(registry, config, task=TaskType.REGRESSION):
    validate_fn = make_validator(config, registry, task)
    return PipelineGrower(registry, task, config, validate_fn), validate_fn


def test_config_rejects_bad_settings():
    with pytest.raises(ValueError):
        ComposerConfig(pop_size=1)
    with pytest.raises(ValueError):
        ComposerConfig(objectives=["-node_count"])
    with pytest.raises(ValueError):
        ComposerConfig(crossover_rate=1.5)
    config = ComposerConfig(objectives=["-node_count", "ROC_AUC"])
    assert [o.name for o in config.resolved_objectives("classification")] == ["ROC_AUC", "-node_count"]
    assert ComposerConfig().resolved_objectives("regression")[0].name == "RMSE"


def test_single_operation_space_returns_that_pipeline(registry, regression_data):
    only_ols = registry.restricted(["ols"])
    front = compose(quick_config(pop_size=4, max_generations=2, max_nodes=1), regression_data, only_ols)
    assert len(front) == 1
    assert canonical_signature(front.best.pipeline, only_ols) == canonical_signature(Pipeline([Node(0, "ols")]), only_ols)


def test_telemetry_has_a_row_per_generation(tmp_path, registry, regression_data):
    path = str(tmp_path / "telemetry.csv")
    front = compose(quick_config(telemetry_path=path), regression_data, registry)
    rows = read_telemetry(path)
    assert front.generations_completed == 3
    assert len(rows) == front.generations_completed + 1
    assert list(rows[0]) == FIELDNAMES
    best = [float(row["best"]) for row in rows]
    assert best == sorted(best)
    assert len(front.history) == len(rows)


def test_zero_generations_returns_best_initial(registry, regression_data):
    front = compose(quick_config(max_generations=0), regression_data, registry)
    assert front.generations_completed == 0
    assert len(front.history) == 1
    assert validate(front.best.pipeline, "composite", 3, registry, "regression")


def test_two_objective_front_is_non_dominated(registry, classification_data):
    config = quick_config(objectives=["ROC_AUC", "-node_count"], max_generations=2)
    front = compose(config, classification_data, registry)
    assert front.objective_names == ["ROC_AUC", "-node_count"]
    assert front.is_mutually_non_dominated()
    assert all(len(member.fitness) == 2 for member in front)


def test_compose_is_deterministic_for_a_seed(registry, regression_data):
    first = compose(quick_config(seed=5), regression_data, registry)
    second = compose(quick_config(seed=5), regression_data, registry)
    assert first.evaluated_signatures == second.evaluated_signatures
    assert first.best.fitness == second.best.fitness


def test_parallel_evaluation_matches_serial(registry, regression_data):
    serial = compose(quick_config(seed=2), regression_data, registry)
    parallel = compose(quick_config(seed=2, jobs=3), regression_data, registry)
    assert serial.best.signature == parallel.best.signature
    assert serial.best.fitness == parallel.best.fitness


def test_tag_exclusion_limits_operations(registry, regression_data):
    front = compose(quick_config(tags_exclude=["tree", "instance-based"]), regression_data, registry)
    used = {node.operation_id for member in front for node in member.pipeline.nodes}
    assert not used & {"decision_tree", "knn"}


def test_zero_time_budget_raises_with_partial_front(registry, regression_data):
    with pytest.raises(BudgetExhaustedBeforeFirstEvaluation) as info:
        compose(quick_config(time_limit_seconds=0.0), regression_data, registry)
    assert info.value.front is not None


def test_initial_population_keeps_assumption_first(registry):
    assumption = Pipeline.chain(["standard_scaling", "ridge"], TaskType.REGRESSION)
    config = quick_config(pop_size=10, initial_pipelines=[assumption])
    grower, validate_fn = grower_for(registry, config)
    population = init_population(registry, config, "regression", np.random.default_rng(0), validate_fn, grower)
    assert len(population) == 10
    assert population[0].pipeline == assumption
    assert population[0].origin == "initial_assumption"
    assert all(validate_fn(individual.pipeline) for individual in population)


def test_initial_population_is_seeded(registry):
    config = quick_config(pop_size=8)
    grower, validate_fn = grower_for(registry, config)
    first = init_population(registry, config, "regression", np.random.default_rng(9), validate_fn, grower)
    second = init_population(registry, config, "regression", np.random.default_rng(9), validate_fn, grower)
    assert [i.signature for i in first] == [i.signature for i in second]


def test_cyclic_assumption_is_an_error(registry):
    cyclic = Pipeline([Node(0, "ridge", parent_ids=(1,)), Node(1, "ridge", parent_ids=(0,))], TaskType.REGRESSION)
    config = quick_config(initial_pipelines=[cyclic])
    grower, validate_fn = grower_for(registry, config)
    with pytest.raises(InitialAssumptionInvalidError) as info:
        init_population(registry, config, "regression", np.random.default_rng(0), validate_fn, grower)
    assert info.value.rule == "cycle_detected"


def test_zero_rates_copy_parents(registry):
    config = quick_config()
    grower, validate_fn = grower_for(registry, config)
    parents = [
        Individual(Pipeline.chain(["standard_scaling", "ridge"], "regression"), fitness=(0.4,)),
        Individual(Pipeline.chain(["knn"], "regression"), fitness=(0.6,)),
    ]
    offspring = Reproducer(grower, validate_fn, np.random.default_rng(0)).reproduce(parents, 2, 0.0, 0.0)
    assert [child.pipeline for child in offspring] == [parent.pipeline for parent in parents]
    assert all(child.parent_quality == 0.6 for child in offspring)


def test_subtree_exchange_keeps_single_sink_dags():
    first = Pipeline.chain(["standard_scaling", "pca_topk", "ridge"], "regression")
    second = Pipeline.chain(["minmax_scaling", "knn", "decision_tree"], "regression")
    for seed in range(25):
        children = crossover("subtree_exchange", first, second, np.random.default_rng(seed))
        for child in children:
            assert validate(child, "composite", 10), child


def test_reproduction_never_emits_invalid_offspring(registry):
    config = quick_config(max_nodes=5, max_depth=4)
    grower, validate_fn = grower_for(registry, config)
    rng = np.random.default_rng(3)
    parents = [Individual(grower.grow(rng), fitness=(float(q),)) for q in rng.uniform(size=6)]
    reproducer = Reproducer(grower, validate_fn, rng)
    for _ in range(100):
        pair = [parents[i] for i in rng.choice(len(parents), 2, replace=False)]
        for child in reproducer.breed(pair[0], pair[1], 0.8, 0.8):
            assert validate_fn(child.pipeline)


def test_stalled_reproduction_with_invalid_parents_raises(registry):
    config = quick_config()
    grower, _ = grower_for(registry, config)
    parent = Individual(Pipeline.chain(["standard_scaling", "ridge"], "regression"), fitness=(0.5,))
    reproducer = Reproducer(grower, lambda pipeline: False, np.random.default_rng(0), retries=3)
    with pytest.raises(ReproductionStallError):
        reproducer.breed(parent, parent, 1.0, 1.0)
    assert reproducer.stalls == 1


def test_duplicate_pipeline_is_a_cache_hit(registry, regression_data):
    cache = FitnessCache()
    pipeline = Pipeline.chain(["standard_scaling", "ridge"], "regression")
    population = [Individual(pipeline), Individual(Pipeline(pipeline.nodes, "regression"))]
    evaluate_population(population, [Objective.quality("RMSE")], regression_data, cache, registry)
    assert (cache.misses, cache.hits) == (1, 1)
    assert population[0].fitness == population[1].fitness


def test_singular_pipeline_scores_worst(registry):
    column = np.linspace(0.0, 1.0, 40)
    data = Dataset(features=np.column_stack([column, column]), target=3.0 * column, task="regression")
    evaluator = Evaluator.from_train(data, [Objective.quality("MAE")], registry)
    assert evaluator.fitness_of(Pipeline([Node(0, "ols")])) == (0.0,)
    assert evaluator.fitness_of(Pipeline([Node(0, "ridge")]))[0] > 0.0


def test_complexity_objective_is_negative_node_count(registry, regression_data):
    evaluator = Evaluator.from_train(regression_data, [Objective.quality("MAE"), Objective.parse("-node_count")], registry)
    fitness = evaluator.fitness_of(Pipeline.chain(["standard_scaling", "ridge"], "regression"))
    assert fitness[1] == -2.0


def test_regularization_removes_pass_through_scaler(registry, regression_data):
    evaluator = Evaluator.from_train(regression_data, [Objective.quality("RMSE")], registry)
    validate_fn = make_validator(quick_config(), registry, "regression")
    scaled = Pipeline.chain(["standard_scaling", "ols"], "regression")
    individual = Individual(scaled, fitness=evaluator.fitness_of(scaled), signature=evaluator.signature(scaled))
    single = Individual(Pipeline([Node(0, "ols")], "regression"), fitness=(0.5,))

    simplified, untouched = regularize([individual, single], evaluator.fitness_of, validate_fn, evaluator.signature)
    assert [node.operation_id for node in simplified.pipeline.nodes] == ["ols"]
    assert simplified.quality == pytest.approx(individual.quality, abs=1e-9)
    assert untouched is single


def test_regularization_is_idempotent(registry, regression_data):
    evaluator = Evaluator.from_train(regression_data, [Objective.quality("RMSE")], registry)
    validate_fn = make_validator(quick_config(), registry, "regression")
    pipelines = [
        Pipeline.chain(["standard_scaling", "minmax_scaling", "ols"], "regression"),
        Pipeline.chain(["pca_topk", "knn"], "regression", [{"n_components": 1}, {}]),
        Pipeline.chain(["zscore_outlier_filter", "ridge"], "regression"),
    ]
    population = [Individual(p, fitness=evaluator.fitness_of(p), signature=evaluator.signature(p)) for p in pipelines]
    once = regularize(population, evaluator.fitness_of, validate_fn, evaluator.signature, evaluator.fit_fold_quality)
    twice = regularize(once, evaluator.fitness_of, validate_fn, evaluator.signature, evaluator.fit_fold_quality)
    assert [ind.signature for ind in twice] == [ind.signature for ind in once]
    assert [ind.fitness for ind in twice] == [ind.fitness for ind in once]
    assert all(after.quality >= before.quality - 1e-9 for before, after in zip(population, once))


def test_regularization_needs_both_folds_to_agree():
    pipeline = Pipeline.chain(["standard_scaling", "ols"], "regression")
    individual = Individual(pipeline, fitness=(0.9,), signature="full")

    def fitness_fn(candidate):
        return (0.5,) if len(candidate) == 1 else (0.9,)

    always_valid = lambda candidate: True
    fit_fold_prefers_smaller = lambda candidate: 1.0 if len(candidate) == 1 else 0.8
    kept, = regularize([individual], fitness_fn, always_valid, lambda p: "small", fit_fold_prefers_smaller)
    assert kept is individual

    fit_fold_prefers_larger = lambda candidate: 0.7 if len(candidate) == 1 else 0.8
    kept, = regularize([individual], lambda candidate: (0.95,), always_valid, lambda p: "small", fit_fold_prefers_larger)
    assert kept is individual

    pruned, = regularize([individual], lambda candidate: (0.95,), always_valid, lambda p: "small", fit_fold_prefers_smaller)
    assert len(pruned.pipeline) == 1
    assert pruned.fitness == (0.95,)
    assert pruned.origin == "regularized"


def test_adaptive_rates_stay_in_bounds():
    rng = np.random.default_rng(21)
    crossover_rate, mutation_rate = 0.5, 0.5
    for _ in range(500):
        history = [
            {"crossover": bool(rng.integers(2)), "mutation": bool(rng.integers(2)), "improved": bool(rng.integers(2))}
            for _ in range(int(rng.integers(0, 30)))
        ]
        crossover_rate, mutation_rate = update_adaptive_rates(history, crossover_rate, mutation_rate)
        assert 0.05 <= crossover_rate <= 0.95
        assert 0.05 <= mutation_rate <= 0.95


def test_front_is_non_dominated_after_every_generation(registry, classification_data):
    for generations in range(4):
        config = quick_config(objectives=["ROC_AUC", "-node_count"], max_generations=generations, seed=2)
        front = compose(config, classification_data, registry)
        assert front.generations_completed == generations
        assert front.is_mutually_non_dominated()
        assert all(validate(member.pipeline, registry=registry, task=TaskType.CLASSIFICATION).ok for member in front)


def test_rate_adaptation():
    assert update_adaptive_rates([], 0.8, 0.8) == (0.8, 0.8)
    failures = [{"crossover": False, "mutation": True, "improved": False}] * 10
    crossover_rate, mutation_rate = update_adaptive_rates(failures, 0.8, 0.5)
    assert crossover_rate == 0.8
    assert mutation_rate == pytest.approx(0.45)
    assert update_adaptive_rates(failures, 0.8, 0.05)[1] == 0.05
    successes = [{"crossover": True, "mutation": False, "improved": True}] * 10
    assert update_adaptive_rates(successes, 0.9, 0.5)[0] == 0.95
    assert update_adaptive_rates(failures, 0.8, 0.5, AdaptiveScheme.NONE) == (0.8, 0.5)


def test_non_dominated_sort_and_crowding():
    fitnesses = [(1.0, 0.0), (0.0, 1.0), (0.5, 0.5), (0.4, 0.4), (0.1, 0.1)]
    assert non_dominated_sort(fitnesses) == [[0, 1, 2], [3], [4]]
    distance = crowding_distance(fitnesses, [0, 1, 2])
    assert distance[0] == distance[1] == float("inf")
    assert distance[2] == pytest.approx(2.0)


def test_single_objective_survivors_keep_the_elite():
    pool = [Individual(Pipeline([Node(0, "ols")]), fitness=(q,), signature=str(q)) for q in (0.1, 0.9, 0.3, 0.5, 0.2)]
    survivors = select_survivors(pool, 3, np.random.default_rng(0))
    assert len(survivors) == 3
    assert survivors[0].quality == 0.9


def test_enumeration_of_two_operations(registry):
    pipelines = enumerate_pipelines(["standard_scaling", "ridge"], 2, "regression", registry)
    shapes = sorted(tuple(node.operation_id for node in p.nodes) for p in pipelines)
    assert shapes == [("ridge",), ("ridge", "ridge"), ("standard_scaling", "ridge")]


def test_strength_selection_keeps_the_quality_elite():
    fitnesses = [(0.9, -3.0), (0.5, -1.0), (0.4, -2.0), (0.3, -3.0), (0.8, -2.0)]
    pool = [Individual(Pipeline([Node(0, "ols")]), fitness=f, signature=str(i)) for i, f in enumerate(fitnesses)]
    survivors = select_survivors(pool, 3, np.random.default_rng(0), "spea2_like")
    assert len(survivors) == 3
    assert survivors[0].fitness == (0.9, -3.0)
    assert all(member.fitness not in [(0.4, -2.0), (0.3, -3.0)] for member in survivors)
