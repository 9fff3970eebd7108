"""
Experiment runners
Incremental and new-class Learn++ protocols, batch comparisons, data generation and diagnosis
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from classifiers.base import Classifier, accuracy, class_targets
from classifiers.mlp import MlpConfig, MlpLearner, TrainingSet, train_scg
from classifiers.svm import KernelSpec
from config import ExperimentConfig
from diagnosis.metrics import MetricsReport, evaluate, metrics_from_predictions
from diagnosis.pipeline import (
    FAULTY,
    BatchSettings,
    ComparisonReport,
    Diagnosis,
    compare_batch_classifiers,
    diagnose_batch,
    majority_baseline,
)
from dga.datagen import (
    FAULT_CLASSES,
    FaultClass,
    class_filtered_databases,
    default_generator_config,
    generate_dataset,
    nearest_centroid_accuracy,
    split_into_databases,
)
from dga.features import (
    LEVEL1_CLASSES,
    LEVEL2_CLASSES,
    GasRecord,
    LabeledRecord,
    Level1Label,
    NormalizationParams,
    TdcgVariant,
    fit_normalizer,
    normalize_matrix,
    record_features,
    to_arrays,
)
from ensemble.learnpp import EnsembleState, SessionConfig, SessionResult, run_session
from exporters.report_exporter import Table, report_exporter
from exporters.snapshot_exporter import snapshot_exporter
from parsers.dataset_parser import dataset_parser

logger = logging.getLogger(__name__)

LEVEL1_NAMES = [label.value for label in LEVEL1_CLASSES]
LEVEL2_NAMES = [label.value for label in LEVEL2_CLASSES]


def experiment_payload(cfg: ExperimentConfig, result) -> Dict[str, Any]:
    """Versioned envelope written to report.json and printed by --format structured"""
    return {
        'format': config.REPORT_FORMAT,
        'format_version': config.REPORT_FORMAT_VERSION,
        'experiment': cfg.kind,
        'config': cfg.to_dict(),
        'result': result.to_dict(),
    }


def publish(cfg: ExperimentConfig, result, xlsx: bool = False) -> List[Path]:
    """Write report.json, report.txt and timings.json for a finished experiment"""
    return report_exporter.export_report(
        cfg.output_dir,
        experiment_payload(cfg, result),
        result.tables(),
        timings=result.timings(),
        xlsx=xlsx,
    )


def load_or_generate(cfg: ExperimentConfig) -> List[LabeledRecord]:
    """Read DATASET_PATH when set, otherwise generate SAMPLE_COUNT synthetic samples"""
    if cfg.dataset_path is not None:
        return dataset_parser.read_dataset(cfg.dataset_path)
    proportions = {FaultClass(name): value for name, value in cfg.class_proportions}
    return generate_dataset(default_generator_config(cfg.sample_count, cfg.seed, proportions))


def make_learner(cfg: ExperimentConfig) -> MlpLearner:
    return MlpLearner(
        n_hidden=cfg.weak_hidden_units,
        alpha=cfg.weak_alpha,
        max_iterations=cfg.weak_max_iterations,
        error_goal=cfg.weak_error_goal,
        accuracy_goal=cfg.weak_accuracy_goal,
    )


def session_config(cfg: ExperimentConfig) -> SessionConfig:
    return SessionConfig(
        hypotheses=cfg.hypotheses_per_session,
        tr_fraction=cfg.tr_fraction,
        max_retries=cfg.max_retries,
        seed=cfg.seed,
        composite_scope=cfg.composite_scope,
    )


@dataclass
class SessionReport:
    """Per-session evaluation of an incremental run"""
    task: str
    class_names: List[str]
    database_sizes: List[int]
    validation_size: int
    # accuracy_matrix[s][j]: percent on database j+1 after session s+1, j <= s
    accuracy_matrix: List[List[float]] = field(default_factory=list)
    validation_accuracy: List[float] = field(default_factory=list)
    # Mean confidence of the predicted class over correctly classified validation samples
    confidence_means: List[List[Optional[float]]] = field(default_factory=list)
    overall_confidence: List[Optional[float]] = field(default_factory=list)
    class_recall: List[List[Optional[float]]] = field(default_factory=list)
    diagnostics: List[Dict[str, Any]] = field(default_factory=list)
    session_seconds: List[float] = field(default_factory=list)

    @property
    def sessions(self) -> int:
        return len(self.validation_accuracy)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'task': self.task,
            'class_names': list(self.class_names),
            'database_sizes': list(self.database_sizes),
            'validation_size': self.validation_size,
            'sessions': self.sessions,
            'accuracy_matrix': [list(row) for row in self.accuracy_matrix],
            'validation_accuracy': list(self.validation_accuracy),
            'confidence_means': [list(row) for row in self.confidence_means],
            'overall_confidence': list(self.overall_confidence),
            'class_recall': [list(row) for row in self.class_recall],
            'diagnostics': list(self.diagnostics),
        }

    def timings(self) -> Dict[str, Any]:
        return {f"session{k}_seconds": round(s, 3) for k, s in enumerate(self.session_seconds, start=1)}

    def tables(self) -> List[Table]:
        n = len(self.database_sizes)
        accuracy_rows = []
        for s, row in enumerate(self.accuracy_matrix):
            accuracy_rows.append([f"Session {s + 1}"] + list(row) + [''] * (n - len(row))
                                 + [self.validation_accuracy[s]])
        return [
            Table(
                title=f"Accuracy (%) after each training session, {self.task}",
                headers=['Session'] + [f"DB{j}" for j in range(1, n + 1)] + ['Validation'],
                rows=accuracy_rows,
            ),
            Table(
                title="Mean confidence on correctly classified validation samples",
                headers=['Session'] + list(self.class_names) + ['Overall'],
                rows=[[f"Session {s + 1}"] + list(row) + [self.overall_confidence[s]]
                      for s, row in enumerate(self.confidence_means)],
            ),
            Table(
                title="Validation recall per class",
                headers=['Session'] + list(self.class_names),
                rows=[[f"Session {s + 1}"] + list(row) for s, row in enumerate(self.class_recall)],
            ),
            Table(
                title="Boosting diagnostics",
                headers=['Session', 'Hypotheses', 'Discarded', 'Composite acc', 'Mean weak acc'],
                rows=[[f"Session {d['session']}", d['hypotheses'], d['discarded'],
                       d['composite_accuracy'], d['mean_weak_accuracy']] for d in self.diagnostics],
            ),
        ]


def _confidence_means(state: EnsembleState, X: np.ndarray, y: np.ndarray,
                      predicted: np.ndarray, classes: Sequence[int]) -> Tuple[List[Optional[float]], Optional[float]]:
    gamma = state.predict_confidence(X)
    column = np.searchsorted(np.asarray(state.classes), predicted)
    confidence = gamma[np.arange(len(y)), column]
    correct = predicted == y

    per_class = []
    for c in classes:
        mask = correct & (y == c)
        per_class.append(float(np.mean(confidence[mask])) if np.any(mask) else None)
    overall = float(np.mean(confidence[correct])) if np.any(correct) else None
    return per_class, overall


def run_learnpp_sessions(task: str, class_names: Sequence[str],
                         databases: Sequence[Tuple[np.ndarray, np.ndarray]],
                         validation: Tuple[np.ndarray, np.ndarray],
                         cfg: ExperimentConfig,
                         normalization: NormalizationParams) -> Tuple[SessionReport, EnsembleState]:
    """
    Train one Learn++ session per database and evaluate after each

    After every session the ensemble snapshot and the report so far are
    written to the output directory, so a failed run keeps its finished
    sessions.

    Returns:
        (SessionReport, trained EnsembleState)
    """
    X_val, y_val = validation
    classes = list(range(len(class_names)))
    state = EnsembleState(learner=make_learner(cfg), seed=cfg.seed)
    settings = session_config(cfg)
    report = SessionReport(
        task=task,
        class_names=list(class_names),
        database_sizes=[len(y) for _, y in databases],
        validation_size=len(y_val),
    )

    for k, (X, y) in enumerate(databases, start=1):
        logger.info("%s: session %d on %d samples", task, k, len(y))
        start = time.perf_counter()
        result: SessionResult = run_session(state, X, y, settings)
        report.session_seconds.append(time.perf_counter() - start)

        report.accuracy_matrix.append([
            100.0 * accuracy(state.predict(Xj), yj) for Xj, yj in databases[:k]
        ])
        predicted = state.predict(X_val)
        metrics = metrics_from_predictions(predicted, y_val, classes=classes)
        report.validation_accuracy.append(100.0 * metrics.accuracy)
        report.class_recall.append(list(metrics.per_class_recall))
        per_class, overall = _confidence_means(state, X_val, y_val, predicted, classes)
        report.confidence_means.append(per_class)
        report.overall_confidence.append(overall)
        report.diagnostics.append(result.diagnostics())

        snapshot_exporter.save(state, cfg.output_dir / f"ensemble_session{k}.json", normalization)
        report_exporter.export_json(experiment_payload(cfg, report), cfg.output_dir / 'report.json')
        logger.info("%s: session %d validation accuracy %.2f%%", task, k, report.validation_accuracy[-1])

    return report, state


def _validation_slice(remainder: List[LabeledRecord], size: int, key: str) -> List[LabeledRecord]:
    if not remainder:
        raise ValueError("No samples left for validation; lower the database sizes or raise SAMPLE_COUNT")
    if len(remainder) < size:
        logger.warning("%s=%d but only %d samples remain; validating on all of them", key, size, len(remainder))
    return remainder[:size]


def first_database_normalizer(databases: Sequence[Sequence[LabeledRecord]],
                              cfg: ExperimentConfig) -> NormalizationParams:
    """
    Normalization fitted on database 1 only

    Later databases only arrive after session 1. Their values outside
    database 1's range clamp to [0, 1].
    """
    return fit_normalizer([s.record for s in databases[0]], TdcgVariant(cfg.tdcg_variant))


def run_incremental_experiment(cfg: ExperimentConfig, xlsx: bool = False) -> SessionReport:
    """
    Level-1 (Normal/Faulty) incremental run over DATABASE_SIZES

    Returns:
        SessionReport with one row per session
    """
    dataset = load_or_generate(cfg)
    databases, remainder = split_into_databases(dataset, cfg.database_sizes, cfg.seed)
    validation = _validation_slice(remainder, cfg.validation_size, 'VALIDATION_SIZE')

    params = first_database_normalizer(databases, cfg)
    arrays = [to_arrays(db, params)[:2] for db in databases]
    X_val, y_val, _ = to_arrays(validation, params)

    report, _ = run_learnpp_sessions('level1', LEVEL1_NAMES, arrays, (X_val, y_val), cfg, params)
    publish(cfg, report, xlsx)
    return report


def _faulty_only(dataset: Sequence[LabeledRecord]) -> List[LabeledRecord]:
    return [s for s in dataset if s.level1 == Level1Label.FAULTY]


def _new_class_split(cfg: ExperimentConfig) -> Tuple[List[List[LabeledRecord]], List[LabeledRecord]]:
    schedule = [[FaultClass(name) for name in entry] for entry in cfg.class_schedule]
    faulty = _faulty_only(load_or_generate(cfg))
    databases, remainder = class_filtered_databases(faulty, schedule, cfg.new_class_database_sizes, cfg.seed)
    validation = _validation_slice(remainder, cfg.new_class_validation_size, 'NEW_CLASS_VALIDATION_SIZE')
    return databases, validation


def _level2_arrays(samples: Sequence[LabeledRecord], params: NormalizationParams) -> Tuple[np.ndarray, np.ndarray]:
    X, _, y2 = to_arrays(samples, params)
    return X, y2


def run_new_class_experiment(cfg: ExperimentConfig, xlsx: bool = False) -> SessionReport:
    """
    Level-2 (fault type) run where classes enter following CLASS_SCHEDULE

    Per-class recall shows when a newly introduced class starts being recognized.
    """
    databases, validation = _new_class_split(cfg)
    params = first_database_normalizer(databases, cfg)
    arrays = [_level2_arrays(db, params) for db in databases]

    report, _ = run_learnpp_sessions('level2', LEVEL2_NAMES, arrays, _level2_arrays(validation, params), cfg, params)
    publish(cfg, report, xlsx)
    return report


def first_new_class_session(schedule: Sequence[Sequence[str]]) -> Optional[int]:
    """Index of the first database after the first that adds a class, or None"""
    seen = set(schedule[0]) if schedule else set()
    for k, entry in enumerate(schedule[1:], start=1):
        if set(entry) - seen:
            return k
        seen |= set(entry)
    return None


def train_batch_mlp(X: np.ndarray, y: np.ndarray, cfg: ExperimentConfig) -> Tuple[Classifier, float]:
    """One MLP trained on everything at once; returns (model, training seconds)"""
    classes = tuple(int(c) for c in np.unique(y))
    data = TrainingSet(X, class_targets(y, classes))
    mlp_config = MlpConfig(
        n_inputs=X.shape[1],
        n_hidden=cfg.batch_hidden_units,
        n_outputs=data.targets.shape[1],
        alpha=cfg.weak_alpha,
        max_iterations=cfg.batch_max_iterations,
        seed=cfg.seed,
    )
    start = time.perf_counter()
    model = train_scg(mlp_config, data, classes=classes)
    return model, time.perf_counter() - start


@dataclass
class BaselineReport:
    """Batch MLP trained on all databases vs only the databases before the first new class"""
    pooled: MetricsReport
    starved: MetricsReport
    pooled_size: int
    starved_size: int
    starved_databases: int
    class_names: List[str] = field(default_factory=lambda: list(LEVEL2_NAMES))

    def __iter__(self):
        return iter((self.pooled, self.starved))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'class_names': list(self.class_names),
            'pooled': {'training_size': self.pooled_size, **self.pooled.to_dict()},
            'starved': {
                'training_size': self.starved_size,
                'databases': self.starved_databases,
                **self.starved.to_dict(),
            },
        }

    def timings(self) -> Dict[str, Any]:
        return {'pooled': self.pooled.timings(), 'starved': self.starved.timings()}

    def tables(self) -> List[Table]:
        rows = []
        for name, size, metrics in (('Pooled', self.pooled_size, self.pooled),
                                    ('Class-starved', self.starved_size, self.starved)):
            rows.append([name, size, 100.0 * metrics.accuracy] + list(metrics.per_class_recall))
        return [Table(
            title="Batch MLP on the validation set",
            headers=['Model', 'Training samples', 'Accuracy (%)'] + [f"Recall {n}" for n in self.class_names],
            rows=rows,
        )]


def run_batch_baseline(cfg: ExperimentConfig, xlsx: bool = False) -> BaselineReport:
    """
    Batch MLP baselines on the new-class databases

    The pooled model sees every database; the class-starved one only the
    databases before the first one introducing a new class. Both are tested
    on the full validation set.

    Returns:
        BaselineReport, which unpacks as (pooled, starved)
    """
    databases, validation = _new_class_split(cfg)
    cut = first_new_class_session(cfg.class_schedule)
    if cut is None:
        logger.warning("CLASS_SCHEDULE never adds a class; the class-starved model uses database 1 only")
        cut = 1

    pooled_records = [s for db in databases for s in db]
    starved_records = [s for db in databases[:cut] for s in db]
    params = fit_normalizer([s.record for s in pooled_records], TdcgVariant(cfg.tdcg_variant))
    X_val, y_val = _level2_arrays(validation, params)
    classes = range(len(LEVEL2_CLASSES))

    reports = []
    for name, records in (('pooled', pooled_records), ('starved', starved_records)):
        X, y = _level2_arrays(records, params)
        logger.info("Training %s batch MLP on %d samples", name, len(y))
        model, seconds = train_batch_mlp(X, y, cfg)
        reports.append(evaluate(model, X_val, y_val, classes=classes, train_seconds=seconds))

    report = BaselineReport(
        pooled=reports[0],
        starved=reports[1],
        pooled_size=len(pooled_records),
        starved_size=len(starved_records),
        starved_databases=cut,
    )
    publish(cfg, report, xlsx)
    return report


@dataclass
class BatchCompareResult:
    """Batch classifiers per diagnosis level, with majority-class baselines"""
    comparison: ComparisonReport
    majority: Dict[int, MetricsReport]
    train_size: int
    test_size: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'train_size': self.train_size,
            'test_size': self.test_size,
            **self.comparison.to_dict(),
            'majority_baseline': {f"level{level}": m.to_dict() for level, m in sorted(self.majority.items())},
        }

    def timings(self) -> Dict[str, Any]:
        return self.comparison.timings()

    def tables(self) -> List[Table]:
        tables = []
        for level in sorted({r.level for r in self.comparison.rows}):
            rows = []
            for r in self.comparison.rows:
                if r.level != level:
                    continue
                m = r.metrics
                rows.append([r.classifier, r.selected, m.accuracy, m.sensitivity, m.specificity,
                             round(m.train_seconds, 3), round(m.classify_seconds, 3)])
            if level in self.majority:
                rows.append(['Majority', '', self.majority[level].accuracy, None, None, None, None])
            tables.append(Table(
                title=f"Level {level} batch comparison",
                headers=['Classifier', 'Selected', 'Accuracy', 'Sensitivity', 'Specificity',
                         'Train (s)', 'Classify (s)'],
                rows=rows,
            ))
        return tables


def batch_settings(cfg: ExperimentConfig) -> BatchSettings:
    return BatchSettings(
        mlp_hidden_candidates=cfg.mlp_hidden_candidates,
        rbf_center_candidates=cfg.rbf_center_candidates,
        rbf_width_rules=cfg.rbf_width_rules,
        svm_kernels=tuple(KernelSpec.parse(text) for text in cfg.svm_kernels),
        svm_Cs=cfg.svm_c_values,
        folds=cfg.cv_folds,
        seed=cfg.seed,
        alpha=cfg.weak_alpha,
        max_iterations=cfg.batch_max_iterations,
    )


def run_batch_compare(cfg: ExperimentConfig, xlsx: bool = False) -> BatchCompareResult:
    """
    MLP, RBF and SVM trained on the same sum(DATABASE_SIZES) samples and
    tested on the same TEST_SIZE samples, at both diagnosis levels
    """
    dataset = load_or_generate(cfg)
    n_train = sum(cfg.database_sizes)
    (train, test), _ = split_into_databases(dataset, [n_train, cfg.test_size], cfg.seed)
    params = fit_normalizer([s.record for s in train], TdcgVariant(cfg.tdcg_variant))
    train_arrays = to_arrays(train, params)
    test_arrays = to_arrays(test, params)

    comparison = compare_batch_classifiers(train_arrays, test_arrays, batch_settings(cfg))

    _, y1_train, y2_train = train_arrays
    _, y1_test, y2_test = test_arrays
    majority = {1: majority_baseline(y1_train, y1_test)}
    faulty_train, faulty_test = y1_train == FAULTY, y1_test == FAULTY
    if np.any(faulty_train) and np.any(faulty_test):
        majority[2] = majority_baseline(y2_train[faulty_train], y2_test[faulty_test])

    for (level, name), model in sorted(comparison.models.items()):
        snapshot_exporter.save(model, cfg.output_dir / f"batch_level{level}_{name.lower()}.json", params)

    result = BatchCompareResult(comparison, majority, len(train), len(test))
    publish(cfg, result, xlsx)
    return result


@dataclass
class GenDataResult:
    dataset_path: Path
    class_counts: Dict[str, int]
    nearest_centroid_accuracy: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'dataset_file': self.dataset_path.name,
            'sample_count': sum(self.class_counts.values()),
            'class_counts': dict(self.class_counts),
            'nearest_centroid_accuracy': self.nearest_centroid_accuracy,
        }

    def timings(self) -> Dict[str, Any]:
        return {}

    def tables(self) -> List[Table]:
        rows = [[name, count] for name, count in self.class_counts.items()]
        rows.append(['Total', sum(self.class_counts.values())])
        return [
            Table(title=f"Generated {self.dataset_path.name}", headers=['Class', 'Samples'], rows=rows),
            Table(title="Separability check", headers=['Oracle', 'Accuracy'],
                  rows=[['Nearest centroid (log ppm)', self.nearest_centroid_accuracy]]),
        ]


def run_gen_data(cfg: ExperimentConfig, xlsx: bool = False) -> GenDataResult:
    """Generate a synthetic dataset and write it as dataset.csv"""
    proportions = {FaultClass(name): value for name, value in cfg.class_proportions}
    dataset = generate_dataset(default_generator_config(cfg.sample_count, cfg.seed, proportions))
    path = dataset_parser.write_dataset(dataset, cfg.output_dir / 'dataset.csv')

    counts = {c.value: 0 for c in FAULT_CLASSES}
    for sample in dataset:
        counts[FaultClass.of(sample).value] += 1
    result = GenDataResult(path, counts, nearest_centroid_accuracy(dataset, seed=cfg.seed))
    publish(cfg, result, xlsx)
    return result


def _normalized_inputs(records: Sequence[GasRecord], params: Optional[NormalizationParams],
                       snapshot: Path) -> np.ndarray:
    if params is None:
        raise ValueError(f"{snapshot}: snapshot carries no normalization bounds")
    raw = np.vstack([record_features(r, params.variant) for r in records])
    return normalize_matrix(raw, params)


@dataclass
class DiagnoseResult:
    sample_ids: List[str]
    diagnoses: List[Diagnosis]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'diagnoses': [
                {'sample_id': sid, **d.to_dict()} for sid, d in zip(self.sample_ids, self.diagnoses)
            ],
        }

    def timings(self) -> Dict[str, Any]:
        return {}

    def tables(self) -> List[Table]:
        rows = []
        for sid, d in zip(self.sample_ids, self.diagnoses):
            gamma2 = list(d.level2_confidence) if d.level2_confidence is not None else [None] * len(LEVEL2_CLASSES)
            rows.append([sid, d.level1.value] + list(d.level1_confidence)
                        + [d.level2.value if d.level2 else ''] + gamma2)
        return [Table(
            title="Diagnosis",
            headers=['Sample', 'Level 1'] + [f"γ {n}" for n in LEVEL1_NAMES]
                    + ['Level 2'] + [f"γ {n}" for n in LEVEL2_NAMES],
            rows=rows,
        )]


def run_diagnose(cfg: ExperimentConfig, input_path: Optional[Path] = None, xlsx: bool = False) -> DiagnoseResult:
    """
    Diagnose every row of a gas-record CSV with two saved models

    Each level's inputs are normalized with the bounds stored in its own snapshot.
    """
    input_path = input_path or cfg.dataset_path
    if input_path is None:
        raise ValueError("diagnose needs an input CSV (--input or DATASET_PATH)")
    records = dataset_parser.read_records(input_path)
    if not records:
        raise ValueError(f"{input_path}: no records to diagnose")

    level1_model, params1 = snapshot_exporter.load(cfg.level1_model)
    level2_model, params2 = snapshot_exporter.load(cfg.level2_model)
    X1 = _normalized_inputs(records, params1, cfg.level1_model)
    X2 = _normalized_inputs(records, params2, cfg.level2_model)

    diagnoses = diagnose_batch(level1_model, level2_model, X1, X2)
    result = DiagnoseResult([r.sample_id for r in records], diagnoses)
    publish(cfg, result, xlsx)
    return result


@dataclass
class ModelInfo:
    path: Path
    info: Dict[str, Any]
    normalization: Optional[NormalizationParams]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'file': self.path.name,
            'model': self.info,
            'normalization': self.normalization.to_dict() if self.normalization else None,
        }

    def timings(self) -> Dict[str, Any]:
        return {}

    def tables(self) -> List[Table]:
        rows = [[key, value if isinstance(value, (int, float, str)) else str(value)]
                for key, value in sorted(self.info.items())]
        rows.append(['normalization', self.normalization.variant.value if self.normalization else None])
        return [Table(title=f"Model {self.path.name}", headers=['Field', 'Value'], rows=rows)]


def inspect_model(path: Path) -> ModelInfo:
    """Describe a snapshot without running it"""
    path = Path(path)
    model, params = snapshot_exporter.load(path)
    return ModelInfo(path, model.get_model_info(), params)
