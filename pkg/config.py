"""
Configuration module for the DGA incremental diagnosis toolkit
Loads settings from environment variables and experiment key-value files
"""

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

from dotenv import dotenv_values, load_dotenv

# Load environment variables from .env file
load_dotenv()

# Base directories
BASE_DIR = Path(__file__).parent
CONFIG_DIR = BASE_DIR / 'configs'
OUTPUT_DIR = Path(os.getenv('DGA_OUTPUT_DIR', str(BASE_DIR / 'out')))

# Logging
LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO').upper()
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

# Default seed when neither the config file nor --seed gives one
DEFAULT_SEED = int(os.getenv('DGA_SEED', 0))

# File formats
SNAPSHOT_FORMAT = 'dga-diagnosis-snapshot'
SNAPSHOT_FORMAT_VERSION = 1
REPORT_FORMAT = 'dga-diagnosis-report'
REPORT_FORMAT_VERSION = 1
EXPORT_ENCODING = 'utf-8'

EXPERIMENT_KINDS = (
    'gen-data',
    'batch-compare',
    'incremental',
    'new-class',
    'batch-baseline',
    'diagnose',
    'inspect-model',
)

# Full-scale defaults: 5 databases of 300, 4000 validation samples, 20 hypotheses per session
DEFAULTS: Dict[str, str] = {
    'SEED': str(DEFAULT_SEED),
    'OUTPUT_DIR': str(OUTPUT_DIR),
    'DATASET_PATH': '',
    'SAMPLE_COUNT': '8000',
    'CLASS_PROPORTIONS': 'Normal=0.5,PartialDischarge=0.18,Thermal=0.17,UnknownSource=0.15',
    'TDCG_VARIANT': 'Standard',
    'DATABASE_SIZES': '300,300,300,300,300',
    'VALIDATION_SIZE': '4000',
    'HYPOTHESES_PER_SESSION': '20',
    'TR_FRACTION': '0.6666666666666666',
    'MAX_RETRIES': '50',
    'COMPOSITE_SCOPE': 'session',
    'WEAK_HIDDEN_UNITS': '5',
    'WEAK_MAX_ITERATIONS': '100',
    'WEAK_ALPHA': '0.01',
    'WEAK_ACCURACY_GOAL': '0.9',
    'WEAK_ERROR_GOAL': '',
    'NEW_CLASS_DATABASE_SIZES': '300,300,300,300,300',
    'NEW_CLASS_VALIDATION_SIZE': '1000',
    'CLASS_SCHEDULE': (
        'PartialDischarge+Thermal;PartialDischarge+Thermal;'
        'PartialDischarge+Thermal+UnknownSource;PartialDischarge+Thermal+UnknownSource;'
        'PartialDischarge+Thermal+UnknownSource'
    ),
    'BATCH_HIDDEN_UNITS': '10',
    'BATCH_MAX_ITERATIONS': '300',
    'MLP_HIDDEN_CANDIDATES': '5,10,15',
    'RBF_CENTER_CANDIDATES': '10,20,40,80',
    'RBF_WIDTH_RULES': 'em,max_distance',
    'SVM_KERNELS': 'linear,gaussian:0.5',
    'SVM_C_VALUES': '1,10',
    'CV_FOLDS': '3',
    'TEST_SIZE': '1000',
    'LEVEL1_MODEL': '',
    'LEVEL2_MODEL': '',
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Typed, validated experiment settings"""
    kind: str
    seed: int
    output_dir: Path
    dataset_path: Optional[Path]
    sample_count: int
    class_proportions: Tuple[Tuple[str, float], ...]
    tdcg_variant: str
    database_sizes: Tuple[int, ...]
    validation_size: int
    hypotheses_per_session: int
    tr_fraction: float
    max_retries: int
    composite_scope: str
    weak_hidden_units: int
    weak_max_iterations: int
    weak_alpha: float
    weak_accuracy_goal: Optional[float]
    weak_error_goal: Optional[float]
    new_class_database_sizes: Tuple[int, ...]
    new_class_validation_size: int
    class_schedule: Tuple[Tuple[str, ...], ...]
    batch_hidden_units: int
    batch_max_iterations: int
    mlp_hidden_candidates: Tuple[int, ...]
    rbf_center_candidates: Tuple[int, ...]
    rbf_width_rules: Tuple[str, ...]
    svm_kernels: Tuple[str, ...]
    svm_c_values: Tuple[float, ...]
    cv_folds: int
    test_size: int
    level1_model: Optional[Path]
    level2_model: Optional[Path]

    def to_dict(self) -> Dict:
        """Settings echoed into reports (paths as given, never resolved)"""
        return {
            'kind': self.kind,
            'seed': self.seed,
            'dataset_path': str(self.dataset_path) if self.dataset_path else None,
            'sample_count': self.sample_count,
            'class_proportions': dict(self.class_proportions),
            'tdcg_variant': self.tdcg_variant,
            'database_sizes': list(self.database_sizes),
            'validation_size': self.validation_size,
            'hypotheses_per_session': self.hypotheses_per_session,
            'tr_fraction': self.tr_fraction,
            'max_retries': self.max_retries,
            'composite_scope': self.composite_scope,
            'weak_hidden_units': self.weak_hidden_units,
            'weak_max_iterations': self.weak_max_iterations,
            'weak_alpha': self.weak_alpha,
            'weak_accuracy_goal': self.weak_accuracy_goal,
            'weak_error_goal': self.weak_error_goal,
            'new_class_database_sizes': list(self.new_class_database_sizes),
            'new_class_validation_size': self.new_class_validation_size,
            'class_schedule': [list(s) for s in self.class_schedule],
            'batch_hidden_units': self.batch_hidden_units,
            'batch_max_iterations': self.batch_max_iterations,
            'mlp_hidden_candidates': list(self.mlp_hidden_candidates),
            'rbf_center_candidates': list(self.rbf_center_candidates),
            'rbf_width_rules': list(self.rbf_width_rules),
            'svm_kernels': list(self.svm_kernels),
            'svm_c_values': list(self.svm_c_values),
            'cv_folds': self.cv_folds,
            'test_size': self.test_size,
        }


def _int_list(text: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in text.split(',') if v.strip())


def _float_list(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.split(',') if v.strip())


def _str_list(text: str) -> Tuple[str, ...]:
    return tuple(v.strip() for v in text.split(',') if v.strip())


def _proportions(text: str) -> Tuple[Tuple[str, float], ...]:
    pairs = []
    for item in _str_list(text):
        name, sep, value = item.partition('=')
        if not sep:
            raise ValueError(f"expected CLASS=VALUE, got {item!r}")
        pairs.append((name.strip(), float(value)))
    return tuple(pairs)


def _schedule(text: str) -> Tuple[Tuple[str, ...], ...]:
    return tuple(
        tuple(c.strip() for c in entry.split('+') if c.strip())
        for entry in text.split(';')
    )


def _optional_float(text: str) -> Optional[float]:
    return float(text) if text.strip() else None


def _path(text: str) -> Optional[Path]:
    return Path(text) if text.strip() else None


# Config key -> (field name, parser)
_FIELDS = {
    'SEED': ('seed', int),
    'OUTPUT_DIR': ('output_dir', Path),
    'DATASET_PATH': ('dataset_path', _path),
    'SAMPLE_COUNT': ('sample_count', int),
    'CLASS_PROPORTIONS': ('class_proportions', _proportions),
    'TDCG_VARIANT': ('tdcg_variant', str.strip),
    'DATABASE_SIZES': ('database_sizes', _int_list),
    'VALIDATION_SIZE': ('validation_size', int),
    'HYPOTHESES_PER_SESSION': ('hypotheses_per_session', int),
    'TR_FRACTION': ('tr_fraction', float),
    'MAX_RETRIES': ('max_retries', int),
    'COMPOSITE_SCOPE': ('composite_scope', str.strip),
    'WEAK_HIDDEN_UNITS': ('weak_hidden_units', int),
    'WEAK_MAX_ITERATIONS': ('weak_max_iterations', int),
    'WEAK_ALPHA': ('weak_alpha', float),
    'WEAK_ACCURACY_GOAL': ('weak_accuracy_goal', _optional_float),
    'WEAK_ERROR_GOAL': ('weak_error_goal', _optional_float),
    'NEW_CLASS_DATABASE_SIZES': ('new_class_database_sizes', _int_list),
    'NEW_CLASS_VALIDATION_SIZE': ('new_class_validation_size', int),
    'CLASS_SCHEDULE': ('class_schedule', _schedule),
    'BATCH_HIDDEN_UNITS': ('batch_hidden_units', int),
    'BATCH_MAX_ITERATIONS': ('batch_max_iterations', int),
    'MLP_HIDDEN_CANDIDATES': ('mlp_hidden_candidates', _int_list),
    'RBF_CENTER_CANDIDATES': ('rbf_center_candidates', _int_list),
    'RBF_WIDTH_RULES': ('rbf_width_rules', _str_list),
    'SVM_KERNELS': ('svm_kernels', _str_list),
    'SVM_C_VALUES': ('svm_c_values', _float_list),
    'CV_FOLDS': ('cv_folds', int),
    'TEST_SIZE': ('test_size', int),
    'LEVEL1_MODEL': ('level1_model', _path),
    'LEVEL2_MODEL': ('level2_model', _path),
}


def load_experiment_config(path: Optional[Path] = None, kind: str = 'incremental',
                           overrides: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    """
    Load an experiment config file in dotenv syntax

    Args:
        path: Key-value file (optional; defaults apply when omitted)
        kind: Experiment kind, one of EXPERIMENT_KINDS
        overrides: Values that win over the file (e.g. from CLI flags)

    Returns:
        Validated ExperimentConfig
    """
    values = dict(DEFAULTS)
    errors: List[str] = []

    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ValueError(f"Config file not found: {path}")
        for key, value in dotenv_values(path).items():
            if key not in _FIELDS:
                errors.append(f"{key} is not a known config key")
            else:
                values[key] = value if value is not None else ''
    for key, value in (overrides or {}).items():
        if key not in _FIELDS:
            errors.append(f"{key} is not a known config key")
        else:
            values[key] = str(value)

    parsed = {}
    for key, (name, parse) in _FIELDS.items():
        try:
            parsed[name] = parse(values[key])
        except ValueError as e:
            errors.append(f"{key}={values[key]!r}: {e}")
    if errors:
        raise ValueError("Configuration errors:\n" + "\n".join(f"  - {err}" for err in errors))

    cfg = ExperimentConfig(kind=kind, **parsed)
    validate_experiment_config(cfg)
    return cfg


def validate_experiment_config(cfg: ExperimentConfig) -> bool:
    """
    Validates the settings an experiment kind depends on
    Raises ValueError listing every problem
    """
    from classifiers.rbf import WIDTH_RULES
    from classifiers.svm import KernelSpec
    from dga.datagen import FaultClass
    from dga.features import TdcgVariant

    errors = []

    if cfg.kind not in EXPERIMENT_KINDS:
        errors.append(f"Unknown experiment kind {cfg.kind!r}")
    if cfg.seed < 0:
        errors.append(f"SEED must be >= 0, got {cfg.seed}")
    if cfg.sample_count <= 0:
        errors.append(f"SAMPLE_COUNT must be > 0, got {cfg.sample_count}")
    if cfg.dataset_path is not None and cfg.kind not in ('gen-data', 'diagnose', 'inspect-model') \
            and not cfg.dataset_path.is_file():
        errors.append(f"DATASET_PATH does not exist: {cfg.dataset_path}")

    names = [c.value for c in FaultClass]
    for name, value in cfg.class_proportions:
        if name not in names:
            errors.append(f"CLASS_PROPORTIONS: unknown class {name!r}")
        elif value < 0:
            errors.append(f"CLASS_PROPORTIONS: {name} must be >= 0")
    if abs(sum(v for _, v in cfg.class_proportions) - 1.0) > 1e-12:
        errors.append("CLASS_PROPORTIONS must sum to 1")
    try:
        TdcgVariant(cfg.tdcg_variant)
    except ValueError:
        errors.append(f"TDCG_VARIANT must be one of {[v.value for v in TdcgVariant]}")

    for key, sizes in (('DATABASE_SIZES', cfg.database_sizes),
                       ('NEW_CLASS_DATABASE_SIZES', cfg.new_class_database_sizes)):
        if not sizes or any(s <= 0 for s in sizes):
            errors.append(f"{key} needs one or more positive sizes")
    for key, value in (('VALIDATION_SIZE', cfg.validation_size),
                       ('NEW_CLASS_VALIDATION_SIZE', cfg.new_class_validation_size),
                       ('TEST_SIZE', cfg.test_size),
                       ('HYPOTHESES_PER_SESSION', cfg.hypotheses_per_session),
                       ('MAX_RETRIES', cfg.max_retries),
                       ('WEAK_HIDDEN_UNITS', cfg.weak_hidden_units),
                       ('WEAK_MAX_ITERATIONS', cfg.weak_max_iterations),
                       ('BATCH_HIDDEN_UNITS', cfg.batch_hidden_units),
                       ('BATCH_MAX_ITERATIONS', cfg.batch_max_iterations)):
        if value <= 0:
            errors.append(f"{key} must be > 0, got {value}")
    if not 0.0 < cfg.tr_fraction < 1.0:
        errors.append(f"TR_FRACTION must lie in (0, 1), got {cfg.tr_fraction}")
    if cfg.weak_alpha < 0:
        errors.append(f"WEAK_ALPHA must be >= 0, got {cfg.weak_alpha}")
    if cfg.weak_accuracy_goal is not None and not 0.0 < cfg.weak_accuracy_goal <= 1.0:
        errors.append(f"WEAK_ACCURACY_GOAL must lie in (0, 1], got {cfg.weak_accuracy_goal}")
    if cfg.weak_error_goal is not None and cfg.weak_error_goal < 0:
        errors.append(f"WEAK_ERROR_GOAL must be >= 0, got {cfg.weak_error_goal}")
    if cfg.composite_scope not in ('session', 'ensemble'):
        errors.append(f"COMPOSITE_SCOPE must be 'session' or 'ensemble', got {cfg.composite_scope!r}")

    if len(cfg.class_schedule) != len(cfg.new_class_database_sizes):
        errors.append(f"CLASS_SCHEDULE has {len(cfg.class_schedule)} entries but "
                      f"NEW_CLASS_DATABASE_SIZES has {len(cfg.new_class_database_sizes)}")
    for k, entry in enumerate(cfg.class_schedule, start=1):
        if not entry:
            errors.append(f"CLASS_SCHEDULE entry {k} is empty")
        for name in entry:
            if name not in names:
                errors.append(f"CLASS_SCHEDULE entry {k}: unknown class {name!r}")

    if not cfg.mlp_hidden_candidates or any(n <= 0 for n in cfg.mlp_hidden_candidates):
        errors.append("MLP_HIDDEN_CANDIDATES needs positive values")
    if not cfg.rbf_center_candidates or any(n <= 0 for n in cfg.rbf_center_candidates):
        errors.append("RBF_CENTER_CANDIDATES needs positive values")
    if not cfg.rbf_width_rules:
        errors.append("RBF_WIDTH_RULES needs at least one rule")
    for rule in cfg.rbf_width_rules:
        if rule not in WIDTH_RULES:
            errors.append(f"RBF_WIDTH_RULES: unknown rule {rule!r}, expected one of {list(WIDTH_RULES)}")
    if not cfg.svm_c_values or any(c <= 0 for c in cfg.svm_c_values):
        errors.append("SVM_C_VALUES needs positive values")
    if not cfg.svm_kernels:
        errors.append("SVM_KERNELS needs at least one kernel")
    for text in cfg.svm_kernels:
        try:
            KernelSpec.parse(text)
        except ValueError as e:
            errors.append(f"SVM_KERNELS: {e}")
    if cfg.cv_folds < 2:
        errors.append(f"CV_FOLDS must be >= 2, got {cfg.cv_folds}")

    if cfg.kind == 'diagnose':
        for key, value in (('LEVEL1_MODEL', cfg.level1_model), ('LEVEL2_MODEL', cfg.level2_model)):
            if value is None:
                errors.append(f"{key} is required for diagnose")
            elif not value.is_file():
                errors.append(f"{key} does not exist: {value}")

    if errors:
        raise ValueError(
            "Configuration errors:\n" + "\n".join(f"  - {err}" for err in errors)
        )

    return True
