"""
Dissolved gas records and feature extraction
Converts raw ppm concentrations into the ten normalized classifier inputs
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Stored gases, in feature order
GAS_FIELDS = ('ch4', 'c2h6', 'c2h4', 'c2h2', 'h2', 'co', 'co2', 'n2', 'o2')

# Feature order is part of the snapshot format
FEATURE_NAMES = ('CH4', 'C2H6', 'C2H4', 'C2H2', 'H2', 'CO', 'CO2', 'N2', 'O2', 'TDCG')
N_FEATURES = len(FEATURE_NAMES)


class Level1Label(str, Enum):
    """First diagnosis level: is the bushing faulty"""
    NORMAL = 'Normal'
    FAULTY = 'Faulty'


class Level2Label(str, Enum):
    """Second diagnosis level: fault type, only defined for faulty samples"""
    PARTIAL_DISCHARGE = 'PartialDischarge'
    THERMAL = 'Thermal'
    UNKNOWN_SOURCE = 'UnknownSource'


class TdcgVariant(str, Enum):
    """Which gases make up the total dissolved combustible gas"""
    STANDARD = 'Standard'
    WITHOUT_CO = 'WithoutCO'

    @classmethod
    def _missing_(cls, value):
        # Alias accepted in configs and snapshots
        if isinstance(value, str) and value.strip() == 'PaperLiteral':
            return cls.WITHOUT_CO
        return None


# Integer encodings used by the classifiers
LEVEL1_CLASSES: Tuple[Level1Label, ...] = (Level1Label.NORMAL, Level1Label.FAULTY)
LEVEL2_CLASSES: Tuple[Level2Label, ...] = (
    Level2Label.PARTIAL_DISCHARGE,
    Level2Label.THERMAL,
    Level2Label.UNKNOWN_SOURCE,
)
NO_LEVEL2 = -1


@dataclass(frozen=True)
class GasRecord:
    """Raw concentrations (ppm) of one oil sample"""
    ch4: float
    c2h6: float
    c2h4: float
    c2h2: float
    h2: float
    co: float
    co2: float
    n2: float
    o2: float
    sample_id: str = ''
    timestamp: Optional[float] = None

    def __post_init__(self):
        for name in GAS_FIELDS:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r} (sample {self.sample_id!r})")
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value!r} (sample {self.sample_id!r})")

    def gases(self) -> np.ndarray:
        """The nine stored concentrations in feature order"""
        return np.array([getattr(self, name) for name in GAS_FIELDS], dtype=float)


@dataclass(frozen=True)
class LabeledRecord:
    """A gas record with its diagnosis labels"""
    record: GasRecord
    level1: Level1Label
    level2: Optional[Level2Label] = None

    def __post_init__(self):
        if self.level1 == Level1Label.FAULTY and self.level2 is None:
            raise ValueError(f"Faulty sample {self.record.sample_id!r} needs a level-2 label")
        if self.level1 == Level1Label.NORMAL and self.level2 is not None:
            raise ValueError(f"Normal sample {self.record.sample_id!r} cannot carry a level-2 label")


@dataclass(frozen=True)
class LabeledSample:
    """Normalized feature vector with its labels"""
    features: np.ndarray
    level1: Level1Label
    level2: Optional[Level2Label] = None


@dataclass(frozen=True)
class NormalizationParams:
    """Per-feature linear normalization bounds fitted on a training set"""
    minimum: Tuple[float, ...]
    maximum: Tuple[float, ...]
    variant: TdcgVariant = TdcgVariant.STANDARD
    degenerate: Tuple[bool, ...] = field(default=())

    def __post_init__(self):
        if len(self.minimum) != N_FEATURES or len(self.maximum) != N_FEATURES:
            raise ValueError(f"Normalization bounds need {N_FEATURES} entries")
        for name, lo, hi in zip(FEATURE_NAMES, self.minimum, self.maximum):
            if lo > hi:
                raise ValueError(f"Feature {name}: min {lo} exceeds max {hi}")
        if not self.degenerate:
            object.__setattr__(
                self, 'degenerate', tuple(lo == hi for lo, hi in zip(self.minimum, self.maximum))
            )

    def to_dict(self) -> Dict:
        return {
            'feature_order': list(FEATURE_NAMES),
            'minimum': list(self.minimum),
            'maximum': list(self.maximum),
            'variant': self.variant.value,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'NormalizationParams':
        if tuple(data.get('feature_order', FEATURE_NAMES)) != FEATURE_NAMES:
            raise ValueError(f"Unsupported feature order: {data.get('feature_order')}")
        return cls(
            minimum=tuple(float(v) for v in data['minimum']),
            maximum=tuple(float(v) for v in data['maximum']),
            variant=TdcgVariant(data.get('variant', TdcgVariant.STANDARD.value)),
        )


def compute_tdcg(record: GasRecord, variant: TdcgVariant = TdcgVariant.STANDARD) -> float:
    """
    Total dissolved combustible gas in ppm

    Args:
        record: Gas record
        variant: STANDARD adds CO to the five hydrocarbon/hydrogen gases,
            WITHOUT_CO leaves it out

    Returns:
        Summed concentration
    """
    total = record.h2 + record.ch4 + record.c2h2 + record.c2h4 + record.c2h6
    if TdcgVariant(variant) == TdcgVariant.STANDARD:
        total += record.co
    return total


def record_features(record: GasRecord, variant: TdcgVariant = TdcgVariant.STANDARD) -> np.ndarray:
    """Raw 10-feature vector (nine gases plus TDCG)"""
    return np.append(record.gases(), compute_tdcg(record, variant))


def fit_normalizer(records: Sequence[GasRecord],
                   variant: TdcgVariant = TdcgVariant.STANDARD) -> NormalizationParams:
    """
    Fit per-feature min/max bounds on a training set

    Args:
        records: Fitting set, must be nonempty
        variant: TDCG definition used for the tenth feature

    Returns:
        Immutable normalization parameters
    """
    if len(records) == 0:
        raise ValueError("empty fitting set")

    raw = np.vstack([record_features(r, variant) for r in records])
    params = NormalizationParams(
        minimum=tuple(float(v) for v in raw.min(axis=0)),
        maximum=tuple(float(v) for v in raw.max(axis=0)),
        variant=TdcgVariant(variant),
    )
    if any(params.degenerate):
        names = [n for n, d in zip(FEATURE_NAMES, params.degenerate) if d]
        logger.debug("Degenerate features in fitting set: %s", ', '.join(names))
    return params


def normalize_matrix(raw: np.ndarray, params: NormalizationParams) -> np.ndarray:
    """Normalize raw feature rows, clamping out-of-envelope values into [0, 1]"""
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    if raw.shape[1] != N_FEATURES:
        raise ValueError(f"Expected {N_FEATURES} features, got {raw.shape[1]}")
    if not np.all(np.isfinite(raw)):
        raise ValueError("Feature values must be finite")

    lo = np.asarray(params.minimum)
    hi = np.asarray(params.maximum)
    degenerate = np.asarray(params.degenerate)
    span = np.where(degenerate, 1.0, hi - lo)

    values = (raw - lo) / span
    if np.any((values < 0.0) | (values > 1.0)):
        logger.debug("Clamping %d out-of-envelope feature values", int(np.sum((values < 0) | (values > 1))))
    values = np.clip(values, 0.0, 1.0)
    values[:, degenerate] = 0.5
    return values


def normalize(record: GasRecord, params: NormalizationParams,
              variant: Optional[TdcgVariant] = None) -> np.ndarray:
    """
    Normalize one record into a FeatureVector

    Args:
        record: Gas record
        params: Fitted bounds
        variant: Must match the variant the bounds were fitted with (defaults to it)

    Returns:
        Array of 10 values in [0, 1]
    """
    if variant is not None and TdcgVariant(variant) != params.variant:
        raise ValueError(f"TDCG variant {variant} does not match fitted variant {params.variant.value}")
    return normalize_matrix(record_features(record, params.variant), params)[0]


def denormalize(values: np.ndarray, params: NormalizationParams) -> np.ndarray:
    """Inverse affine map back to raw feature units"""
    values = np.asarray(values, dtype=float)
    lo = np.asarray(params.minimum)
    hi = np.asarray(params.maximum)
    return lo + values * (hi - lo)


def level2_index(label: Optional[Level2Label]) -> int:
    return NO_LEVEL2 if label is None else LEVEL2_CLASSES.index(label)


def to_arrays(samples: Sequence[LabeledRecord],
              params: NormalizationParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Turn labeled records into classifier arrays

    Returns:
        (X, level-1 labels, level-2 labels) where level-2 is -1 for normal samples
    """
    if len(samples) == 0:
        return np.empty((0, N_FEATURES)), np.empty(0, dtype=int), np.empty(0, dtype=int)
    raw = np.vstack([record_features(s.record, params.variant) for s in samples])
    X = normalize_matrix(raw, params)
    y1 = np.array([LEVEL1_CLASSES.index(s.level1) for s in samples], dtype=int)
    y2 = np.array([level2_index(s.level2) for s in samples], dtype=int)
    return X, y1, y2


def labeled_samples(samples: Sequence[LabeledRecord], params: NormalizationParams) -> List[LabeledSample]:
    """Normalized samples keeping their enum labels"""
    X, _, _ = to_arrays(samples, params)
    return [LabeledSample(features=x, level1=s.level1, level2=s.level2) for x, s in zip(X, samples)]
