"""
Synthetic DGA data generator
Seeded stand-in for field bushing data, with per-class log-normal gas signatures
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from dga.features import (
    GAS_FIELDS,
    GasRecord,
    LabeledRecord,
    Level1Label,
    Level2Label,
)

logger = logging.getLogger(__name__)


class FaultClass(str, Enum):
    """Combined label used by the generator"""
    NORMAL = 'Normal'
    PARTIAL_DISCHARGE = 'PartialDischarge'
    THERMAL = 'Thermal'
    UNKNOWN_SOURCE = 'UnknownSource'

    @property
    def labels(self) -> Tuple[Level1Label, Optional[Level2Label]]:
        if self is FaultClass.NORMAL:
            return Level1Label.NORMAL, None
        return Level1Label.FAULTY, Level2Label(self.value)

    @classmethod
    def of(cls, sample: LabeledRecord) -> 'FaultClass':
        if sample.level1 == Level1Label.NORMAL:
            return cls.NORMAL
        return cls(sample.level2.value)


FAULT_CLASSES = tuple(FaultClass)


@dataclass(frozen=True)
class SignatureMode:
    """One physical mechanism inside a class (e.g. corona vs arcing)"""
    name: str
    weight: float
    log_mean: Mapping[str, float]


@dataclass(frozen=True)
class FaultSignature:
    """Per-gas log-normal parameters of one class"""
    fault_class: FaultClass
    log_std: Mapping[str, float]
    modes: Tuple[SignatureMode, ...]

    def __post_init__(self):
        if not self.modes:
            raise ValueError(f"Signature for {self.fault_class.value} has no modes")
        for gas in GAS_FIELDS:
            if self.log_std.get(gas, 0.0) <= 0:
                raise ValueError(f"{self.fault_class.value}: log std of {gas} must be > 0")
            for mode in self.modes:
                if gas not in mode.log_mean:
                    raise ValueError(f"{self.fault_class.value}/{mode.name}: missing log mean for {gas}")
        if any(m.weight < 0 for m in self.modes) or sum(m.weight for m in self.modes) <= 0:
            raise ValueError(f"{self.fault_class.value}: mode weights must be non-negative and not all zero")

    @property
    def log_mean(self) -> Dict[str, float]:
        """Mode-weighted log-space mean per gas"""
        total = sum(m.weight for m in self.modes)
        return {
            gas: sum(m.weight * m.log_mean[gas] for m in self.modes) / total
            for gas in GAS_FIELDS
        }

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw `count` rows of strictly positive concentrations (ppm)"""
        weights = np.array([m.weight for m in self.modes], dtype=float)
        mode_idx = rng.choice(len(self.modes), size=count, p=weights / weights.sum())
        means = np.array([[m.log_mean[g] for g in GAS_FIELDS] for m in self.modes])
        stds = np.array([self.log_std[g] for g in GAS_FIELDS])
        log_values = means[mode_idx] + stds * rng.standard_normal((count, len(GAS_FIELDS)))
        return np.exp(log_values)


# Baseline (normal ageing) concentrations in ppm. Invented values, loosely
# below the IEEE C57.104 condition-1 limits.
_NORMAL_PPM = {
    'h2': 40.0, 'ch4': 25.0, 'c2h6': 20.0, 'c2h4': 12.0, 'c2h2': 2.0,
    'co': 250.0, 'co2': 2500.0, 'n2': 40000.0, 'o2': 15000.0,
}
_LOG_STD = 0.35

# Log-space elevation of each mode over the normal baseline
_MODE_SHIFTS = {
    FaultClass.NORMAL: [('ageing', 1.0, {})],
    FaultClass.PARTIAL_DISCHARGE: [
        ('corona', 0.6, {'h2': 1.45, 'ch4': 0.3}),
        ('arcing', 0.4, {'c2h2': 1.75, 'h2': 0.7, 'c2h4': 0.25}),
    ],
    FaultClass.THERMAL: [
        ('low_temperature', 0.5, {'ch4': 1.2, 'c2h6': 1.05, 'co2': 0.5}),
        ('high_temperature', 0.5, {'c2h4': 1.6, 'h2': 0.5, 'ch4': 0.5, 'co': 0.7}),
    ],
    FaultClass.UNKNOWN_SOURCE: [
        ('mixed', 1.0, {'h2': 0.65, 'ch4': 0.65, 'c2h6': 0.65, 'c2h4': 0.65, 'c2h2': 0.65, 'co': 0.65}),
    ],
}

# Invented: the field data never reports its class mix
DEFAULT_PROPORTIONS = {
    FaultClass.NORMAL: 0.5,
    FaultClass.PARTIAL_DISCHARGE: 0.18,
    FaultClass.THERMAL: 0.17,
    FaultClass.UNKNOWN_SOURCE: 0.15,
}


def default_signatures() -> Dict[FaultClass, FaultSignature]:
    """
    Built-in class signatures

    N2 and O2 never shift, so they carry no class information.
    """
    base = {gas: math.log(ppm) for gas, ppm in _NORMAL_PPM.items()}
    log_std = {gas: _LOG_STD for gas in GAS_FIELDS}
    signatures = {}
    for fault_class, modes in _MODE_SHIFTS.items():
        signatures[fault_class] = FaultSignature(
            fault_class=fault_class,
            log_std=dict(log_std),
            modes=tuple(
                SignatureMode(name, weight, {g: base[g] + shift.get(g, 0.0) for g in GAS_FIELDS})
                for name, weight, shift in modes
            ),
        )
    return signatures


@dataclass(frozen=True)
class GeneratorConfig:
    """Everything that determines a generated dataset"""
    proportions: Mapping[FaultClass, float]
    signatures: Mapping[FaultClass, FaultSignature]
    sample_count: int
    seed: int = 0

    def __post_init__(self):
        if any(p < 0 for p in self.proportions.values()):
            raise ValueError("Class proportions must be non-negative")
        total = sum(self.proportions.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"Class proportions must sum to 1, got {total!r}")
        missing = [c.value for c, p in self.proportions.items() if p > 0 and c not in self.signatures]
        if missing:
            raise ValueError(f"No signature for classes: {', '.join(missing)}")


def default_generator_config(sample_count: int, seed: int = 0,
                             proportions: Optional[Mapping[FaultClass, float]] = None) -> GeneratorConfig:
    return GeneratorConfig(
        proportions=dict(proportions or DEFAULT_PROPORTIONS),
        signatures=default_signatures(),
        sample_count=sample_count,
        seed=seed,
    )


def stratified_counts(proportions: Mapping[FaultClass, float], total: int) -> Dict[FaultClass, int]:
    """Largest-remainder rounding of class counts"""
    classes = [c for c in FAULT_CLASSES if c in proportions]
    exact = {c: proportions[c] * total for c in classes}
    counts = {c: int(math.floor(exact[c])) for c in classes}
    leftover = total - sum(counts.values())
    # Ties go to the class listed first
    order = sorted(classes, key=lambda c: (-(exact[c] - counts[c]), FAULT_CLASSES.index(c)))
    for c in order[:leftover]:
        counts[c] += 1
    return counts


def generate_dataset(config: GeneratorConfig) -> List[LabeledRecord]:
    """
    Generate a labeled synthetic dataset

    Args:
        config: Proportions, signatures, sample count and seed

    Returns:
        Exactly `sample_count` labeled records in seeded shuffled order
    """
    if config.sample_count <= 0:
        raise ValueError("sample count must be positive")

    rng = np.random.default_rng(config.seed)
    counts = stratified_counts(config.proportions, config.sample_count)

    rows = []
    for fault_class in FAULT_CLASSES:
        count = counts.get(fault_class, 0)
        if count == 0:
            continue
        values = config.signatures[fault_class].sample(count, rng)
        rows.extend((fault_class, v) for v in values)

    order = rng.permutation(len(rows))
    dataset = []
    for position, idx in enumerate(order):
        fault_class, values = rows[idx]
        level1, level2 = fault_class.labels
        record = GasRecord(
            **{gas: float(v) for gas, v in zip(GAS_FIELDS, values)},
            sample_id=f"S{position + 1:06d}",
        )
        dataset.append(LabeledRecord(record=record, level1=level1, level2=level2))

    logger.info("Generated %d samples: %s", len(dataset),
                ', '.join(f"{c.value}={n}" for c, n in counts.items()))
    return dataset


def split_into_databases(dataset: Sequence[LabeledRecord], sizes: Sequence[int],
                         seed: int) -> Tuple[List[List[LabeledRecord]], List[LabeledRecord]]:
    """
    Split a dataset into disjoint random databases

    Returns:
        (databases, remainder) where the remainder is the validation pool
    """
    if any(s < 0 for s in sizes):
        raise ValueError("Database sizes must be non-negative")
    if sum(sizes) > len(dataset):
        raise ValueError(f"Requested {sum(sizes)} samples but dataset has {len(dataset)}")

    order = np.random.default_rng(seed).permutation(len(dataset))
    databases = []
    start = 0
    for size in sizes:
        databases.append([dataset[i] for i in order[start:start + size]])
        start += size
    remainder = [dataset[i] for i in order[start:]]
    return databases, remainder


def class_filtered_databases(dataset: Sequence[LabeledRecord],
                             schedule: Sequence[Iterable[FaultClass]],
                             sizes: Sequence[int],
                             seed: int) -> Tuple[List[List[LabeledRecord]], List[LabeledRecord]]:
    """
    Build databases whose classes are limited by a per-database allowlist

    Used for the new-class protocol, where a class only shows up in later
    databases. Samples are drawn without replacement from a seeded shuffle.

    Returns:
        (databases, remainder)
    """
    if len(schedule) != len(sizes):
        raise ValueError(f"Schedule has {len(schedule)} entries but {len(sizes)} sizes given")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(dataset))
    used = np.zeros(len(dataset), dtype=bool)
    classes = np.array([FAULT_CLASSES.index(FaultClass.of(dataset[i])) for i in range(len(dataset))])

    databases = []
    for k, (allowed, size) in enumerate(zip(schedule, sizes)):
        if not allowed:
            raise ValueError(f"Database {k + 1} has an empty class allowlist")
        allowed_idx = sorted(FAULT_CLASSES.index(FaultClass(c)) for c in allowed)
        picked = []
        for i in order:
            if len(picked) == size:
                break
            if not used[i] and classes[i] in allowed_idx:
                picked.append(i)
        if len(picked) < size:
            available = {c: int(np.sum(~used & (classes == c))) for c in allowed_idx}
            scarce = min(allowed_idx, key=lambda c: available[c])
            raise ValueError(
                f"Database {k + 1}: not enough samples of class {FAULT_CLASSES[scarce].value} "
                f"(only {len(picked)} of {size} allowed samples left)"
            )
        used[picked] = True
        databases.append([dataset[i] for i in picked])

    remainder = [dataset[i] for i in order if not used[i]]
    return databases, remainder


def nearest_centroid_accuracy(dataset: Sequence[LabeledRecord], train_fraction: float = 0.5,
                              seed: int = 0) -> float:
    """
    Calibration oracle: nearest-centroid accuracy in log(1 + ppm) space

    Centroids come from a seeded training share, accuracy from the rest.
    """
    log_gases = np.log1p(np.vstack([s.record.gases() for s in dataset]))
    labels = np.array([FAULT_CLASSES.index(FaultClass.of(s)) for s in dataset])
    order = np.random.default_rng(seed).permutation(len(dataset))
    cut = int(round(train_fraction * len(dataset)))
    train, test = order[:cut], order[cut:]

    present = np.unique(labels[train])
    centroids = np.vstack([log_gases[train][labels[train] == c].mean(axis=0) for c in present])
    distances = ((log_gases[test][:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    predicted = present[np.argmin(distances, axis=1)]
    return float(np.mean(predicted == labels[test]))
