"""
Model snapshot export and import
Single JSON container for MLP, RBF, SVM and Learn++ models with their normalization
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import config
from classifiers.base import Classifier
from classifiers.registry import model_registry
from dga.features import FEATURE_NAMES, NormalizationParams
from ensemble.learnpp import EnsembleState

logger = logging.getLogger(__name__)


class SnapshotExporter:
    """Save and restore trained models"""

    def build(self, model: Classifier, normalization: Optional[NormalizationParams] = None) -> Dict[str, Any]:
        return {
            'format': config.SNAPSHOT_FORMAT,
            'format_version': config.SNAPSHOT_FORMAT_VERSION,
            'model_kind': model.kind,
            'feature_order': list(FEATURE_NAMES),
            'normalization': normalization.to_dict() if normalization else None,
            'model': model.to_dict(),
        }

    def dumps(self, model: Classifier, normalization: Optional[NormalizationParams] = None) -> str:
        return json.dumps(self.build(model, normalization), sort_keys=True, indent=2) + '\n'

    def save(self, model: Classifier, output_path: Path,
             normalization: Optional[NormalizationParams] = None) -> Path:
        """
        Write a snapshot file

        Args:
            model: Any registered classifier or an EnsembleState
            output_path: Target JSON file
            normalization: Bounds the model's inputs were normalized with

        Returns:
            Path to the written file
        """
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_text(self.dumps(model, normalization), encoding=config.EXPORT_ENCODING)
        logger.info("Saved %s snapshot to %s", model.kind, output_path)
        return output_path

    def restore(self, data: Dict[str, Any]) -> Tuple[Classifier, Optional[NormalizationParams]]:
        if data.get('format') != config.SNAPSHOT_FORMAT:
            raise ValueError(f"Not a model snapshot (format {data.get('format')!r})")
        if data.get('format_version') != config.SNAPSHOT_FORMAT_VERSION:
            raise ValueError(f"Unsupported snapshot version {data.get('format_version')!r}")
        if tuple(data.get('feature_order', ())) != FEATURE_NAMES:
            raise ValueError(f"Snapshot feature order {data.get('feature_order')} does not match {list(FEATURE_NAMES)}")

        kind = data['model_kind']
        if kind == EnsembleState.kind:
            model = EnsembleState.from_dict(data['model'])
        else:
            model = model_registry.restore(kind, data['model'])
        normalization = NormalizationParams.from_dict(data['normalization']) if data.get('normalization') else None
        return model, normalization

    def load(self, path: Path) -> Tuple[Classifier, Optional[NormalizationParams]]:
        """
        Read a snapshot file

        Returns:
            (model, normalization or None)
        """
        path = Path(path)
        if not path.is_file():
            raise ValueError(f"Snapshot not found: {path}")
        try:
            data = json.loads(path.read_text(encoding=config.EXPORT_ENCODING))
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: invalid JSON ({e})")
        try:
            return self.restore(data)
        except KeyError as e:
            raise ValueError(f"{path}: snapshot is missing field {e}")


# Global exporter instance
snapshot_exporter = SnapshotExporter()
