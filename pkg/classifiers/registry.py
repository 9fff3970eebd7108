"""
Model registry
Maps snapshot model kinds and weak-learner kinds to the classes that build them
"""

from typing import Any, Dict, List, Type

from classifiers.base import Classifier, WeakLearner
from classifiers.mlp import MlpLearner, MlpModel
from classifiers.rbf import RbfLearner, RbfModel
from classifiers.svm import KernelSpec, SvmClassifier, SvmLearner


class ModelRegistry:
    """Routes snapshot payloads to the classifier class that restores them"""

    def __init__(self):
        self.models: Dict[str, Type[Classifier]] = {}
        self.learners: Dict[str, Type[WeakLearner]] = {}
        self._initialize_models()

    def _initialize_models(self):
        for model_cls in (MlpModel, RbfModel, SvmClassifier):
            self.models[model_cls.kind] = model_cls
        for learner_cls in (MlpLearner, RbfLearner, SvmLearner):
            self.learners[learner_cls.kind] = learner_cls

    def get_available_kinds(self) -> List[str]:
        return sorted(self.models)

    def restore(self, kind: str, payload: Dict[str, Any]) -> Classifier:
        """Rebuild a classifier from its snapshot payload"""
        if kind not in self.models:
            raise ValueError(f"Model kind '{kind}' not available. Available: {self.get_available_kinds()}")
        return self.models[kind].from_dict(payload)

    def learner_from_dict(self, data: Dict[str, Any]) -> WeakLearner:
        """Rebuild weak-learner settings written by WeakLearner.to_dict"""
        settings = dict(data)
        kind = settings.pop('kind', None)
        if kind not in self.learners:
            raise ValueError(f"Learner kind '{kind}' not available. Available: {sorted(self.learners)}")
        if kind == 'svm':
            settings['kernel'] = KernelSpec(**settings['kernel'])
        return self.learners[kind](**settings)


# Global registry instance
model_registry = ModelRegistry()
