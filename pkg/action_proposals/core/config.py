"""
Pipeline configuration.

Every tunable threshold of the engine lives in one of the section
dataclasses below. A PipelineConfig can be read from a JSON or TOML
file, patched with ``section.key=value`` overrides and validated.
"""

import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, get_args

from .errors import InputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoringConfig:
    """Actionness scoring: human score plus lambda_p times the motion score."""
    lambda_p: float = 1.0


@dataclass(frozen=True)
class GmmConfig:
    """EM fitting of the positive/negative motion mixtures."""
    components: Optional[int] = None  # None: number of action classes
    max_iterations: int = 200
    tolerance: float = 1e-6
    variance_floor: float = 1e-6


@dataclass(frozen=True)
class LinkConfig:
    """Linking predicate between boxes of consecutive frames."""
    eta_o: float = 0.3
    eta_f: float = 0.5
    lambda_a: float = 1.0


@dataclass(frozen=True)
class SearchConfig:
    """Forward search / backward track."""
    pool_size: int = 50
    link: LinkConfig = field(default_factory=LinkConfig)


@dataclass(frozen=True)
class AssocConfig:
    """Greedy path-set association."""
    max_paths: int = 12
    eta_p: float = 0.3
    lambda_a: float = 1.0
    similarity_cap: float = 1e3
    use_similarity: bool = True
    min_path_duration: int = 10


@dataclass(frozen=True)
class CompletionConfig:
    """Tracking-by-detection gap filling."""
    max_gap: int = 30
    search_scale: float = 1.5
    scales: Tuple[float, ...] = (0.8, 0.9, 1.0, 1.1, 1.2)
    stride_fraction: float = 0.1
    negatives_per_positive: int = 8
    negative_iou: float = 0.3
    negative_offset: float = 0.5
    max_negatives: int = 200
    epochs: int = 20
    update_epochs: int = 3
    learning_rate: float = 0.1
    regularization: float = 1e-4
    frame_width: Optional[float] = None
    frame_height: Optional[float] = None

    @property
    def frame_bounds(self) -> Optional[Tuple[float, float]]:
        if self.frame_width is None or self.frame_height is None:
            return None
        return (self.frame_width, self.frame_height)


@dataclass(frozen=True)
class ProposalConfig:
    """Duration gate for emitted proposals."""
    min_duration: int = 20
    strict: bool = False


@dataclass(frozen=True)
class EvaluationConfig:
    """Track-level evaluation."""
    eta: float = 0.5
    recall_thresholds: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class PipelineConfig:
    """
    Complete configuration of the proposal pipeline.

    Attributes:
        scoring: Actionness weights
        gmm: Motion model fitting
        search: Candidate pool size and linking thresholds
        association: Path-set selection
        completion: Gap filling
        proposals: Duration gate
        evaluation: Metric thresholds
        seed: Base seed for every random choice
        workers: Number of videos processed concurrently
    """
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    gmm: GmmConfig = field(default_factory=GmmConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    association: AssocConfig = field(default_factory=AssocConfig)
    completion: CompletionConfig = field(default_factory=CompletionConfig)
    proposals: ProposalConfig = field(default_factory=ProposalConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    seed: int = 0
    workers: int = 1

    @property
    def link(self) -> LinkConfig:
        return self.search.link

    def validate(self) -> "PipelineConfig":
        """
        Check every documented range.

        Returns:
            self, for chaining

        Raises:
            InputError: if a value is out of range
        """
        problems = []

        def unit(name: str, value: float) -> None:
            if not 0.0 <= value <= 1.0:
                problems.append(f"{name} must be in [0, 1], got {value}")

        def non_negative(name: str, value: float) -> None:
            if value < 0:
                problems.append(f"{name} must be >= 0, got {value}")

        def positive(name: str, value: float) -> None:
            if value <= 0:
                problems.append(f"{name} must be > 0, got {value}")

        non_negative("scoring.lambda_p", self.scoring.lambda_p)
        if self.gmm.components is not None:
            positive("gmm.components", self.gmm.components)
        positive("gmm.max_iterations", self.gmm.max_iterations)
        positive("gmm.variance_floor", self.gmm.variance_floor)
        unit("search.link.eta_o", self.link.eta_o)
        non_negative("search.link.eta_f", self.link.eta_f)
        non_negative("search.link.lambda_a", self.link.lambda_a)
        positive("search.pool_size", self.search.pool_size)
        positive("association.max_paths", self.association.max_paths)
        unit("association.eta_p", self.association.eta_p)
        non_negative("association.lambda_a", self.association.lambda_a)
        positive("association.similarity_cap", self.association.similarity_cap)
        positive("association.min_path_duration", self.association.min_path_duration)
        if self.association.max_paths > self.search.pool_size:
            problems.append(
                f"association.max_paths ({self.association.max_paths}) must not exceed "
                f"search.pool_size ({self.search.pool_size})"
            )
        positive("completion.max_gap", self.completion.max_gap)
        if self.completion.search_scale < 1.0:
            problems.append(f"completion.search_scale must be >= 1, got {self.completion.search_scale}")
        if not self.completion.scales or any(s <= 0 for s in self.completion.scales):
            problems.append("completion.scales must be a non-empty list of positive factors")
        positive("completion.stride_fraction", self.completion.stride_fraction)
        non_negative("completion.negatives_per_positive", self.completion.negatives_per_positive)
        unit("completion.negative_iou", self.completion.negative_iou)
        positive("completion.learning_rate", self.completion.learning_rate)
        non_negative("completion.regularization", self.completion.regularization)
        positive("proposals.min_duration", self.proposals.min_duration)
        unit("evaluation.eta", self.evaluation.eta)
        for eta in self.evaluation.recall_thresholds:
            unit("evaluation.recall_thresholds", eta)
        positive("workers", self.workers)

        if problems:
            raise InputError("invalid configuration: " + "; ".join(problems))
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PipelineConfig":
        """Build a configuration from nested dictionaries (unknown keys are rejected)."""
        return merge_config(cls(), data)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _coerce(current: Any, value: Any, name: str, annotation: Any = None) -> Any:
    """Check an incoming value against the type of the field it replaces."""
    if current is None:
        if value is None:
            return None
        inner = [a for a in get_args(annotation) if a is not type(None)]
        if not inner:
            return value
        current = inner[0]()
    if isinstance(current, tuple):
        if not isinstance(value, (list, tuple)) or not all(_is_number(v) for v in value):
            raise InputError(f"{name} expects a list of numbers, got {value!r}")
        return tuple(float(v) for v in value)
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise InputError(f"{name} expects a boolean, got {value!r}")
        return value
    if isinstance(current, int):
        if _is_number(value) and float(value).is_integer():
            return int(value)
        raise InputError(f"{name} expects an integer, got {value!r}")
    if isinstance(current, float):
        if _is_number(value):
            return float(value)
        raise InputError(f"{name} expects a number, got {value!r}")
    return value


def _merge_section(section: Any, data: Dict[str, Any], prefix: str) -> Any:
    if not isinstance(data, dict):
        raise InputError(f"{prefix or 'config'} must be a table, got {data!r}")
    known = {f.name: f for f in fields(section)}
    changes = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if key not in known:
            raise InputError(f"unknown configuration key '{name}'")
        current = getattr(section, key)
        if is_dataclass(current):
            changes[key] = _merge_section(current, value, f"{name}.")
        else:
            changes[key] = _coerce(current, value, name, known[key].type)
    return replace(section, **changes)


def merge_config(config: PipelineConfig, data: Dict[str, Any]) -> PipelineConfig:
    """
    Apply a nested dictionary of values on top of a configuration.

    A top-level ``lambda_a`` is shared by the linking predicate and the
    path similarity. A ``linking`` table is accepted as an alias of
    ``search.link``.
    """
    data = dict(data)
    shared_lambda = data.pop("lambda_a", None)
    linking = data.pop("linking", None)
    if linking is not None:
        if not isinstance(linking, dict) or not isinstance(data.get("search", {}), dict):
            raise InputError(f"linking and search must be tables, got {linking!r}")
        search = dict(data.get("search", {}))
        search["link"] = {**search.get("link", {}), **linking}
        data["search"] = search
    merged = _merge_section(config, data, "")
    if shared_lambda is not None:
        shared_lambda = _coerce(1.0, shared_lambda, "lambda_a")
        merged = replace(
            merged,
            search=replace(merged.search, link=replace(merged.search.link, lambda_a=shared_lambda)),
            association=replace(merged.association, lambda_a=shared_lambda),
        )
    return merged


def parse_override(text: str) -> Dict[str, Any]:
    """
    Turn ``section.key=value`` into a nested dictionary.

    The value is parsed as a JSON literal when possible, otherwise kept
    as a string.
    """
    if "=" not in text:
        raise InputError(f"override '{text}' is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise InputError(f"override '{text}' has an empty key")
    nested: Dict[str, Any] = {parts[-1]: value}
    for part in reversed(parts[:-1]):
        nested = {part: nested}
    return nested


def load_config_file(path: str) -> Dict[str, Any]:
    """Read a JSON or TOML configuration document."""
    file_path = Path(path)
    if not file_path.exists():
        raise InputError(f"configuration file not found: {path}")
    try:
        if file_path.suffix.lower() == ".toml":
            with open(file_path, "rb") as f:
                return tomllib.load(f)
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise InputError(f"{path}: cannot parse configuration: {e}") from e


def load_config(path: Optional[str] = None,
                overrides: Iterable[str] = (),
                base: Optional[PipelineConfig] = None,
                seed: Optional[int] = None) -> PipelineConfig:
    """
    Build a validated configuration.

    Args:
        path: Optional JSON/TOML file
        overrides: ``section.key=value`` strings applied after the file
        base: Starting configuration (defaults, or a profile)
        seed: Optional seed override

    Returns:
        Validated PipelineConfig
    """
    config = base or PipelineConfig()
    if path:
        config = merge_config(config, load_config_file(path))
        logger.info(f"Loaded configuration from {path}")
    for text in overrides:
        config = merge_config(config, parse_override(text))
    if seed is not None:
        config = replace(config, seed=int(seed))
    return config.validate()
