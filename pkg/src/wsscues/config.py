"""JSON pipeline configuration and image manifests."""
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace

from .cues import CueThresholds
from .densecrf import DEFAULT_CUTOFF, CrfParams
from .errors import ConfigError
from .inference import DEFAULT_MARGIN
from .superpixel import FelzParams

CONFIG_ENV = "WSSCUES_CONFIG"


@dataclass(frozen=True)
class AmendConfig:
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        if not self.margin > 0:
            raise ValueError("margin must be > 0")


@dataclass(frozen=True)
class RefineConfig:
    steps: int = 300
    lr: float = 100.0
    crf_every: int = 5
    seed_weight: float = 1.0
    boundary_weight: float = 1.0

    def __post_init__(self):
        if self.steps < 0 or not self.lr > 0 or self.crf_every < 1:
            raise ValueError("refine needs steps >= 0, lr > 0, crf_every >= 1")
        if self.seed_weight < 0 or self.boundary_weight < 0:
            raise ValueError("loss weights must be >= 0")


@dataclass(frozen=True)
class IOConfig:
    output_dir: str = "out"
    lattice_cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        if self.lattice_cutoff < 0:
            raise ValueError("lattice_cutoff must be >= 0")


_SECTIONS = {
    "felzenszwalb": FelzParams,
    "crf": CrfParams,
    "thresholds": CueThresholds,
    "amend": AmendConfig,
    "refine": RefineConfig,
    "io": IOConfig,
}


def _section(cls, name, data):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name!r} section: {exc}") from exc


@dataclass(frozen=True)
class PipelineConfig:
    felzenszwalb: FelzParams = field(default_factory=FelzParams)
    crf: CrfParams = field(default_factory=CrfParams)
    thresholds: CueThresholds = field(default_factory=CueThresholds)
    amend: AmendConfig = field(default_factory=AmendConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    io: IOConfig = field(default_factory=IOConfig)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        return cls(**{k: _section(_SECTIONS[k], k, v) for k, v in data.items()})

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self):
        return {name: asdict(getattr(self, name)) for name in _SECTIONS}

    def override(self, section, **values):
        """Copy with some keys of one section replaced (``None`` values skipped)."""
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        try:
            new = replace(getattr(self, section), **values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid {section!r} override: {exc}") from exc
        return replace(self, **{section: new})


@dataclass
class ImageRecord:
    image_id: str
    image: str
    activations: str
    features: str
    present: list
    gt: str = None
    predicted: list = None
    gray_activations: str = None
    gray_features: str = None
    logits: str = None


_PATH_FIELDS = ("image", "activations", "features", "gt", "gray_activations", "gray_features", "logits")


def parse_manifest(data, base_dir="."):
    """Build records from a manifest object; relative paths resolve against ``base_dir``."""
    items = data.get("images") if isinstance(data, dict) else data
    if not isinstance(items, list):
        raise ConfigError("manifest must be a list of records or {'images': [...]}")
    known = {f.name for f in fields(ImageRecord)}
    records, seen = [], set()
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise ConfigError(f"manifest entry {i} is not an object")
        unknown = set(item) - known
        if unknown:
            raise ConfigError(f"manifest entry {i}: unknown keys {sorted(unknown)}")
        try:
            rec = ImageRecord(**item)
        except TypeError as exc:
            raise ConfigError(f"manifest entry {i}: {exc}") from exc
        if rec.image_id in seen:
            raise ConfigError(f"duplicate image_id {rec.image_id!r}")
        seen.add(rec.image_id)
        for name in _PATH_FIELDS:
            value = getattr(rec, name)
            if value is not None:
                setattr(rec, name, os.path.join(base_dir, value))
        records.append(rec)
    return records


def load_manifest(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_manifest(data, os.path.dirname(os.path.abspath(path)))


def load_labels(path):
    """Read a ``{image_id: [class, ...]}`` JSON labels manifest."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read labels {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("labels manifest must map image ids to class lists")
    return {str(k): [int(c) for c in v] for k, v in data.items()}


def parse_class_list(text):
    """Parse ``"1,5,7"`` into ``[1, 5, 7]``."""
    text = text.strip()
    if not text:
        return []
    try:
        return [int(t) for t in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad class list {text!r}") from exc
