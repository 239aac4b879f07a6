"""Feature schema: ordered, unit-tagged descriptors of the city indicators."""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .exceptions import IoError, SchemaError, UnknownFeature


class Category(str, enum.Enum):
    CORE = "Core"
    COMMON = "Common"


@dataclass(frozen=True)
class FeatureDescriptor:
    name: str
    unit: str
    category: Category

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name.strip():
            raise SchemaError("feature name must be a non-empty string")
        try:
            object.__setattr__(self, "category", Category(self.category))
        except ValueError:
            raise SchemaError(
                f"feature {self.name!r}: category must be 'Core' or 'Common', got {self.category!r}"
            ) from None


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureDescriptor, ...]
    target_name: str
    target_unit: str = ""

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise SchemaError("schema has no features")
        seen = set()
        for f in self.features:
            if f.name in seen:
                raise SchemaError(f"duplicate feature name {f.name!r}")
            seen.add(f.name)
        if not self.target_name:
            raise SchemaError("target name must be non-empty")
        if self.target_name in seen:
            raise SchemaError(f"target name {self.target_name!r} collides with a feature")
        object.__setattr__(self, "_index", {f.name: i for i, f in enumerate(self.features)})

    def __len__(self):
        return len(self.features)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownFeature(name) from None

    def by_category(self, category) -> list[str]:
        category = Category(category)
        return [f.name for f in self.features if f.category is category]

    @property
    def core(self) -> list[str]:
        return self.by_category(Category.CORE)

    def to_dict(self) -> dict:
        return {
            "target": {"name": self.target_name, "unit": self.target_unit},
            "features": [
                {"name": f.name, "unit": f.unit, "category": f.category.value}
                for f in self.features
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> FeatureSchema:
        try:
            target = doc["target"]
            if isinstance(target, str):
                target = {"name": target}
            features = [
                FeatureDescriptor(d["name"], d.get("unit", ""), d["category"])
                for d in doc["features"]
            ]
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from None
        return cls(tuple(features), target["name"], target.get("unit", ""))

    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON form; stored in model files."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def subset(self, names) -> FeatureSchema:
        return FeatureSchema(
            tuple(self.features[self.index(n)] for n in names),
            self.target_name,
            self.target_unit,
        )

    def with_features(self, extra) -> FeatureSchema:
        return FeatureSchema(self.features + tuple(extra), self.target_name, self.target_unit)


def load_schema(path) -> FeatureSchema:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read schema {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    return FeatureSchema.from_dict(doc)


def save_schema(schema: FeatureSchema, path) -> None:
    Path(path).write_text(
        json.dumps(schema.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def default_schema() -> FeatureSchema:
    """The bundled 85-indicator schema (10 core, 75 common)."""
    text = resources.files("citypower.data").joinpath("default_schema.json").read_text("utf-8")
    return FeatureSchema.from_dict(json.loads(text))
