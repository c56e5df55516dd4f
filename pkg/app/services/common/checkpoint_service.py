"""
Checkpoint Service: model parameters as a flat little-endian float64 file
plus a JSON sidecar with parameter names, shapes and the model configuration
"""
import json
import logging
from pathlib import Path

import numpy as np

from app.engine.models import CampModel, ModelConfig
from app.errors import FormatError, LoadError

logger = logging.getLogger(__name__)


class CheckpointService:

    @staticmethod
    def _paths(path: str | Path) -> tuple[Path, Path]:
        base = Path(path)
        if base.suffix in (".bin", ".json"):
            base = base.with_suffix("")
        return base.with_suffix(".bin"), base.with_suffix(".json")

    def save(self, model: CampModel, path: str | Path) -> Path:
        """Write `<path>.bin` and `<path>.json`; returns the .bin path"""
        bin_path, meta_path = self._paths(path)
        bin_path.parent.mkdir(parents=True, exist_ok=True)

        params = model.parameters()
        flat = np.concatenate([t.data.ravel() for t in params.values()]) if params else np.zeros(0)
        flat.astype("<f8").tofile(bin_path)

        meta = {
            "config": model.cfg.model_dump(mode="json"),
            "in_dim": model.in_dim,
            "num_classes": model.num_classes,
            "parameters": [{"name": name, "shape": list(t.shape)} for name, t in params.items()],
        }
        meta_path.write_text(json.dumps(meta, indent=2), encoding="utf-8")
        logger.info(f"💾 Saved checkpoint with {flat.size} values to {bin_path}")
        return bin_path

    def load(self, path: str | Path) -> CampModel:
        bin_path, meta_path = self._paths(path)
        if not bin_path.exists() or not meta_path.exists():
            raise LoadError(f"Checkpoint needs both {bin_path.name} and {meta_path.name} in {bin_path.parent}")

        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            cfg = ModelConfig.model_validate(meta["config"])
            model = CampModel(cfg, in_dim=int(meta["in_dim"]), num_classes=int(meta["num_classes"]))
        except (KeyError, ValueError) as e:
            raise FormatError(f"Malformed checkpoint sidecar {meta_path.name}: {e}")

        flat = np.fromfile(bin_path, dtype="<f8")
        params = model.parameters()
        expected = sum(int(np.prod(entry["shape"])) for entry in meta["parameters"])
        if flat.size != expected:
            raise FormatError(f"{bin_path.name} holds {flat.size} values, sidecar lists {expected}")

        offset = 0
        for entry in meta["parameters"]:
            name, shape = entry["name"], tuple(entry["shape"])
            size = int(np.prod(shape))
            if name not in params or params[name].shape != shape:
                raise FormatError(f"Checkpoint parameter {name} {shape} does not match the model")
            params[name].data[...] = flat[offset:offset + size].reshape(shape)
            offset += size

        logger.info(f"Loaded checkpoint {bin_path} ({cfg.arch.value}, L={cfg.num_layers})")
        return model


# Singleton instance
checkpoint_service = CheckpointService()
