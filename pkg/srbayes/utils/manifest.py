# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from pydantic import BaseModel

from srbayes.version import __version__

__all__ = ['file_digest', 'build_manifest', 'write_manifest']


def file_digest(path: Union[str, Path]) -> str:
    """SHA-256 digest of a file"""

    with open(path, 'rb') as f:
        return hashlib.sha256(f.read()).hexdigest()


def build_manifest(
    command: str,
    inputs: Mapping[str, Optional[Union[str, Path]]],
    seed: Optional[int] = None,
    **configs: Optional[BaseModel],
) -> Dict[str, Any]:
    """Content of a run manifest: command, tool version, seed, input digests and effective configurations

    Manifests carry no timestamp, so that two runs with equal manifests have equal outputs.

    Args:
        command: name of the command
        inputs: input files, by role
        seed: seed of the run
        configs: effective configurations, by name

    Returns:
        a JSON-serializable dictionary
    """

    return dict(
        command=command,
        version=__version__,
        seed=seed,
        inputs={
            role: dict(path=Path(path).name, sha256=file_digest(path))
            for role, path in sorted(inputs.items()) if path is not None
        },
        **{name: cfg.model_dump(mode='json') for name, cfg in sorted(configs.items()) if cfg is not None},
    )


def write_manifest(out_dir: Union[str, Path], manifest: Mapping[str, Any]) -> Path:
    """Write manifest.json to an output folder"""

    path = Path(out_dir).joinpath("manifest.json")
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return path
