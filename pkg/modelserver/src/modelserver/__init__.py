"""HTTP sidecar serving masked-LM capabilities over the synthmask wire protocol."""

from .app import create_app
from .bundles import DebugBundle, ModelBundle, TransformersBundle, load_bundle
from .config import ServerConfig

__version__ = "0.1.0"

__all__ = [
    "DebugBundle",
    "ModelBundle",
    "ServerConfig",
    "TransformersBundle",
    "create_app",
    "load_bundle",
]
