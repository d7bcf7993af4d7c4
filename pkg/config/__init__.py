from .settings import Settings, settings
from .presets import GraphPresets

__all__ = ["Settings", "settings", "GraphPresets"]
