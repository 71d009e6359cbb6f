from . import io, datasets, models, inference, projection, validation, utils
from .version import __version__  # noqa: F401
