from .config import *
from .transition import *
from .core import *
