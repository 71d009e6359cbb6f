from .records import *
from .reader import *
