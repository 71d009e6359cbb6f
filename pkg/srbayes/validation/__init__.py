from .splits import *
from .simulation import *
from .report import *
