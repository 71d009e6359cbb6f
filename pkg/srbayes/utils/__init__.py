from .multithreading import *
from .metrics import *
from .manifest import *
