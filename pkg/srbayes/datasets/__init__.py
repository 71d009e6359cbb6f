from .jackknife import *
from .preprocessing import *
