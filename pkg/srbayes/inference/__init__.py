from .kernels import *
from .draws import *
from .mcmc import *
from .summaries import *
