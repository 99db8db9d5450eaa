from .test_baselines import *
from .test_cli import *
from .test_config import *
from .test_constraints import *
from .test_core import *
from .test_dgp import *
from .test_embed import *
from .test_metrics import *
from .test_objective import *
from .test_reproduction import *
from .test_solver import *
from .test_theory import *
from .test_transport import *
from .test_utils import *
