from ._gmcborrow import *  # noqa: F401,F403
from ._gmcborrow import __version__  # noqa: F401
