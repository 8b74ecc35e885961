from ._ope import *  # noqa: F401,F403
