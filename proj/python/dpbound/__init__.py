"""Certified upper bounds on failure probabilities of composite models."""

try:  # installed wheel: the extension lives inside this package
    from ._dpbound import *  # noqa: F401,F403
    from ._dpbound import __version__  # noqa: F401
except ImportError:  # build tree: the extension sits directly on sys.path
    from _dpbound import *  # noqa: F401,F403
    from _dpbound import __version__  # noqa: F401
