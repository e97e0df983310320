"""Motor-imagery EEG graph classifier: python surface over the C++ core."""

try:
    from ._mieeg import *  # noqa: F401,F403
    from ._mieeg import __version__  # noqa: F401
except ImportError:  # in-build layout: the module sits on sys.path directly
    from _mieeg import *  # noqa: F401,F403
    from _mieeg import __version__  # noqa: F401
