from kacspec.settings import BASE_DIR, KACSPEC

__version__ = KACSPEC["version"]
