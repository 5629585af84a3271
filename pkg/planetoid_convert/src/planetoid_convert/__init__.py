"""One-shot converter from raw Planetoid citation-network distribution
files to the dataset directory format consumed by ssgcn."""

from .convert import ConversionError, RawPlanetoidBundle, convert, load_raw_bundle

__version__ = "0.1.0"
