"""Document-parsing benchmark scoring, data curation and assembly tools."""

__version__ = "0.1.0"
