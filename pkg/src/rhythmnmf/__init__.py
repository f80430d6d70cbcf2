"""Weekly phone-activity rhythms: NMF components, rank selection and sleep timing."""

__version__ = "0.1.0"
