# HiRes vision pipeline and EntityGrid-QA benchmark package
__version__ = "1.0.0"
