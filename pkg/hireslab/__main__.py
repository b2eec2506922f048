"""
Allows ``python -m hireslab``.
"""
from hireslab.main import run

run()
