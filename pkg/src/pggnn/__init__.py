"""Joint distance / torsion prediction on protein graphs with a numpy autodiff core."""

__version__ = "0.1.0"
