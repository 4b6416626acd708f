"""dataflow-responder: truthful response generation from dataflow graphs."""

__version__ = "0.1.0"
__author__ = "Carlos Eduardo Ferreyra"

__all__ = ["__version__"]
