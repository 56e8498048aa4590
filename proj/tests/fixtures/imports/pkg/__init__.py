from .core import helper as public_helper

__all__ = ['public_helper']
