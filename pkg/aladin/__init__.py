"""Двухуровневый распределённый ALADIN с децентрализованными внутренними решателями"""

__version__ = "1.0.0"
