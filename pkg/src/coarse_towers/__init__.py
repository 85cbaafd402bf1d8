__title__ = "coarse_towers"
__version__ = "1.0.0"
