"""Module entry point, so the tool also runs as ``python -m coarse_towers``."""
from tqdm.contrib.logging import logging_redirect_tqdm

from .cli import main

if __name__ == "__main__":
    with logging_redirect_tqdm():
        main()
