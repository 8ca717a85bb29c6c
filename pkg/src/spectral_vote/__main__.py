"""Allow ``python -m spectral_vote``."""

from spectral_vote.cli import main

if __name__ == "__main__":
    main()
