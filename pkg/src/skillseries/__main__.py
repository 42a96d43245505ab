"""Main entry point for running as a module."""

from skillseries.cli import main

if __name__ == "__main__":
    main()
