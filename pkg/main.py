"""Launcher for running parabolic-cf from a source checkout."""

from src.main import main

if __name__ == "__main__":
    main()
