"""Entry point for running survrank as a module: python -m survrank"""

from survrank.main import app

if __name__ == "__main__":
    app()
