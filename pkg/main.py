"""Entry point for running cranlab from a source checkout."""

import sys
from pathlib import Path

# Load environment variables BEFORE importing toolkit modules
from dotenv import load_dotenv

load_dotenv()  # Load .env file

sys.path.insert(0, str(Path(__file__).resolve().parent / "src"))

from cranlab.main import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
