"""
Command-line entry point: python cli.py <command> [flags]
"""

from dotenv import load_dotenv

# Load environment variables before the settings are read
load_dotenv()

from fhm.main import main  # noqa: E402

if __name__ == "__main__":
    main()
