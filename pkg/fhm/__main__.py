from dotenv import load_dotenv

load_dotenv()

from .main import main  # noqa: E402

main()
