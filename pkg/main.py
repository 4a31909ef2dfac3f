"""Console entry point for the ripa-mmdg command line."""

from dotenv import load_dotenv

from adapters.cli.commands import create_cli_app

load_dotenv()

app = create_cli_app()


def main() -> None:
    app()


if __name__ == "__main__":
    main()
