import sys

from .cli import Cli

def main():
    cli = Cli()
    sys.exit(cli.run())

if __name__ == "__main__":
    main()
