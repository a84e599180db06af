"""Allow running as python -m action_proposals."""

import sys

from .app import ProposalApp


def main() -> int:
    return ProposalApp().run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
