"""Dispatcher so the tools also run as ``python -m reuseguard.run <tool>``."""

import sys

from . import cli

TOOLS = {
    "planner": cli.planner_main,
    "responder": cli.responder_main,
    "requester": cli.requester_main,
    "directoryd": cli.directoryd_main,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in TOOLS:
        names = ", ".join(sorted(TOOLS))
        print(f"usage: python -m reuseguard.run {{{names}}} ...", file=sys.stderr)
        return 2
    return TOOLS[argv[0]](argv[1:])


if __name__ == "__main__":
    sys.exit(main())
