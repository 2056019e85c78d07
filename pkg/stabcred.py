#! /usr/bin/env python3

from stabcred import _cli

if __name__ == "__main__":
    _cli.main()
