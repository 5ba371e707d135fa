# Copyright 2024 egosocial developers

from .cli import main

main()
