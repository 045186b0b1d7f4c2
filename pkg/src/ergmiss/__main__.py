from .io.cli import main

main()
