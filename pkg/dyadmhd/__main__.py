from dyadmhd.cli import main

main()
