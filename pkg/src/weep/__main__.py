from weep.cli import main

main()
