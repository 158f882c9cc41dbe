from mmsplit.cli import main

main()
