from slotgame.cli import main

main()
