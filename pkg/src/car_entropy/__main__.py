import sys

from car_entropy.cli import main

sys.exit(main())
