import sys

from secnet.main import dispatch

sys.exit(dispatch())
