"""Movie-description pipeline: visual classifiers, LSTM decoder, caption metrics."""

from ._core import *  # noqa: F401,F403
