"""Three-player GAN: a generator rewarded for samples that are realistic and hard to classify."""

__version__ = "0.1.0"
