"""Polarization-multiplexed NFDM/OFDM link simulation based on the Manakov NFT."""

__version__ = "0.1.0"
