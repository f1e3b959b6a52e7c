"""Simulation core: deployment, channel, PHY abstraction, schedulers and the TTI engine"""
