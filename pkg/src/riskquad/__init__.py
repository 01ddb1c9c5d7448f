"""Weighted generalized risk measures and the weighted risk quadrangle."""
