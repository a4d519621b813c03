"""Analytic logical-to-physical maps with Jacobians and closed-form inverses."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import OutOfDomainError

TWO_PI = 2.0 * np.pi


class MappingKind(str, Enum):
    IDENTITY = "identity"
    CIRCULAR = "circular"
    CZARNY = "czarny"


def _wrap(theta):
    t = np.mod(theta, TWO_PI)
    return np.where(t >= TWO_PI, 0.0, t)


def czarny_forward(r, theta, eps=0.3, e=1.4):
    """Czarny map ``(r, theta) -> (x, y)``."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    xi = 1.0 / np.sqrt(1.0 - 0.25 * eps * eps)
    q = np.sqrt(1.0 + eps * (eps + 2.0 * r * np.cos(theta)))
    x = (1.0 - q) / eps
    y = e * xi * r * np.sin(theta) / (2.0 - q)
    return x, y


def czarny_inverse(x, y, eps=0.3, e=1.4):
    """Closed-form inverse of :func:`czarny_forward`; theta in [0, 2 pi).

    Raises
    ------
    OutOfDomainError
        If a point has no preimage (the square-root argument would be negative).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xi = 1.0 / np.sqrt(1.0 - 0.25 * eps * eps)
    s = 1.0 - eps * x
    if np.any(s < 0.0):
        raise OutOfDomainError("point outside the image of the Czarny map")
    rc = (s * s - 1.0 - eps * eps) / (2.0 * eps)
    rs = y * (2.0 - s) / (e * xi)
    r = np.hypot(rc, rs)
    theta = np.where(r > 0.0, _wrap(np.arctan2(rs, rc)), 0.0)
    return r, theta


def czarny_jacobian(r, theta, eps=0.3, e=1.4):
    """Jacobian ``[[dx/dr, dx/dtheta], [dy/dr, dy/dtheta]]`` stacked on the last two axes."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    xi = 1.0 / np.sqrt(1.0 - 0.25 * eps * eps)
    c, s = np.cos(theta), np.sin(theta)
    q = np.sqrt(1.0 + eps * (eps + 2.0 * r * c))
    dq_dr = eps * c / q
    dq_dt = -eps * r * s / q
    w = 2.0 - q
    jac = np.empty(np.broadcast(r, theta).shape + (2, 2))
    jac[..., 0, 0] = -c / q
    jac[..., 0, 1] = r * s / q
    jac[..., 1, 0] = e * xi * (s / w + r * s * dq_dr / (w * w))
    jac[..., 1, 1] = e * xi * (r * c / w + r * s * dq_dt / (w * w))
    return jac


@dataclass(frozen=True)
class Mapping:
    """Logical ``(r, theta)`` to physical ``(x, y)`` map.

    ``IDENTITY`` maps ``(r, theta)`` to itself, ``CIRCULAR`` is the polar map
    and ``CZARNY`` is the D-shaped map with elongation ``e`` and inverse aspect
    ratio ``eps``.
    """

    kind: MappingKind = MappingKind.CZARNY
    eps: float = 0.3
    e: float = 1.4

    @classmethod
    def identity(cls):
        return cls(MappingKind.IDENTITY)

    @classmethod
    def circular(cls):
        return cls(MappingKind.CIRCULAR)

    @classmethod
    def czarny(cls, eps=0.3, e=1.4):
        if not 0.0 < eps < 2.0:
            raise ValueError("Czarny eps must lie in (0, 2)")
        return cls(MappingKind.CZARNY, float(eps), float(e))

    @property
    def polar(self) -> bool:
        return self.kind is not MappingKind.IDENTITY

    def forward(self, r, theta):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if self.kind is MappingKind.IDENTITY:
            return np.broadcast_arrays(r * 1.0, theta * 1.0)
        if self.kind is MappingKind.CIRCULAR:
            return r * np.cos(theta), r * np.sin(theta)
        return czarny_forward(r, theta, self.eps, self.e)

    def jacobian(self, r, theta):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if self.kind is MappingKind.CZARNY:
            return czarny_jacobian(r, theta, self.eps, self.e)
        shape = np.broadcast(r, theta).shape
        jac = np.zeros(shape + (2, 2))
        if self.kind is MappingKind.IDENTITY:
            jac[..., 0, 0] = jac[..., 1, 1] = 1.0
            return jac
        c, s = np.cos(theta), np.sin(theta)
        jac[..., 0, 0] = c
        jac[..., 0, 1] = -r * s
        jac[..., 1, 0] = s
        jac[..., 1, 1] = r * c
        return jac

    def inverse(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind is MappingKind.IDENTITY:
            return np.broadcast_arrays(x * 1.0, y * 1.0)
        if self.kind is MappingKind.CIRCULAR:
            r = np.hypot(x, y)
            return r, np.where(r > 0.0, _wrap(np.arctan2(y, x)), 0.0)
        return czarny_inverse(x, y, self.eps, self.e)
