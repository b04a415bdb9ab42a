import numpy as np


def positive_root(b, c):
    """Nonnegative root x of ``x * (x + b) = c`` for ``c >= 0``.

    Uses the cancellation-free form when ``b > 0`` so that recomposing
    ``x * (x + b)`` returns ``c`` to full relative precision.
    """
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    disc = np.sqrt(b * b + 4.0 * c)
    with np.errstate(divide="ignore", invalid="ignore"):
        stable = np.where(b + disc > 0, 2.0 * c / (b + disc), 0.0)
    out = np.where(b > 0, stable, 0.5 * (disc - b))
    return out if out.ndim else float(out)
