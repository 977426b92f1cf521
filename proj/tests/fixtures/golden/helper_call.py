def sq(v):
    return v * v


def sum_sq(a, b):
    t = sq(a)
    t += sq(b)
    return t
