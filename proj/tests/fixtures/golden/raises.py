def boom(x):
    y = 10 // x
    return y
