def g(x):
    if x > 0:
        r = 'pos'
    else:
        r = 'neg'
    return r
