def tally(word):
    seen = {}
    for ch in word:
        seen[ch] = seen.get(ch, 0) + 1
    return seen
