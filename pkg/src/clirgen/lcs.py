"""Longest common substring, linear-time via a suffix automaton."""
from __future__ import annotations


def longest_common_substring(a: str, b: str) -> int:
    """Length in code points of the longest contiguous substring of both
    a and b. The automaton is built over the shorter string and the longer
    one is streamed through it."""
    if not a or not b:
        return 0
    if len(b) < len(a):
        a, b = b, a

    trans: list[dict[str, int]] = [{}]
    link: list[int] = [-1]
    length: list[int] = [0]
    last = 0
    for ch in a:
        cur = len(trans)
        trans.append({})
        length.append(length[last] + 1)
        link.append(-1)
        p = last
        while p != -1 and ch not in trans[p]:
            trans[p][ch] = cur
            p = link[p]
        if p == -1:
            link[cur] = 0
        else:
            q = trans[p][ch]
            if length[p] + 1 == length[q]:
                link[cur] = q
            else:
                clone = len(trans)
                trans.append(dict(trans[q]))
                length.append(length[p] + 1)
                link.append(link[q])
                while p != -1 and trans[p].get(ch) == q:
                    trans[p][ch] = clone
                    p = link[p]
                link[q] = clone
                link[cur] = clone
        last = cur

    best = 0
    v = 0
    match = 0
    for ch in b:
        while v and ch not in trans[v]:
            v = link[v]
            match = length[v]
        if ch in trans[v]:
            v = trans[v][ch]
            match += 1
            if match > best:
                best = match
        else:
            match = 0
    return best
