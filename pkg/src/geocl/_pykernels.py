"""Pure-Python traversal kernels; used when the compiled extension is unavailable."""

from collections import deque

import numpy as np


def betweenness(indptr, indices, n):
    indptr = indptr.tolist()
    indices = indices.tolist()
    cb = [0.0] * n
    for s in range(n):
        dist = [-1] * n
        sigma = [0.0] * n
        dist[s] = 0
        sigma[s] = 1.0
        order = []
        queue = deque([s])
        while queue:
            v = queue.popleft()
            order.append(v)
            dv = dist[v]
            for w in indices[indptr[v]:indptr[v + 1]]:
                if dist[w] < 0:
                    dist[w] = dv + 1
                    queue.append(w)
                if dist[w] == dv + 1:
                    sigma[w] += sigma[v]
        delta = [0.0] * n
        for w in reversed(order[1:]):
            dw = dist[w] - 1
            coeff = (1.0 + delta[w]) / sigma[w]
            for v in indices[indptr[w]:indptr[w + 1]]:
                if dist[v] == dw:
                    delta[v] += sigma[v] * coeff
            cb[w] += delta[w]
    return np.array(cb) * 0.5


def closeness(indptr, indices, n):
    indptr = indptr.tolist()
    indices = indices.tolist()
    out = np.zeros(n)
    for s in range(n):
        dist = {s: 0}
        queue = deque([s])
        total = 0
        while queue:
            v = queue.popleft()
            total += dist[v]
            for w in indices[indptr[v]:indptr[v + 1]]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        if total:
            out[s] = len(dist) / total
    return out


def triangles_per_vertex(indptr, indices, n):
    nbrs = [set(indices[indptr[v]:indptr[v + 1]].tolist()) for v in range(n)]
    tri = np.zeros(n, dtype=np.int64)
    for u in range(n):
        for v in nbrs[u]:
            if v > u:
                for w in nbrs[u] & nbrs[v]:
                    if w > v:
                        tri[u] += 1
                        tri[v] += 1
                        tri[w] += 1
    return tri
