"""Grant times of a one-token bucket at 2 requests/s for 7 back-to-back calls
starting at t0 = 1.7e9 (search request first, then six downloads)."""
t0 = 1.7e9
rate = 2.0
grants = []
nxt = None
for _ in range(7):
    t = t0 if nxt is None else max(t0, nxt)
    grants.append(t - t0)
    nxt = t + 1 / rate
print(grants, grants[-1] - grants[0])
