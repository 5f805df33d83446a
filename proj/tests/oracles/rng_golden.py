#!/usr/bin/env python3
"""Reference xorshift64* stream (seeded through one splitmix64 step) and the
first jittered delivery time of the network simulator."""
M = (1 << 64) - 1


def splitmix64(x):
    z = (x + 0x9E3779B97F4A7C15) & M
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M
    return z ^ (z >> 31)


class XorShift64Star:
    def __init__(self, seed):
        self.s = splitmix64(seed) or 0x9E3779B97F4A7C15

    def next_u64(self):
        x = self.s
        x ^= x >> 12
        x ^= (x << 25) & M
        x ^= x >> 27
        self.s = x
        return (x * 0x2545F4914F6CDD1D) & M

    def next_double(self):
        return (self.next_u64() >> 11) * 2.0 ** -53


def round_half_away(v):
    import math
    return int(math.floor(v + 0.5)) if v >= 0 else -int(math.floor(-v + 0.5))


if __name__ == "__main__":
    r = XorShift64Star(42)
    print("first u64s:", [hex(XorShift64Star(42).next_u64())])
    loss_draw = r.next_double()
    jitter_draw = r.next_double()
    offset = (2.0 * jitter_draw - 1.0) * 50.0
    delay = round_half_away(100.0 + offset)
    print("loss_draw", repr(loss_draw), "jitter_draw", repr(jitter_draw), "offset", offset)
    print("deliver_at", 1000 + max(delay, 1))
    r2 = XorShift64Star(42)
    print("u64 stream", [r2.next_u64() for _ in range(3)])
