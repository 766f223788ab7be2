"""Longest-prefix-match routing over 32-bit addresses.

The handler scans a rule table sorted by descending prefix length and
returns the first match's route, or 0 when nothing matches. A rule with
length L matches ``addr`` when ``addr / 2^(32-L) == prefix / 2^(32-L)``,
so the table holds the shifted prefix and the divisor per rule. The
tables are arguments, which keeps ``lpm`` free of stores and eligible for
a hot map.
"""

from __future__ import annotations

import numpy as np

from ..ir import Program, parse_program

LPM_SOURCE = """\
; first match in a table sorted by descending prefix length
(func lpm ((addr i64) (pfx arr-i64) (div arr-i64) (route arr-i64) (n i64))
  (for i 0 n 1
    (if (== (/ addr (load div i)) (load pfx i))
      (then (return (load route i)))))
  (return 0))

(specpoint lpm addr workload)
"""

ADDR_BITS = 32


class InvalidPrefix(ValueError):
    pass


def check_rules(rules) -> list[tuple[int, int, int]]:
    seen = set()
    out = []
    for rule in rules:
        prefix, length, route = (int(x) for x in rule)
        if not 0 <= length <= ADDR_BITS:
            raise InvalidPrefix(f"prefix length {length} outside 0..{ADDR_BITS}")
        if not 0 <= prefix < 1 << ADDR_BITS:
            raise InvalidPrefix(f"prefix {prefix} is not a 32-bit address")
        host = (1 << (ADDR_BITS - length)) - 1
        if prefix & host:
            raise InvalidPrefix(f"{format_addr(prefix)}/{length} has host bits set")
        if (prefix, length) in seen:
            raise InvalidPrefix(f"duplicate rule {format_addr(prefix)}/{length}")
        seen.add((prefix, length))
        out.append((prefix, length, route))
    return out


def build_lpm(rules=()) -> Program:
    """The lpm handler program; ``rules`` are only validated here, they
    reach the handler through :class:`RuleTable` arrays."""
    check_rules(rules)
    return parse_program(LPM_SOURCE)


def parse_addr(text: str) -> int:
    parts = [int(p) for p in text.split(".")]
    if len(parts) != 4 or any(not 0 <= p < 256 for p in parts):
        raise ValueError(f"bad IPv4 address {text!r}")
    return (parts[0] << 24) | (parts[1] << 16) | (parts[2] << 8) | parts[3]


def format_addr(a: int) -> str:
    return ".".join(str((a >> s) & 255) for s in (24, 16, 8, 0))


class RuleTable:
    """Rules laid out for the handler: longest prefixes first."""

    def __init__(self, rules):
        rules = check_rules(rules)
        self.rules = sorted(rules, key=lambda r: (-r[1], r[0]))
        n = len(self.rules)
        self.pfx = np.array([p >> (ADDR_BITS - ln) for p, ln, _ in self.rules], dtype=np.int64)
        self.div = np.array([1 << (ADDR_BITS - ln) for _, ln, _ in self.rules], dtype=np.int64)
        self.route = np.array([r for _, _, r in self.rules], dtype=np.int64)
        for a in (self.pfx, self.div, self.route):
            a.flags.writeable = False
        self.n = n

    def args(self, addr: int) -> list:
        return [int(addr), self.pfx, self.div, self.route, self.n]

    def lookup(self, addr: int) -> int:
        """Reference longest-prefix match, independent of table order."""
        best_len, best = -1, 0
        for prefix, length, route in self.rules:
            shift = ADDR_BITS - length
            if addr >> shift == prefix >> shift and length > best_len:
                best_len, best = length, route
        return best


def synthetic_rules(count: int, seed: int, min_len: int = 8, max_len: int = 32) -> list:
    rng = np.random.default_rng([seed, count])
    rules = []
    seen = set()
    while len(rules) < count:
        length = int(rng.integers(min_len, max_len + 1))
        addr = int(rng.integers(0, 1 << ADDR_BITS))
        prefix = addr & ~((1 << (ADDR_BITS - length)) - 1) & 0xFFFFFFFF
        if (prefix, length) in seen:
            continue
        seen.add((prefix, length))
        rules.append((prefix, length, len(rules) + 1))
    return rules


def synthetic_addresses(rules, count: int, seed: int) -> list[int]:
    """Distinct addresses, each inside some rule's prefix."""
    rng = np.random.default_rng([seed, count, 7])
    out = []
    seen = set()
    while len(out) < count:
        prefix, length, _ = rules[int(rng.integers(len(rules)))]
        host = int(rng.integers(0, 1 << (ADDR_BITS - length))) if length < ADDR_BITS else 0
        a = prefix | host
        if a not in seen:
            seen.add(a)
            out.append(a)
    return out


class LpmDriver:
    """Fixed code for the router: maps request key indices to addresses.

    ``update_rules`` swaps in a new table and bumps the handler's table
    version so any hot map built for the old table stops applying.
    """

    function = "lpm"

    def __init__(self, rules, addresses):
        self.table = RuleTable(rules)
        self.addresses = list(addresses)

    def args(self, key: int) -> list:
        return self.table.args(self.addresses[key])

    def template(self) -> list:
        return self.table.args(0)

    def handle(self, runtime, request: dict):
        return runtime.call(self.function, self.args(int(request["key"])))

    def update_rules(self, runtime, rules) -> None:
        self.table = RuleTable(rules)
        runtime.bump_table_version(self.function)
