import threading
from typing import Dict, Optional, Tuple


class FitnessCache:
    """Canonical pipeline signature -> fitness vector, shared across evaluation workers"""

    def __init__(self):
        self._entries: Dict[str, Tuple[float, ...]] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, signature: str) -> bool:
        with self._lock:
            return signature in self._entries

    def lookup(self, signature: str) -> Optional[Tuple[float, ...]]:
        with self._lock:
            fitness = self._entries.get(signature)
            if fitness is None:
                self.misses += 1
            else:
                self.hits += 1
            return fitness

    def record_hit(self):
        with self._lock:
            self.hits += 1

    def store(self, signature: str, fitness: Tuple[float, ...]):
        # last writer wins; equal keys always carry equal fitness
        with self._lock:
            self._entries[signature] = tuple(fitness)

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0

    def stats(self) -> Dict[str, float]:
        return {"entries": len(self._entries), "hits": self.hits, "misses": self.misses, "hit_rate": self.hit_rate}
