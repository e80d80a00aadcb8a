#pragma once

// Replica-level parallelism: work is split by replica index, each replica
// is fully deterministic given (seed, replica), and results land in
// replica-indexed slots, so the thread count only changes scheduling,
// never output bytes.

#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace nuberry {

inline int effective_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs work(replica) for every replica in [0, replicas).  Exceptions from
// workers are rethrown on the calling thread.
inline void run_replicas(uint32_t replicas, int threads,
                         const std::function<void(uint32_t)>& work) {
  int nt = effective_threads(threads);
  if (nt <= 1 || replicas <= 1) {
    for (uint32_t r = 0; r < replicas; ++r) work(r);
    return;
  }
  std::atomic<uint32_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::vector<std::thread> pool;
  auto body = [&] {
    for (;;) {
      uint32_t r = next.fetch_add(1);
      if (r >= replicas || failed.load()) return;
      try {
        work(r);
      } catch (...) {
        bool expected = false;
        if (failed.compare_exchange_strong(expected, true)) error = std::current_exception();
        return;
      }
    }
  };
  int spawn = nt < static_cast<int>(replicas) ? nt : static_cast<int>(replicas);
  pool.reserve(static_cast<std::size_t>(spawn));
  for (int i = 0; i < spawn; ++i) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

// Deterministic split of `total` items across `replicas` slots.
inline uint64_t replica_share(uint64_t total, uint32_t replicas, uint32_t replica) {
  uint64_t base = total / replicas;
  uint64_t rem = total % replicas;
  return base + (replica < rem ? 1 : 0);
}

}  // namespace nuberry
