#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <vector>

namespace logdiag {

/// Nearest-rank percentiles over recorded durations; p50 <= p90 always.
struct LatencyStats {
  std::chrono::milliseconds p50{0};
  std::chrono::milliseconds p90{0};
  std::size_t count = 0;
};

inline LatencyStats compute_latency_stats(std::vector<std::int64_t> samples_ms) {
  LatencyStats stats;
  stats.count = samples_ms.size();
  if (samples_ms.empty()) return stats;
  std::sort(samples_ms.begin(), samples_ms.end());
  auto nearest_rank = [&](std::size_t p) {
    std::size_t rank = (samples_ms.size() * p + 99) / 100;  // ceil(n * p / 100)
    if (rank == 0) rank = 1;
    return std::chrono::milliseconds(samples_ms[rank - 1]);
  };
  stats.p50 = nearest_rank(50);
  stats.p90 = nearest_rank(90);
  return stats;
}

class LatencyRecorder {
 public:
  void add(std::chrono::milliseconds value) {
    std::lock_guard<std::mutex> lock(mutex_);
    samples_ms_.push_back(value.count());
  }

  LatencyStats snapshot() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return compute_latency_stats(samples_ms_);
  }

 private:
  mutable std::mutex mutex_;
  std::vector<std::int64_t> samples_ms_;
};

}  // namespace logdiag
