#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dcc {

/// Atomic unit of work. One load unit is one fully utilized server for one step.
struct Task {
  std::uint64_t id = 0;
  std::int64_t arrival_step = 0;
  double load = 0.0;
  std::int64_t deadline_step = 0;
  bool flexible = false;
};

/// Earliest deadline first, id as tie-break.
bool edf_before(const Task& a, const Task& b) noexcept;

double total_load(std::span<const Task> tasks) noexcept;

struct ArrivalSplit {
  std::vector<Task> to_defer;
  std::vector<Task> to_run_now;
};

/// Inflexible tasks always run now. Flexible tasks, in id order, are deferred
/// as the longest prefix whose load fits in defer_fraction of the flexible load.
ArrivalSplit split_arrivals(std::span<const Task> arrivals, double defer_fraction);

/// Bounded deadline-ordered queue of deferred tasks for one data center.
class DeferredQueue {
 public:
  DeferredQueue() = default;
  explicit DeferredQueue(double capacity_units);

  /// Admits tasks in EDF order until the next one would overflow capacity.
  /// Everything not admitted is returned to be run immediately.
  std::vector<Task> enqueue(std::vector<Task> tasks);

  /// Releases every task due at `t`, then further tasks in EDF order while the
  /// cumulative released load stays within release_fraction * headroom.
  std::vector<Task> release(std::int64_t t, double headroom, double release_fraction);

  /// Empties the queue (end of episode).
  std::vector<Task> drain();

  double occupancy() const noexcept { return occupancy_; }
  double capacity() const noexcept { return capacity_; }
  const std::vector<Task>& pending() const noexcept { return pending_; }
  bool empty() const noexcept { return pending_.empty(); }

  /// Rebuilds a queue from a snapshot; pending is re-sorted.
  static DeferredQueue restore(double capacity_units, std::vector<Task> pending);

 private:
  void recompute_occupancy() noexcept;

  double capacity_ = 0.0;
  double occupancy_ = 0.0;
  std::vector<Task> pending_;  // sorted by edf_before
};

}  // namespace dcc
