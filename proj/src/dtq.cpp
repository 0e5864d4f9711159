#include "dcc/dtq.hpp"

#include <algorithm>
#include <string>

#include "dcc/error.hpp"

namespace dcc {

bool edf_before(const Task& a, const Task& b) noexcept {
  if (a.deadline_step != b.deadline_step) return a.deadline_step < b.deadline_step;
  return a.id < b.id;
}

double total_load(std::span<const Task> tasks) noexcept {
  double sum = 0.0;
  for (const auto& t : tasks) sum += t.load;
  return sum;
}

ArrivalSplit split_arrivals(std::span<const Task> arrivals, double defer_fraction) {
  if (!(defer_fraction >= 0.0 && defer_fraction <= 1.0)) {
    throw DomainError("defer_fraction " + std::to_string(defer_fraction) + " outside [0, 1]");
  }
  ArrivalSplit out;
  std::vector<Task> flexible;
  for (const auto& t : arrivals) {
    (t.flexible ? flexible : out.to_run_now).push_back(t);
  }
  std::sort(flexible.begin(), flexible.end(),
            [](const Task& a, const Task& b) { return a.id < b.id; });

  const double budget = defer_fraction * total_load(flexible);
  double deferred = 0.0;
  std::size_t i = 0;
  for (; i < flexible.size() && deferred + flexible[i].load <= budget; ++i) {
    deferred += flexible[i].load;
    out.to_defer.push_back(flexible[i]);
  }
  out.to_run_now.insert(out.to_run_now.end(), flexible.begin() + static_cast<std::ptrdiff_t>(i),
                        flexible.end());
  return out;
}

DeferredQueue::DeferredQueue(double capacity_units) : capacity_(capacity_units) {
  if (!(capacity_units >= 0.0)) throw ConfigError("queue capacity must be nonnegative");
}

DeferredQueue DeferredQueue::restore(double capacity_units, std::vector<Task> pending) {
  DeferredQueue q(capacity_units);
  std::sort(pending.begin(), pending.end(), edf_before);
  q.pending_ = std::move(pending);
  q.recompute_occupancy();
  return q;
}

void DeferredQueue::recompute_occupancy() noexcept { occupancy_ = total_load(pending_); }

std::vector<Task> DeferredQueue::enqueue(std::vector<Task> tasks) {
  std::sort(tasks.begin(), tasks.end(), edf_before);
  std::vector<Task> admitted;
  std::vector<Task> rejected;
  double occupancy = occupancy_;
  std::size_t i = 0;
  for (; i < tasks.size() && occupancy + tasks[i].load <= capacity_; ++i) {
    occupancy += tasks[i].load;
    admitted.push_back(tasks[i]);
  }
  rejected.assign(tasks.begin() + static_cast<std::ptrdiff_t>(i), tasks.end());

  if (!admitted.empty()) {
    std::vector<Task> merged;
    merged.reserve(pending_.size() + admitted.size());
    std::merge(pending_.begin(), pending_.end(), admitted.begin(), admitted.end(),
               std::back_inserter(merged), edf_before);
    pending_ = std::move(merged);
    recompute_occupancy();
  }
  return rejected;
}

std::vector<Task> DeferredQueue::release(std::int64_t t, double headroom,
                                         double release_fraction) {
  if (!(release_fraction >= 0.0 && release_fraction <= 1.0)) {
    throw DomainError("release_fraction " + std::to_string(release_fraction) +
                      " outside [0, 1]");
  }
  if (!(headroom >= 0.0)) throw DomainError("negative headroom");

  // Pending is EDF-sorted, so every due task sits in the leading run.
  std::size_t i = 0;
  double released_load = 0.0;
  while (i < pending_.size() && pending_[i].deadline_step <= t) {
    released_load += pending_[i].load;
    ++i;
  }
  const double budget = release_fraction * headroom;
  while (i < pending_.size() && released_load + pending_[i].load <= budget) {
    released_load += pending_[i].load;
    ++i;
  }
  std::vector<Task> released(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(i));
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(i));
  recompute_occupancy();
  return released;
}

std::vector<Task> DeferredQueue::drain() {
  std::vector<Task> out = std::move(pending_);
  pending_.clear();
  occupancy_ = 0.0;
  return out;
}

}  // namespace dcc
