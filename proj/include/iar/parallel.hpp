#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace iar {

namespace detail {
inline std::atomic<unsigned>& default_jobs_slot() {
  static std::atomic<unsigned> jobs{1};
  return jobs;
}
inline thread_local bool in_worker = false;
}  // namespace detail

/// Worker cap used when a call does not pass one; 0 means hardware concurrency.
inline void set_default_jobs(unsigned jobs) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  detail::default_jobs_slot() = jobs;
}

inline unsigned default_jobs() { return detail::default_jobs_slot(); }

/// Calls fn(i) for i in [0, n). Each index writes only its own output slot, so
/// results do not depend on the job count. Nested calls run inline. The first
/// exception (lowest index) is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned jobs = default_jobs()) {
  if (n == 0) return;
  jobs = std::min<std::size_t>(std::max(1u, jobs), n);
  if (jobs == 1 || detail::in_worker) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  auto work = [&] {
    detail::in_worker = true;
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
    detail::in_worker = false;
  };
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace iar
