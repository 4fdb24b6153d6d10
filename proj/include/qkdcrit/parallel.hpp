#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <future>
#include <vector>

namespace qkdcrit::detail {

/// Run fn(0..count-1) across `jobs` threads.  fn must only touch its own
/// index's slots; aggregation stays deterministic when results live in
/// index-addressed arrays and are merged sequentially afterwards.
template <typename Fn>
inline void parallel_for(std::size_t count, unsigned jobs, Fn&& fn) {
  if (jobs <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(jobs, count));
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> futs;
  futs.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    futs.push_back(std::async(std::launch::async, [&count, &next, &fn] {
      for (std::size_t i = next.fetch_add(1); i < count;
           i = next.fetch_add(1))
        fn(i);
    }));
  for (auto& f : futs) f.get();   // rethrows worker exceptions
}

}  // namespace qkdcrit::detail
