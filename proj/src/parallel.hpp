#ifndef VXR_PARALLEL_HPP
#define VXR_PARALLEL_HPP

#include <cstdint>
#include <functional>

namespace vxr {

// Global worker pool shared by all kernels. Work items are disjoint index
// ranges, so results never depend on the thread count.
void set_thread_count(int n);  // 0 restores the hardware default
int thread_count();

// Calls fn(begin, end) on contiguous chunks covering [0, n). Runs inline when
// n is small or when invoked from inside another parallel_for.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace vxr

#endif
