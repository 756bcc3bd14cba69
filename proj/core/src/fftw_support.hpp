#pragma once

#include <fftw3.h>

#include <cstddef>
#include <memory>
#include <mutex>

namespace cgff::detail {

// FFTW's planner is not thread-safe; execution of an existing plan on new
// arrays is.
std::mutex& fftw_planner_mutex();

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

template <class T>
using FftwArray = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwArray<T> fftw_array(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * (n == 0 ? 1 : n)));
  if (p == nullptr) throw std::bad_alloc();
  return FftwArray<T>(p);
}

class FftwPlan {
 public:
  FftwPlan() = default;
  explicit FftwPlan(fftw_plan plan) noexcept : plan_(plan) {}
  ~FftwPlan() { reset(); }
  FftwPlan(FftwPlan&& o) noexcept : plan_(o.plan_) { o.plan_ = nullptr; }
  FftwPlan& operator=(FftwPlan&& o) noexcept {
    if (this != &o) {
      reset();
      plan_ = o.plan_;
      o.plan_ = nullptr;
    }
    return *this;
  }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;

  fftw_plan get() const noexcept { return plan_; }

  void reset() noexcept {
    if (plan_ != nullptr) {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
      plan_ = nullptr;
    }
  }

 private:
  fftw_plan plan_ = nullptr;
};

}  // namespace cgff::detail
