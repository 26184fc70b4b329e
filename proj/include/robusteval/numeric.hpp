#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "robusteval/error.hpp"

namespace robusteval {

// Neumaier variant of Kahan summation. Result depends only on the order of
// add() calls, which callers keep fixed (sample_id or neuron index order).
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

enum class Norm { l1, l2, linf };

inline std::string to_string(Norm p) {
  switch (p) {
    case Norm::l1: return "1";
    case Norm::l2: return "2";
    case Norm::linf: return "inf";
  }
  return "?";
}

inline Norm parse_norm(const std::string& s) {
  if (s == "1" || s == "l1" || s == "L1") return Norm::l1;
  if (s == "2" || s == "l2" || s == "L2") return Norm::l2;
  if (s == "inf" || s == "linf" || s == "Linf" || s == "infinity") return Norm::linf;
  fail(Errc::invalid_argument, "unknown norm '" + s + "' (expected 1, 2 or inf)");
}

template <class T>
double lp_norm(std::span<const T> v, Norm p) {
  switch (p) {
    case Norm::l1: {
      CompensatedSum s;
      for (T x : v) s.add(std::abs(static_cast<double>(x)));
      return s.value();
    }
    case Norm::l2: {
      CompensatedSum s;
      for (T x : v) s.add(static_cast<double>(x) * static_cast<double>(x));
      return std::sqrt(s.value());
    }
    case Norm::linf: {
      double m = 0.0;
      for (T x : v) m = std::max(m, std::abs(static_cast<double>(x)));
      return m;
    }
  }
  return 0.0;
}

// ||a - b||_p with the difference taken in double.
template <class T>
double lp_distance(std::span<const T> a, std::span<const T> b, Norm p) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    d[i] = static_cast<double>(a[i]) - static_cast<double>(b[i]);
  }
  return lp_norm<double>(d, p);
}

template <class T>
bool all_finite(std::span<const T> v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

// Worker cap from ROBUSTEVAL_THREADS; defaults to hardware concurrency.
inline std::size_t thread_count() {
  std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ROBUSTEVAL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<std::size_t>(v);
  }
  return hw;
}

// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker, so
// results written to slot i are independent of scheduling. The first exception
// (lowest index) is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace robusteval
