#pragma once

#include <cstdint>

namespace s2wat {

/// Accumulates scalar multiplications performed inside matrix products and
/// convolutions. Additions, softmax, normalization and bias terms are
/// excluded by convention so counts line up with the analytic attention
/// complexity formulas term by term.
class FlopCounter {
 public:
  void add(std::uint64_t mults) { count_ += mults; }
  std::uint64_t count() const { return count_; }
  void reset() { count_ = 0; }

 private:
  std::uint64_t count_ = 0;
};

namespace detail {
inline FlopCounter*& active_flop_counter() {
  thread_local FlopCounter* current = nullptr;
  return current;
}
}  // namespace detail

/// RAII scope: while alive, matmul/conv on this thread add to `counter`.
class FlopScope {
 public:
  explicit FlopScope(FlopCounter& counter) : prev_(detail::active_flop_counter()) {
    detail::active_flop_counter() = &counter;
  }
  ~FlopScope() { detail::active_flop_counter() = prev_; }
  FlopScope(const FlopScope&) = delete;
  FlopScope& operator=(const FlopScope&) = delete;

 private:
  FlopCounter* prev_;
};

inline void count_mults(std::uint64_t mults) {
  if (FlopCounter* c = detail::active_flop_counter()) c->add(mults);
}

}  // namespace s2wat
