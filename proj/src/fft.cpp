#include "afc/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

namespace afc::fft {
namespace {

struct AlignedBuffer {
  explicit AlignedBuffer(std::size_t n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {}
  ~AlignedBuffer() { fftw_free(data); }
  AlignedBuffer(const AlignedBuffer&) = delete;
  AlignedBuffer& operator=(const AlignedBuffer&) = delete;
  fftw_complex* data;
};

// FFTW planning is not thread-safe; execution through fftw_execute_dft is.
// Plans are made with FFTW_ESTIMATE so the chosen algorithm (and therefore
// every output bit) does not depend on timing measurements.
class PlanCache {
 public:
  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_pair(n, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    AlignedBuffer in(n), out(n);
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), in.data, out.data, sign,
                                      FFTW_ESTIMATE);
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

cvec execute(const cvec& x, int sign) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  fftw_plan plan = cache().get(n, sign);
  AlignedBuffer in(n), out(n);
  std::memcpy(in.data, x.data(), sizeof(fftw_complex) * n);
  fftw_execute_dft(plan, in.data, out.data);
  cvec y(n);
  std::memcpy(static_cast<void*>(y.data()), out.data, sizeof(fftw_complex) * n);
  return y;
}

}  // namespace

cvec forward(const cvec& x) { return execute(x, FFTW_FORWARD); }

cvec inverse(const cvec& X) {
  cvec x = execute(X, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(X.size());
  for (auto& v : x) v *= scale;
  return x;
}

bool is_power_of_two(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace afc::fft
