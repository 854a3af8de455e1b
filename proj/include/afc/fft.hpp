#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace afc::fft {

using cvec = std::vector<std::complex<double>>;

// X[k] = sum_n x[n] exp(-2 pi i k n / N), unnormalized.
cvec forward(const cvec& x);

// x[n] = (1/N) sum_k X[k] exp(+2 pi i k n / N).
cvec inverse(const cvec& X);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

}  // namespace afc::fft
