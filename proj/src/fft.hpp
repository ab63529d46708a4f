#pragma once

// Thin FFTW wrapper. Planning is serialized behind a mutex (FFTW's planner
// is not thread-safe); plans are cached per (size, direction) and executed
// with the new-array interface, which is.

#include <complex>
#include <cstddef>
#include <vector>

namespace adhops::detail {

enum class FftDirection { forward, backward };  // e^{-i...} / e^{+i...}, unnormalized

void fft_inplace(std::vector<std::complex<double>>& data, FftDirection dir);

// Smallest size >= n of the form 2^a 3^b 5^c.
std::size_t good_fft_size(std::size_t n);

}  // namespace adhops::detail
