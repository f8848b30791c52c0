#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "wafertex/tensors.hpp"

namespace wafertex {

using Complex = std::complex<double>;

// Full (non-halved) 2-D spectrum. Rows are indexed by the vertical frequency
// v in [0, height), columns by the horizontal frequency u in [0, width).
struct Spectrum {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<Complex> coeffs;

    Complex& at(std::size_t u, std::size_t v) { return coeffs[v * width + u]; }
    const Complex& at(std::size_t u, std::size_t v) const { return coeffs[v * width + u]; }
};

// Unnormalized forward transform
//   F(u,v) = sum_{x,y} f(x,y) exp(-j 2 pi (u x / W + v y / H)),  x,y 0-based.
// Radix-2 for power-of-two lengths, Bluestein otherwise; double precision.
Spectrum dft2d(const Tensor& x);
Spectrum dft2d(std::span<const double> plane, std::size_t height, std::size_t width);

// Inverse transform with the 1/(HW) factor. The real-valued overload drops
// the imaginary part.
std::vector<Complex> idft2d_complex(const Spectrum& s);
Tensor idft2d(const Spectrum& s);

// In-place 1-D transform of arbitrary length (forward sign -1).
void fft1d(std::span<Complex> data, bool inverse);

// Largest |F(u,v) - conj(F(-u,-v))| relative to the largest |F|.
double hermitian_defect(const Spectrum& s);

}  // namespace wafertex
