#include "wafertex/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace wafertex {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// exp(-j 2 pi k / n), evaluated directly per entry for accuracy.
std::vector<Complex> twiddles(std::size_t n) {
    std::vector<Complex> w(n / 2);
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        w[k] = {std::cos(a), std::sin(a)};
    }
    return w;
}

void radix2(std::span<Complex> a, bool inverse) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const auto w = twiddles(n);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t step = n / len;
        const std::size_t half = len / 2;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const Complex tw = inverse ? std::conj(w[k * step]) : w[k * step];
                const Complex t = tw * a[i + k + half];
                a[i + k + half] = a[i + k] - t;
                a[i + k] += t;
            }
        }
    }
}

// Chirp-z (Bluestein) reduction of an arbitrary-length DFT to power-of-two FFTs.
void bluestein(std::span<Complex> a, bool inverse) {
    const std::size_t n = a.size();
    const std::size_t m = next_pow2(2 * n - 1);
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<Complex> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the phase argument small.
        const std::size_t k2 = (k * k) % (2 * n);
        const double ang = sign * std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = {std::cos(ang), std::sin(ang)};
    }
    std::vector<Complex> fa(m), fb(m);
    for (std::size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
    fb[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) fb[k] = fb[m - k] = std::conj(chirp[k]);
    radix2(fa, false);
    radix2(fb, false);
    for (std::size_t k = 0; k < m; ++k) fa[k] *= fb[k];
    radix2(fa, true);
    const double scale = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = fa[k] * scale * chirp[k];
}

void transform_2d(std::vector<Complex>& data, std::size_t height, std::size_t width, bool inverse) {
    for (std::size_t y = 0; y < height; ++y) {
        fft1d(std::span<Complex>(data).subspan(y * width, width), inverse);
    }
    std::vector<Complex> column(height);
    for (std::size_t x = 0; x < width; ++x) {
        for (std::size_t y = 0; y < height; ++y) column[y] = data[y * width + x];
        fft1d(column, inverse);
        for (std::size_t y = 0; y < height; ++y) data[y * width + x] = column[y];
    }
}

}  // namespace

void fft1d(std::span<Complex> data, bool inverse) {
    if (data.size() <= 1) return;
    if (is_pow2(data.size())) {
        radix2(data, inverse);
    } else {
        bluestein(data, inverse);
    }
}

Spectrum dft2d(std::span<const double> plane, std::size_t height, std::size_t width) {
    if (height == 0 || width == 0) throw std::invalid_argument("dft2d: empty input");
    if (plane.size() != height * width) throw std::invalid_argument("dft2d: plane size mismatch");
    Spectrum s;
    s.height = height;
    s.width = width;
    s.coeffs.assign(plane.begin(), plane.end());
    transform_2d(s.coeffs, height, width, false);
    return s;
}

Spectrum dft2d(const Tensor& x) {
    if (x.channels() != 1) {
        throw std::invalid_argument("dft2d: expected a single-channel tensor, got " + x.shape_string());
    }
    std::vector<double> plane(x.data().begin(), x.data().end());
    return dft2d(plane, x.height(), x.width());
}

std::vector<Complex> idft2d_complex(const Spectrum& s) {
    if (s.height == 0 || s.width == 0 || s.coeffs.size() != s.height * s.width) {
        throw std::invalid_argument("idft2d: malformed spectrum");
    }
    std::vector<Complex> data = s.coeffs;
    transform_2d(data, s.height, s.width, true);
    const double scale = 1.0 / static_cast<double>(s.height * s.width);
    for (auto& c : data) c *= scale;
    return data;
}

Tensor idft2d(const Spectrum& s) {
    const auto data = idft2d_complex(s);
    Tensor out(1, s.height, s.width);
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = static_cast<float>(data[i].real());
    return out;
}

double hermitian_defect(const Spectrum& s) {
    double peak = 0.0;
    double worst = 0.0;
    for (std::size_t v = 0; v < s.height; ++v) {
        for (std::size_t u = 0; u < s.width; ++u) {
            const Complex a = s.at(u, v);
            const Complex b = s.at((s.width - u) % s.width, (s.height - v) % s.height);
            peak = std::max(peak, std::abs(a));
            worst = std::max(worst, std::abs(a - std::conj(b)));
        }
    }
    return peak > 0.0 ? worst / peak : worst;
}

}  // namespace wafertex
