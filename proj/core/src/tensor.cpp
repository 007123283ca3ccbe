#include "endo/tensor.hpp"

#include <cmath>

#include "endo/rng.hpp"

namespace endo {

std::string_view dtype_name(DType d) { return d == DType::f32 ? "f32" : "f64"; }

DType parse_dtype(std::string_view s) {
    if (s == "f32") return DType::f32;
    if (s == "f64") return DType::f64;
    throw std::invalid_argument("unknown dtype '" + std::string(s) + "' (expected f32 or f64)");
}

std::size_t dtype_size(DType d) { return d == DType::f32 ? 4 : 8; }

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
    for (T v : t.span()) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

template bool all_finite(const Tensor<float>&);
template bool all_finite(const Tensor<double>&);

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
    return mix64(mix64(parent) ^ (index * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) {
    // FNV-1a over the label, then mixed with the parent.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return derive_seed(parent, h);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) {
    if (n <= 1) return 0;
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

int Rng::range(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1))); }

double Rng::normal() {
    // Box-Muller, one value per call.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::truncated_normal(double sigma, double bound_sigmas) {
    double x;
    do {
        x = normal();
    } while (std::abs(x) > bound_sigmas);
    return x * sigma;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    shuffle(p.begin(), p.end());
    return p;
}

}  // namespace endo
