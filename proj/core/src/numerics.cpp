#include "endo/numerics.hpp"

#include <cmath>
#include <stdexcept>

#include "endo/graph.hpp"
#include "endo/kernels.hpp"
#include "endo/rng.hpp"

namespace endo {

template <typename T>
Tensor<T> softmax_masked(const Tensor<T>& logits, const std::vector<std::uint8_t>& mask) {
    if (mask.size() != logits.size()) throw std::invalid_argument("softmax_masked: mask shape mismatch");
    Tensor<T> out = logits;
    const std::size_t n = logits.cols();
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const std::uint8_t* m = mask.data() + r * n;
        if (!kernels::softmax_row(out.data() + r * n, n, [m](std::size_t j) { return m[j] != 0; })) {
            throw std::domain_error("degenerate attention row");
        }
    }
    return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
    const std::size_t d = x.cols();
    if (gain.size() != d || bias.size() != d) throw std::invalid_argument("layer_norm: gain/bias width mismatch");
    Tensor<T> out(x.shape());
    for (std::size_t r = 0; r < x.rows(); ++r)
        kernels::layer_norm_row(x.data() + r * d, gain.data(), bias.data(), eps, out.data() + r * d, d);
    return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = kernels::gelu(x[i]);
    return out;
}

template <typename T>
T cross_entropy(const Tensor<T>& logits, std::span<const int> targets) {
    Graph<T> g(false);
    const auto id = g.cross_entropy(g.input(logits), targets);
    return g.value(id)[0];
}

#define ENDO_INSTANTIATE(T)                                                                        \
    template Tensor<T> softmax_masked(const Tensor<T>&, const std::vector<std::uint8_t>&);        \
    template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);       \
    template Tensor<T> gelu(const Tensor<T>&);                                                     \
    template T cross_entropy(const Tensor<T>&, std::span<const int>);
ENDO_INSTANTIATE(float)
ENDO_INSTANTIATE(double)
#undef ENDO_INSTANTIATE

GradCheckResult grad_check(const LossFn& loss, ParamStore<double>& params, double h, std::size_t sample_count,
                           std::uint64_t seed, double abs_floor) {
    params.zero_grad();
    const double base = loss(params, true);
    if (!std::isfinite(base)) throw std::domain_error("grad_check: non-finite loss");

    std::vector<Param<double>*> groups;
    std::vector<std::string> names;
    for (auto& [name, p] : params.entries()) {
        groups.push_back(&p);
        names.push_back(name);
    }
    if (groups.empty()) throw std::invalid_argument("grad_check: empty parameter store");

    // One coordinate per tensor first, then uniformly over all coordinates.
    Rng rng(seed);
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t g = 0; g < groups.size(); ++g) coords.emplace_back(g, rng.below(groups[g]->value.size()));
    const std::size_t total = params.numel();
    while (coords.size() < sample_count) {
        std::size_t flat = rng.below(total);
        std::size_t g = 0;
        while (flat >= groups[g]->value.size()) {
            flat -= groups[g]->value.size();
            ++g;
        }
        coords.emplace_back(g, flat);
    }

    GradCheckResult result;
    result.per_param.resize(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) result.per_param[g] = {names[g], 0.0};
    for (auto [g, i] : coords) {
        double& w = groups[g]->value[i];
        const double analytic = groups[g]->grad[i];
        const double saved = w;
        w = saved + h;
        const double up = loss(params, false);
        w = saved - h;
        const double down = loss(params, false);
        w = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) throw std::domain_error("grad_check: non-finite loss");
        const double numeric = (up - down) / (2 * h);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
        const double rel = std::abs(analytic - numeric) / denom;
        result.per_param[g].second = std::max(result.per_param[g].second, rel);
        if (rel >= result.max_rel_error) {
            result.max_rel_error = rel;
            result.worst_param = names[g];
        }
    }
    result.coordinates = coords.size();
    result.groups_covered = groups.size();
    return result;
}

}  // namespace endo
