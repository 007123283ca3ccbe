#pragma once

#include <map>
#include <string>

#include "endo/graph.hpp"
#include "endo/param_store.hpp"
#include "endo/rng.hpp"

namespace endo {

// Binds named parameters into one graph, one node per name. With a mutable
// store and a gradient-enabled graph the nodes are trainable leaves;
// otherwise they are read-only references.
template <typename T>
class ParamScope {
public:
    ParamScope(Graph<T>& g, ParamStore<T>& store) : g_(g), mutable_(&store), store_(&store) {}
    ParamScope(Graph<T>& g, const ParamStore<T>& store) : g_(g), store_(&store) {}

    typename Graph<T>::Id operator()(const std::string& name) {
        auto it = ids_.find(name);
        if (it != ids_.end()) return it->second;
        typename Graph<T>::Id id;
        if (mutable_) {
            id = g_.param(mutable_->at(name));
        } else {
            id = g_.param(const_cast<Param<T>&>(store_->at(name)));
        }
        ids_.emplace(name, id);
        return id;
    }

    Graph<T>& graph() { return g_; }
    const ParamStore<T>& store() const { return *store_; }

private:
    Graph<T>& g_;
    ParamStore<T>* mutable_ = nullptr;
    const ParamStore<T>* store_;
    std::map<std::string, typename Graph<T>::Id> ids_;
};

// Parameter declaration helpers shared by the encoder and decoder.
template <typename T>
void add_linear(ParamStore<T>& ps, const std::string& prefix, std::size_t in, std::size_t out) {
    ps.add(prefix + ".w", {in, out});
    ps.add(prefix + ".b", {out});
}

template <typename T>
void add_norm(ParamStore<T>& ps, const std::string& prefix, std::size_t d) {
    ps.add(prefix + ".g", {d}).value.fill(T(1));
    ps.add(prefix + ".b", {d});
}

// Truncated normal (sigma 0.02, cut at 2 sigma) for matrices and embedding
// tables; zeros for biases; ones for norm gains. Visits names in store order.
template <typename T>
void init_params(ParamStore<T>& ps, const std::string& prefix, Rng& rng, double sigma = 0.02) {
    for (auto& [name, p] : ps.entries()) {
        if (name.rfind(prefix, 0) != 0) continue;
        const bool is_norm = name.find(".ln") != std::string::npos;
        const bool is_vector = p.value.rank() == 1;
        if (is_norm) {
            p.value.fill(name.back() == 'g' ? T(1) : T(0));
        } else if (is_vector) {
            p.value.fill(T(0));
        } else {
            for (auto& v : p.value.span()) v = static_cast<T>(rng.truncated_normal(sigma));
        }
    }
}

namespace layers {

template <typename T>
typename Graph<T>::Id linear(ParamScope<T>& ps, const std::string& prefix, typename Graph<T>::Id x) {
    return ps.graph().linear(x, ps(prefix + ".w"), ps(prefix + ".b"));
}

template <typename T>
typename Graph<T>::Id norm(ParamScope<T>& ps, const std::string& prefix, typename Graph<T>::Id x) {
    return ps.graph().layer_norm(x, ps(prefix + ".g"), ps(prefix + ".b"), T(1e-5));
}

// Projects queries from xq and keys/values from xkv, attends, projects out.
// attn_node (optional) receives the attention node id for tracing.
template <typename T>
typename Graph<T>::Id multi_head_attention(ParamScope<T>& ps, const std::string& prefix, typename Graph<T>::Id xq,
                                           typename Graph<T>::Id xkv, const AttentionSpec& spec,
                                           typename Graph<T>::Id* attn_node = nullptr) {
    auto q = linear(ps, prefix + ".q", xq);
    auto k = linear(ps, prefix + ".k", xkv);
    auto v = linear(ps, prefix + ".v", xkv);
    auto a = ps.graph().attention(q, k, v, spec);
    if (attn_node) *attn_node = a;
    return linear(ps, prefix + ".o", a);
}

template <typename T>
typename Graph<T>::Id mlp(ParamScope<T>& ps, const std::string& prefix, typename Graph<T>::Id x) {
    auto h = ps.graph().gelu(linear(ps, prefix + ".fc1", x));
    return linear(ps, prefix + ".fc2", h);
}

}  // namespace layers

}  // namespace endo
