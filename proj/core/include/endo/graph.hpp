#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "endo/param_store.hpp"
#include "endo/tensor.hpp"

namespace endo {

struct AttentionSpec {
    std::size_t heads = 1;
    bool causal = false;
    // Optional per-key validity (1 = attendable). Must have Tk entries.
    const std::vector<std::uint8_t>* key_valid = nullptr;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
// creation order is a valid topological order for backward().
//
// Parameter leaves write their gradients straight into Param::grad, which
// means successive backward() calls over fresh graphs accumulate.
template <typename T>
class Graph {
public:
    using Id = std::int32_t;
    static constexpr Id kNone = -1;

    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    Id input(Tensor<T> value);
    Id param(Param<T>& p);

    const Tensor<T>& value(Id id) const;
    Tensor<T>& grad(Id id);
    bool requires_grad(Id id) const { return nodes_.at(id).requires_grad; }
    std::size_t node_count() const { return nodes_.size(); }

    // Seeds d(loss) = seed and propagates to every parameter leaf.
    void backward(Id loss, T seed = T(1));

    Id linear(Id x, Id w, Id b = kNone);
    Id add(Id a, Id b);
    // x[r, :] + table[row, :] for every r
    Id add_row(Id x, Id table, std::size_t row);
    Id layer_norm(Id x, Id gain, Id bias, T eps = T(1e-5));
    Id gelu(Id x);
    Id embed(Id table, std::span<const int> ids);
    // Multi-head scaled dot-product attention; q/k/v already projected.
    Id attention(Id q, Id k, Id v, const AttentionSpec& spec);
    // Stacks parts row-wise and pads to total_rows, with zeros or with the
    // matching rows of `padding` (a [total_rows, d] tensor) when given.
    Id concat_rows(std::span<const Id> parts, std::size_t total_rows, const Tensor<T>* padding = nullptr);
    // Mean over rows of -log softmax(logits)[target].
    Id cross_entropy(Id logits, std::span<const int> targets);
    Id sum(Id x);
    Id square(Id x);
    Id scale(Id x, T s);

    // Softmax weights [heads, Tq, Tk] recorded by an attention node.
    const Tensor<T>& attention_probs(Id attn) const;

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        Tensor<T> aux;
        const Tensor<T>* ref = nullptr;
        Param<T>* param = nullptr;
        bool requires_grad = false;
        bool has_grad = false;
        std::function<void()> backward;
    };

    Id push(Node node);
    bool any_requires(std::initializer_list<Id> ids) const;

    std::vector<Node> nodes_;
    std::vector<T> scratch_;
    bool grad_enabled_;
};

}  // namespace endo
