#include "endo/graph.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "endo/kernels.hpp"

namespace endo {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

template <typename T>
typename Graph<T>::Id Graph<T>::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<Id>(nodes_.size() - 1);
}

template <typename T>
bool Graph<T>::any_requires(std::initializer_list<Id> ids) const {
    if (!grad_enabled_) return false;
    for (Id id : ids) {
        if (id != kNone && nodes_[id].requires_grad) return true;
    }
    return false;
}

template <typename T>
typename Graph<T>::Id Graph<T>::input(Tensor<T> value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

template <typename T>
typename Graph<T>::Id Graph<T>::param(Param<T>& p) {
    Node n;
    n.ref = &p.value;
    n.param = &p;
    n.requires_grad = grad_enabled_;
    return push(std::move(n));
}

template <typename T>
const Tensor<T>& Graph<T>::value(Id id) const {
    const Node& n = nodes_.at(id);
    return n.ref ? *n.ref : n.value;
}

template <typename T>
Tensor<T>& Graph<T>::grad(Id id) {
    Node& n = nodes_.at(id);
    if (n.param) {
        n.has_grad = true;
        return n.param->grad;
    }
    if (!n.has_grad) {
        n.grad = Tensor<T>(value(id).shape());
        n.has_grad = true;
    }
    return n.grad;
}

template <typename T>
void Graph<T>::backward(Id loss, T seed) {
    if (!grad_enabled_) throw std::logic_error("backward() on a graph built without gradients");
    if (value(loss).size() != 1) throw std::invalid_argument("backward() needs a scalar loss");
    grad(loss)[0] += seed;
    for (Id id = loss; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.backward && n.requires_grad && n.has_grad) n.backward();
    }
}

template <typename T>
typename Graph<T>::Id Graph<T>::linear(Id x, Id w, Id b) {
    const auto& X = value(x);
    const auto& W = value(w);
    require(W.rank() == 2, "linear: weight must be rank 2");
    require(X.cols() == W.dim(0), "linear: input width does not match weight rows");
    const std::size_t m = X.rows(), k = W.dim(0), n = W.dim(1);
    const T* bias = nullptr;
    if (b != kNone) {
        require(value(b).size() == n, "linear: bias width mismatch");
        bias = value(b).data();
    }
    Shape shape = X.shape();
    shape.back() = n;
    Node node;
    node.value = Tensor<T>(shape);
    kernels::linear(X.data(), W.data(), bias, node.value.data(), m, k, n);
    node.requires_grad = any_requires({x, w, b});
    const Id self = static_cast<Id>(nodes_.size());
    if (node.requires_grad) {
        node.backward = [this, self, x, w, b, m, k, n] {
            const Tensor<T>& dy = nodes_[self].grad;
            if (nodes_[x].requires_grad) {
                kernels::matmul_nt_acc(dy.data(), value(w).data(), grad(x).data(), m, n, k, scratch_);
            }
            if (nodes_[w].requires_grad) {
                kernels::matmul_tn_acc(value(x).data(), dy.data(), grad(w).data(), m, k, n);
            }
            if (b != kNone && nodes_[b].requires_grad) {
                T* db = grad(b).data();
                for (std::size_t i = 0; i < m; ++i) {
                    const T* row = dy.data() + i * n;
                    for (std::size_t j = 0; j < n; ++j) db[j] += row[j];
                }
            }
        };
    }
    return push(std::move(node));
}

template <typename T>
typename Graph<T>::Id Graph<T>::add(Id a, Id b) {
    const auto& A = value(a);
    const auto& B = value(b);
    require(A.size() == B.size(), "add: size mismatch");
    Node node;
    node.value = Tensor<T>(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) node.value[i] = A[i] + B[i];
    node.requires_grad = any_requires({a, b});
    const Id self = static_cast<Id>(nodes_.size());
    if (node.requires_grad) {
        node.backward = [this, self, a, b] {
            const Tensor<T>& dy = nodes_[self].grad;
            for (Id in : {a, b}) {
                if (!nodes_[in].requires_grad) continue;
                T* g = grad(in).data();
                for (std::size_t i = 0; i < dy.size(); ++i) g[i] += dy[i];
            }
        };
    }
    return push(std::move(node));
}

template <typename T>
typename Graph<T>::Id Graph<T>::add_row(Id x, Id table, std::size_t row) {
    const auto& X = value(x);
    const auto& Tb = value(table);
    require(Tb.cols() == X.cols(), "add_row: width mismatch");
    require(row < Tb.rows(), "add_row: row out of range");
    const std::size_t d = X.cols();
    Node node;
    node.value = X;
    for (std::size_t r = 0; r < X.rows(); ++r) {
        T* out = node.value.data() + r * d;
        const T* add = Tb.data() + row * d;
        for (std::size_t j = 0; j < d; ++j) out[j] += add[j];
    }
    node.requires_grad = any_requires({x, table});
    const Id self = static_cast<Id>(nodes_.size());
    if (node.requires_grad) {
        node.backward = [this, self, x, table, row, d] {
            const Tensor<T>& dy = nodes_[self].grad;
            if (nodes_[x].requires_grad) {
                T* g = grad(x).data();
                for (std::size_t i = 0; i < dy.size(); ++i) g[i] += dy[i];
            }
            if (nodes_[table].requires_grad) {
                T* g = grad(table).data() + row * d;
                for (std::size_t r = 0; r < dy.rows(); ++r)
                    for (std::size_t j = 0; j < d; ++j) g[j] += dy[r * d + j];
            }
        };
    }
    return push(std::move(node));
}

template <typename T>
typename Graph<T>::Id Graph<T>::layer_norm(Id x, Id gain, Id bias, T eps) {
    const auto& X = value(x);
    const std::size_t d = X.cols(), rows = X.rows();
    require(value(gain).size() == d && value(bias).size() == d, "layer_norm: gain/bias width mismatch");
    Node node;
    node.value = Tensor<T>(X.shape());
    node.aux = Tensor<T>({rows, 2});  // mean, rstd
    for (std::size_t r = 0; r < rows; ++r) {
        T mean;
        const T rstd = kernels::layer_norm_row(X.data() + r * d, value(gain).data(), value(bias).data(), eps,
                                               node.value.data() + r * d, d, &mean);
        node.aux[2 * r] = mean;
        node.aux[2 * r + 1] = rstd;
    }
    node.requires_grad = any_requires({x, gain, bias});
    const Id self = static_cast<Id>(nodes_.size());
    if (node.requires_grad) {
        node.backward = [this, self, x, gain, bias, d, rows] {
            const Tensor<T>& dy = nodes_[self].grad;
            const Tensor<T>& stats = nodes_[self].aux;
            const T* X = value(x).data();
            const T* g = value(gain).data();
            T* dx = nodes_[x].requires_grad ? grad(x).data() : nullptr;
            T* dg = nodes_[gain].requires_grad ? grad(gain).data() : nullptr;
            T* db = nodes_[bias].requires_grad ? grad(bias).data() : nullptr;
            std::vector<T> xhat(d), dxhat(d);
            for (std::size_t r = 0; r < rows; ++r) {
                const T mean = stats[2 * r], rstd = stats[2 * r + 1];
                const T* xr = X + r * d;
                const T* dyr = dy.data() + r * d;
                T sum_dxhat = 0, sum_dxhat_xhat = 0;
                for (std::size_t j = 0; j < d; ++j) {
                    xhat[j] = (xr[j] - mean) * rstd;
                    dxhat[j] = dyr[j] * g[j];
                    sum_dxhat += dxhat[j];
                    sum_dxhat_xhat += dxhat[j] * xhat[j];
                    if (dg) dg[j] += dyr[j] * xhat[j];
                    if (db) db[j] += dyr[j];
                }
                if (dx) {
                    const T inv_n = T(1) / static_cast<T>(d);
                    T* dxr = dx + r * d;
                    for (std::size_t j = 0; j < d; ++j)
                        dxr[j] += rstd * (dxhat[j] - inv_n * sum_dxhat - xhat[j] * inv_n * sum_dxhat_xhat);
                }
            }
        };
    }
    return push(std::move(node));
}

template <typename T>
typename Graph<T>::Id Graph<T>::gelu(Id x) {
    const auto& X = value(x);
    Node node;
    node.value = Tensor<T>(X.shape());
    for (std::size_t i = 0; i < X.size(); ++i) node.value[i] = kernels::gelu(X[i]);
    node.requires_grad = any_requires({x});
    const Id self = static_cast<Id>(nodes_.size());
    if (node.requires_grad) {
        node.backward = [this, self, x] {
            const Tensor<T>& dy = nodes_[self].grad;
            const Tensor<T>& X = value(x);
            T* g = grad(x).data();
            for (std::size_t i = 0; i < dy.size(); ++i) g[i] += dy[i] * kernels::gelu_grad(X[i]);
        };
    }
    return push(std::move(node));
}

template <typename T>
typename Graph<T>::Id Graph<T>::embed(Id table, std::span<const int> ids) {
    const auto& Tb = value(table);
    const std::size_t d = Tb.cols(), vocab = Tb.rows();
    Node node;
    node.value = Tensor<T>({ids.size(), d});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
            throw std::out_of_range("embed: id " + std::to_string(ids[i]) + " outside table of " +
                                    std::to_string(vocab) + " rows");
        }
        std::copy_n(Tb.data() + static_cast<std::size_t>(ids[i]) * d, d, node.value.data() + i * d);
    }
    node.requires_grad = any_requires({table});
    const Id self = static_cast<Id>(nodes_.size());
    if (node.requires_grad) {
        node.backward = [this, self, table, d, ids = std::vector<int>(ids.begin(), ids.end())] {
            const Tensor<T>& dy = nodes_[self].grad;
            T* g = grad(table).data();
            for (std::size_t i = 0; i < ids.size(); ++i) {
                T* dst = g + static_cast<std::size_t>(ids[i]) * d;
                for (std::size_t j = 0; j < d; ++j) dst[j] += dy[i * d + j];
            }
        };
    }
    return push(std::move(node));
}

template <typename T>
typename Graph<T>::Id Graph<T>::attention(Id q, Id k, Id v, const AttentionSpec& spec) {
    const auto& Q = value(q);
    const auto& K = value(k);
    const auto& V = value(v);
    const std::size_t tq = Q.rows(), tk = K.rows(), d = Q.cols();
    require(K.cols() == d && V.cols() == d && V.rows() == tk, "attention: q/k/v shape mismatch");
    require(spec.heads > 0 && d % spec.heads == 0, "attention: width not divisible by heads");
    require(!spec.key_valid || spec.key_valid->size() == tk, "attention: key mask length mismatch");
    const std::size_t heads = spec.heads, hd = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(hd));
    const bool causal = spec.causal;
    std::vector<std::uint8_t> key_valid = spec.key_valid ? *spec.key_valid : std::vector<std::uint8_t>(tk, 1);

    Node node;
    node.value = Tensor<T>({tq, d});
    node.aux = Tensor<T>({heads, tq, tk});
    for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < tq; ++i) {
            auto valid = [&](std::size_t j) { return key_valid[j] && (!causal || j <= i); };
            kernels::attend_row(Q.data() + i * d + h * hd, K.data() + h * hd, V.data() + h * hd, d, hd, tk, scale,
                                valid, node.aux.data() + (h * tq + i) * tk, node.value.data() + i * d + h * hd);
        }
    }
    node.requires_grad = any_requires({q, k, v});
    const Id self = static_cast<Id>(nodes_.size());
    if (node.requires_grad) {
        node.backward = [this, self, q, k, v, tq, tk, d, heads, hd, scale, causal,
                         key_valid = std::move(key_valid)] {
            const Tensor<T>& dy = nodes_[self].grad;
            const Tensor<T>& probs = nodes_[self].aux;
            const T* Q = value(q).data();
            const T* K = value(k).data();
            const T* V = value(v).data();
            T* dq = nodes_[q].requires_grad ? grad(q).data() : nullptr;
            T* dk = nodes_[k].requires_grad ? grad(k).data() : nullptr;
            T* dv = nodes_[v].requires_grad ? grad(v).data() : nullptr;
            std::vector<T> dp(tk);
            for (std::size_t h = 0; h < heads; ++h) {
                for (std::size_t i = 0; i < tq; ++i) {
                    const T* p = probs.data() + (h * tq + i) * tk;
                    const T* g = dy.data() + i * d + h * hd;
                    const T* qi = Q + i * d + h * hd;
                    const std::size_t limit = causal ? std::min(tk, i + 1) : tk;
                    T dot_pdp = 0;
                    for (std::size_t j = 0; j < limit; ++j) {
                        if (!key_valid[j]) continue;
                        const T* vj = V + j * d + h * hd;
                        T s = 0;
                        for (std::size_t t = 0; t < hd; ++t) s += g[t] * vj[t];
                        dp[j] = s;
                        dot_pdp += p[j] * s;
                        if (dv) {
                            T* dvj = dv + j * d + h * hd;
                            for (std::size_t t = 0; t < hd; ++t) dvj[t] += p[j] * g[t];
                        }
                    }
                    for (std::size_t j = 0; j < limit; ++j) {
                        if (!key_valid[j]) continue;
                        const T ds = p[j] * (dp[j] - dot_pdp) * scale;
                        if (ds == T(0)) continue;
                        const T* kj = K + j * d + h * hd;
                        if (dq) {
                            T* dqi = dq + i * d + h * hd;
                            for (std::size_t t = 0; t < hd; ++t) dqi[t] += ds * kj[t];
                        }
                        if (dk) {
                            T* dkj = dk + j * d + h * hd;
                            for (std::size_t t = 0; t < hd; ++t) dkj[t] += ds * qi[t];
                        }
                    }
                }
            }
        };
    }
    return push(std::move(node));
}

template <typename T>
const Tensor<T>& Graph<T>::attention_probs(Id attn) const {
    const Node& n = nodes_.at(attn);
    if (n.aux.rank() != 3) throw std::invalid_argument("node is not an attention node");
    return n.aux;
}

template <typename T>
typename Graph<T>::Id Graph<T>::concat_rows(std::span<const Id> parts, std::size_t total_rows,
                                            const Tensor<T>* padding) {
    require(!parts.empty(), "concat_rows: no parts");
    const std::size_t d = value(parts[0]).cols();
    std::size_t used = 0;
    for (Id p : parts) {
        require(value(p).cols() == d, "concat_rows: width mismatch");
        used += value(p).rows();
    }
    require(used <= total_rows, "concat_rows: parts exceed total rows");
    Node node;
    if (padding) {
        require(padding->rows() == total_rows && padding->cols() == d, "concat_rows: padding shape mismatch");
        node.value = *padding;
        node.value.reshape({total_rows, d});
    } else {
        node.value = Tensor<T>({total_rows, d});
    }
    std::size_t off = 0;
    for (Id p : parts) {
        const auto& P = value(p);
        std::copy(P.data(), P.data() + P.size(), node.value.data() + off * d);
        off += P.rows();
    }
    bool req = false;
    for (Id p : parts) req = req || any_requires({p});
    node.requires_grad = req;
    const Id self = static_cast<Id>(nodes_.size());
    if (req) {
        node.backward = [this, self, d, parts = std::vector<Id>(parts.begin(), parts.end())] {
            const Tensor<T>& dy = nodes_[self].grad;
            std::size_t off = 0;
            for (Id p : parts) {
                const std::size_t n = value(p).size();
                if (nodes_[p].requires_grad) {
                    T* g = grad(p).data();
                    for (std::size_t i = 0; i < n; ++i) g[i] += dy[off * d + i];
                }
                off += value(p).rows();
            }
        };
    }
    return push(std::move(node));
}

template <typename T>
typename Graph<T>::Id Graph<T>::cross_entropy(Id logits, std::span<const int> targets) {
    const auto& L = value(logits);
    const std::size_t rows = L.rows(), vocab = L.cols();
    if (targets.size() != rows) {
        throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                                    std::to_string(rows) + " logit rows");
    }
    require(rows > 0, "cross_entropy: empty input");
    Node node;
    node.value = Tensor<T>({1});
    node.aux = Tensor<T>({rows, vocab});  // softmax
    T total = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        const int t = targets[i];
        if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
            throw std::out_of_range("cross_entropy: target id " + std::to_string(t) + " outside vocabulary of " +
                                    std::to_string(vocab));
        }
        const T* row = L.data() + i * vocab;
        T* p = node.aux.data() + i * vocab;
        T mx = row[0];
        for (std::size_t j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
        T sum = 0;
        for (std::size_t j = 0; j < vocab; ++j) {
            p[j] = std::exp(row[j] - mx);
            sum += p[j];
        }
        const T inv = T(1) / sum;
        for (std::size_t j = 0; j < vocab; ++j) p[j] *= inv;
        total += (mx + std::log(sum)) - row[static_cast<std::size_t>(t)];
    }
    node.value[0] = total / static_cast<T>(rows);
    node.requires_grad = any_requires({logits});
    const Id self = static_cast<Id>(nodes_.size());
    if (node.requires_grad) {
        node.backward = [this, self, logits, rows, vocab, targets = std::vector<int>(targets.begin(), targets.end())] {
            const T up = nodes_[self].grad[0] / static_cast<T>(rows);
            const Tensor<T>& p = nodes_[self].aux;
            T* g = grad(logits).data();
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < vocab; ++j) g[i * vocab + j] += up * p[i * vocab + j];
                g[i * vocab + static_cast<std::size_t>(targets[i])] -= up;
            }
        };
    }
    return push(std::move(node));
}

template <typename T>
typename Graph<T>::Id Graph<T>::sum(Id x) {
    const auto& X = value(x);
    Node node;
    node.value = Tensor<T>({1});
    T s = 0;
    for (T v : X.span()) s += v;
    node.value[0] = s;
    node.requires_grad = any_requires({x});
    const Id self = static_cast<Id>(nodes_.size());
    if (node.requires_grad) {
        node.backward = [this, self, x] {
            const T up = nodes_[self].grad[0];
            for (T& g : grad(x).span()) g += up;
        };
    }
    return push(std::move(node));
}

template <typename T>
typename Graph<T>::Id Graph<T>::square(Id x) {
    const auto& X = value(x);
    Node node;
    node.value = Tensor<T>(X.shape());
    for (std::size_t i = 0; i < X.size(); ++i) node.value[i] = X[i] * X[i];
    node.requires_grad = any_requires({x});
    const Id self = static_cast<Id>(nodes_.size());
    if (node.requires_grad) {
        node.backward = [this, self, x] {
            const Tensor<T>& dy = nodes_[self].grad;
            const Tensor<T>& X = value(x);
            T* g = grad(x).data();
            for (std::size_t i = 0; i < dy.size(); ++i) g[i] += T(2) * X[i] * dy[i];
        };
    }
    return push(std::move(node));
}

template <typename T>
typename Graph<T>::Id Graph<T>::scale(Id x, T s) {
    const auto& X = value(x);
    Node node;
    node.value = Tensor<T>(X.shape());
    for (std::size_t i = 0; i < X.size(); ++i) node.value[i] = X[i] * s;
    node.requires_grad = any_requires({x});
    const Id self = static_cast<Id>(nodes_.size());
    if (node.requires_grad) {
        node.backward = [this, self, x, s] {
            const Tensor<T>& dy = nodes_[self].grad;
            T* g = grad(x).data();
            for (std::size_t i = 0; i < dy.size(); ++i) g[i] += s * dy[i];
        };
    }
    return push(std::move(node));
}

template class Graph<float>;
template class Graph<double>;

}  // namespace endo
