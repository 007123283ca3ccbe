#pragma once

#include <map>
#include <string>
#include <vector>

#include "endo/tensor.hpp"

namespace endo {

template <typename T>
struct Param {
    Tensor<T> value;
    Tensor<T> grad;
};

// Named learned tensors with gradients. Iteration is lexicographic by name.
// Entries live in std::map nodes, so Param references stay valid as long as
// the entry is not erased.
template <typename T>
class ParamStore {
public:
    using Map = std::map<std::string, Param<T>>;

    Param<T>& add(const std::string& name, Shape shape) {
        auto [it, inserted] = entries_.try_emplace(name);
        if (!inserted) throw std::invalid_argument("duplicate parameter '" + name + "'");
        it->second.value = Tensor<T>(shape);
        it->second.grad = Tensor<T>(std::move(shape));
        return it->second;
    }

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    Param<T>& at(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw std::out_of_range("no parameter named '" + name + "'");
        return it->second;
    }
    const Param<T>& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw std::out_of_range("no parameter named '" + name + "'");
        return it->second;
    }

    Map& entries() { return entries_; }
    const Map& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    std::size_t numel() const {
        std::size_t n = 0;
        for (const auto& [name, p] : entries_) n += p.value.size();
        return n;
    }

    void zero_grad() {
        for (auto& [name, p] : entries_) p.grad.fill(T(0));
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& [name, p] : entries_) out.push_back(name);
        return out;
    }

    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& [name, p] : entries_) {
            auto& q = out.add(name, p.value.shape());
            q.value = p.value.template cast<U>();
        }
        return out;
    }

private:
    Map entries_;
};

}  // namespace endo
