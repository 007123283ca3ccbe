#include "endo/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace endo {

Words normalize_words(std::string_view text) {
    Words out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += static_cast<char>(std::tolower(c));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

namespace {

using NGramCounts = std::map<std::vector<std::string_view>, std::uint64_t>;

NGramCounts ngrams(const Words& w, std::size_t n) {
    NGramCounts counts;
    if (w.size() < n) return counts;
    for (std::size_t i = 0; i + n <= w.size(); ++i) {
        std::vector<std::string_view> key(w.begin() + static_cast<std::ptrdiff_t>(i),
                                          w.begin() + static_cast<std::ptrdiff_t>(i + n));
        ++counts[key];
    }
    return counts;
}

}  // namespace

BleuStats bleu_stats(std::span<const Words> candidates, std::span<const Words> references) {
    if (candidates.size() != references.size()) throw std::invalid_argument("bleu: candidate/reference count mismatch");
    if (candidates.empty()) throw std::invalid_argument("bleu: empty corpus");
    BleuStats s;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        const auto& r = references[i];
        s.cand_len += c.size();
        s.ref_len += r.size();
        for (std::size_t n = 1; n <= 4; ++n) {
            const auto cc = ngrams(c, n);
            const auto rc = ngrams(r, n);
            for (const auto& [g, count] : cc) {
                auto it = rc.find(g);
                s.matched[n - 1] += it == rc.end() ? 0 : std::min(count, it->second);
                s.total[n - 1] += count;
            }
        }
    }
    return s;
}

double bleu_from_stats(const BleuStats& s, int k) {
    if (k < 1 || k > 4) throw std::invalid_argument("bleu: k must be in [1, 4]");
    if (s.cand_len == 0) return 0.0;
    double log_sum = 0;
    for (int n = 0; n < k; ++n) {
        if (s.matched[n] == 0 || s.total[n] == 0) return 0.0;
        log_sum += std::log(static_cast<double>(s.matched[n]) / static_cast<double>(s.total[n]));
    }
    const double c = static_cast<double>(s.cand_len), r = static_cast<double>(s.ref_len);
    const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::exp(log_sum / k);
}

double bleu(std::span<const Words> candidates, std::span<const Words> references, int k) {
    return bleu_from_stats(bleu_stats(candidates, references), k);
}

namespace {

// Branch and bound over candidate positions. Every alignment it completes has
// the maximum possible number of matches; among those it maximizes the count
// of adjacent pairs that continue a chunk. Exact unless the node budget runs
// out, in which case the best alignment found so far is used.
class MeteorSearch {
public:
    MeteorSearch(const Words& cand, const Words& ref) : n_(cand.size()), m_(ref.size()) {
        std::unordered_map<std::string_view, int> ids;
        auto id_of = [&](std::string_view w) { return ids.try_emplace(w, static_cast<int>(ids.size())).first->second; };
        c_.reserve(n_);
        for (const auto& w : cand) c_.push_back(id_of(w));
        for (const auto& w : ref) r_.push_back(id_of(w));
        const std::size_t kinds = ids.size();
        std::vector<int> cc(kinds, 0), rc(kinds, 0);
        for (int w : c_) ++cc[w];
        for (int w : r_) ++rc[w];
        need_.resize(kinds);
        for (std::size_t w = 0; w < kinds; ++w) {
            need_[w] = std::min(cc[w], rc[w]);
            max_matches_ += need_[w];
        }
        ref_pos_.resize(kinds);
        for (std::size_t j = 0; j < m_; ++j) ref_pos_[r_[j]].push_back(static_cast<int>(j));
        // future_bound_[i]: positions k >= i that could continue a chunk
        future_bound_.assign(n_ + 1, 0);
        for (std::size_t i = n_; i-- > 0;) {
            const bool here = rc[c_[i]] > 0;
            const bool prev = i > 0 && rc[c_[i - 1]] > 0;
            future_bound_[i] = future_bound_[i + 1] + (here && prev ? 1 : 0);
        }
        remaining_.assign(kinds, 0);
        for (int w : c_) ++remaining_[w];
        matched_.assign(kinds, 0);
        used_.assign(m_, false);
        assign_.assign(n_, -1);
    }

    int max_matches() const { return max_matches_; }

    int best_continuations() {
        if (max_matches_ == 0) return 0;
        dfs(0, 0);
        return best_;
    }

private:
    void dfs(std::size_t i, int cont) {
        if (++nodes_ > kNodeBudget && best_ >= 0) return;
        if (i == n_) {
            best_ = std::max(best_, cont);
            return;
        }
        if (cont + future_bound_[i] <= best_) return;
        const int w = c_[i];
        --remaining_[w];
        const int prev = i > 0 ? assign_[i - 1] : -1;
        if (matched_[w] < need_[w]) {
            // try continuing the previous chunk first so a good bound appears early
            auto try_pos = [&](int j) {
                used_[j] = true;
                assign_[i] = j;
                ++matched_[w];
                dfs(i + 1, cont + (prev >= 0 && j == prev + 1 ? 1 : 0));
                --matched_[w];
                assign_[i] = -1;
                used_[j] = false;
            };
            if (prev >= 0 && prev + 1 < static_cast<int>(m_) && r_[prev + 1] == w && !used_[prev + 1]) {
                try_pos(prev + 1);
            }
            for (int j : ref_pos_[w]) {
                if (used_[j] || (prev >= 0 && j == prev + 1)) continue;
                try_pos(j);
            }
        }
        // leaving i unmatched is allowed only if the remaining occurrences can still reach need_[w]
        if (matched_[w] + remaining_[w] >= need_[w]) dfs(i + 1, cont);
        ++remaining_[w];
    }

    static constexpr std::uint64_t kNodeBudget = 2'000'000;

    std::size_t n_, m_;
    std::vector<int> c_, r_, need_, remaining_, matched_, assign_, future_bound_;
    std::vector<std::vector<int>> ref_pos_;
    std::vector<bool> used_;
    int max_matches_ = 0;
    int best_ = -1;
    std::uint64_t nodes_ = 0;
};

}  // namespace

MeteorDetail meteor_detail(const Words& candidate, const Words& reference) {
    MeteorDetail d;
    if (candidate.empty() || reference.empty()) return d;
    MeteorSearch search(candidate, reference);
    d.matches = search.max_matches();
    if (d.matches == 0) return d;
    d.chunks = d.matches - search.best_continuations();
    d.precision = static_cast<double>(d.matches) / static_cast<double>(candidate.size());
    d.recall = static_cast<double>(d.matches) / static_cast<double>(reference.size());
    d.fmean = 10.0 * d.precision * d.recall / (d.recall + 9.0 * d.precision);
    const double frag = static_cast<double>(d.chunks) / static_cast<double>(d.matches);
    d.score = d.fmean * (1.0 - 0.5 * frag * frag * frag);
    return d;
}

double meteor(const Words& candidate, const Words& reference) { return meteor_detail(candidate, reference).score; }

std::size_t lcs_length(const Words& a, const Words& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

RougeL rouge_l(const Words& candidate, const Words& reference) {
    RougeL r;
    r.lcs = lcs_length(candidate, reference);
    if (r.lcs == 0) return r;
    r.precision = static_cast<double>(r.lcs) / static_cast<double>(candidate.size());
    r.recall = static_cast<double>(r.lcs) / static_cast<double>(reference.size());
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

double MetricReport::bleu_k(int k) const {
    switch (k) {
        case 1: return bleu1;
        case 2: return bleu2;
        case 3: return bleu3;
        case 4: return bleu4;
    }
    throw std::invalid_argument("bleu_k: k must be in [1, 4]");
}

MetricReport evaluate_corpus(std::span<const TextPair> pairs) {
    if (pairs.empty()) throw std::invalid_argument("evaluate_corpus: no pairs");
    std::vector<Words> cands, refs;
    cands.reserve(pairs.size());
    refs.reserve(pairs.size());
    MetricReport rep;
    double met = 0, rouge = 0;
    for (const auto& p : pairs) {
        cands.push_back(normalize_words(p.generated));
        refs.push_back(normalize_words(p.reference));
        met += meteor(cands.back(), refs.back());
        rouge += rouge_l(cands.back(), refs.back()).f1;
    }
    rep.counts = bleu_stats(cands, refs);
    rep.bleu1 = bleu_from_stats(rep.counts, 1);
    rep.bleu2 = bleu_from_stats(rep.counts, 2);
    rep.bleu3 = bleu_from_stats(rep.counts, 3);
    rep.bleu4 = bleu_from_stats(rep.counts, 4);
    rep.meteor = met / static_cast<double>(pairs.size());
    rep.rouge = rouge / static_cast<double>(pairs.size());
    rep.pairs = pairs.size();
    return rep;
}

double relative_change(double a, double b) {
    if (b == 0) throw std::domain_error("relative_change: baseline is zero");
    return (a - b) / b;
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names = {"bleu1", "bleu2", "bleu3", "bleu4", "meteor", "rouge_l"};
    return names;
}

double metric_value(const MetricReport& r, std::string_view name) {
    if (name == "bleu1") return r.bleu1;
    if (name == "bleu2") return r.bleu2;
    if (name == "bleu3") return r.bleu3;
    if (name == "bleu4") return r.bleu4;
    if (name == "meteor") return r.meteor;
    if (name == "rouge_l") return r.rouge;
    throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace

std::string metric_csv(const MetricReport& r) {
    std::string s = "metric,value\n";
    for (const auto& n : metric_names()) s += n + "," + fmt("%.10f", metric_value(r, n)) + "\n";
    s += "pairs," + std::to_string(r.pairs) + "\n";
    return s;
}

std::string metric_table(const MetricReport& r) {
    std::ostringstream s;
    char line[96];
    std::snprintf(line, sizeof line, "%-8s  %8s\n", "metric", "value");
    s << line;
    for (const auto& n : metric_names()) {
        std::snprintf(line, sizeof line, "%-8s  %8.4f\n", n.c_str(), metric_value(r, n));
        s << line;
    }
    std::snprintf(line, sizeof line, "%-8s  %8zu\n", "pairs", r.pairs);
    s << line;
    return s.str();
}

std::string ablation_csv(const MetricReport& a, const MetricReport& b) {
    std::string s = "metric,a,b,relative_change\n";
    for (const auto& n : metric_names()) {
        const double va = metric_value(a, n), vb = metric_value(b, n);
        s += n + "," + fmt("%.10f", va) + "," + fmt("%.10f", vb) + "," +
             (vb == 0 ? std::string("nan") : fmt("%.10f", relative_change(va, vb))) + "\n";
    }
    return s;
}

std::string ablation_table(const MetricReport& a, const MetricReport& b, std::string_view label_a,
                           std::string_view label_b) {
    std::ostringstream s;
    char line[160];
    const std::string la(label_a.substr(0, 12)), lb(label_b.substr(0, 12));
    std::snprintf(line, sizeof line, "%-8s  %12s  %12s  %10s\n", "metric", la.c_str(), lb.c_str(), "change");
    s << line;
    for (const auto& n : metric_names()) {
        const double va = metric_value(a, n), vb = metric_value(b, n);
        if (vb == 0) {
            std::snprintf(line, sizeof line, "%-8s  %12.4f  %12.4f  %10s\n", n.c_str(), va, vb, "n/a");
        } else {
            std::snprintf(line, sizeof line, "%-8s  %12.4f  %12.4f  %9.2f%%\n", n.c_str(), va, vb,
                          100.0 * relative_change(va, vb));
        }
        s << line;
    }
    return s.str();
}

}  // namespace endo
