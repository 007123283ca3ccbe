#include "endo/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <stdexcept>

#include "endo/generation.hpp"
#include "endo/model.hpp"
#include "endo/numerics.hpp"
#include "endo/rng.hpp"
#include "endo/storage.hpp"
#include "endo/training.hpp"

namespace endo {

bool SuiteReport::passed() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

template <typename T>
bool bitwise_equal(std::span<const T> a, std::span<const T> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

std::vector<ImageTensor<double>> random_images(Rng& rng, int n, int size) {
    std::vector<ImageTensor<double>> out(static_cast<std::size_t>(n));
    for (auto& im : out) {
        im.pixels = Tensor<double>({static_cast<std::size_t>(size), static_cast<std::size_t>(size), 3});
        for (auto& v : im.pixels.span()) v = rng.normal();
    }
    return out;
}

std::vector<const ImageTensor<double>*> pointers(const std::vector<ImageTensor<double>>& imgs) {
    std::vector<const ImageTensor<double>*> p;
    for (const auto& im : imgs) p.push_back(&im);
    return p;
}

std::vector<int> random_ids(Rng& rng, int len, int vocab) {
    std::vector<int> ids(static_cast<std::size_t>(len));
    for (auto& id : ids) id = static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab)));
    return ids;
}

// Tiny geometry with a vocabulary large enough for the real special ids.
ModelConfig tiny_with_specials() {
    auto cfg = ModelConfig::tiny(Tokenizer::kFirstMerge + 1);
    cfg.decoder.max_seq_len = 24;
    return cfg;
}

CheckResult check_masking_loss(const VerifyOptions& opts, Rng& rng) {
    const auto cfg = tiny_with_specials();
    const auto model = Model<double>::create(cfg, opts.seed);
    const std::size_t rows = static_cast<std::size_t>(cfg.max_images) * cfg.encoder.n_patches();
    double worst = 0;
    for (int n = 1; n < cfg.max_images; ++n) {
        const auto imgs = random_images(rng, n, cfg.encoder.image_size);
        const auto tf = teacher_forcing(random_ids(rng, 6, 256), cfg.decoder.max_seq_len);
        Tensor<double> fill({rows, static_cast<std::size_t>(cfg.encoder.d_model)});
        for (auto& v : fill.span()) v = 10.0 * rng.normal();
        auto run = [&](const std::vector<ImageTensor<double>>& images, const Tensor<double>* f) {
            Graph<double> g(false);
            ParamScope<double> scope(g, model.params);
            return g.value(findings_loss<double>(scope, cfg, pointers(images), tf, f))[0];
        };
        auto second = imgs;
        // the fault disturbs a valid slot, which must show up
        if (opts.inject_fault && n == 3) second[0].pixels[0] += 1.0;
        worst = std::max(worst, std::abs(run(imgs, nullptr) - run(second, &fill)));
    }
    return {"masking_loss", worst == 0, "max |loss difference| " + fmt("%.3g", worst) + " over n = 1..11"};
}

CheckResult check_masking_greedy(const VerifyOptions& opts, Rng& rng) {
    const auto cfg = tiny_with_specials();
    const auto model = Model<double>::create(cfg, opts.seed + 1);
    int mismatches = 0;
    for (int n = 1; n < cfg.max_images; ++n) {
        const auto imgs = random_images(rng, n, cfg.encoder.image_size);
        const auto ctx = findings_context<double>(model, pointers(imgs));
        auto noisy = ctx;
        for (std::size_t r = 0; r < noisy.valid.size(); ++r) {
            if (noisy.valid[r]) continue;
            for (auto& v : noisy.memory.row(r)) v = 10.0 * rng.normal();
        }
        const int max_len = cfg.decoder.max_seq_len - 1;
        const auto a = greedy_generate(ctx, model.params, cfg.decoder, max_len);
        const auto b = greedy_generate(noisy, model.params, cfg.decoder, max_len);
        IncrementalDecoder<double> da(model.params, cfg.decoder, ctx), db(model.params, cfg.decoder, noisy);
        bool same = a.ids == b.ids;
        int tok = Tokenizer::kBos;
        for (int s = 0; s < max_len && same; ++s) {
            const auto la = da.step(tok);
            const auto lb = db.step(tok);
            same = bitwise_equal(la, lb);
            tok = s < static_cast<int>(a.ids.size()) ? a.ids[static_cast<std::size_t>(s)] : Tokenizer::kEos;
        }
        if (!same) ++mismatches;
    }
    return {"masking_greedy", mismatches == 0,
            std::to_string(mismatches) + " of 11 procedures changed greedy output or step logits"};
}

CheckResult check_causality(const VerifyOptions& opts, Rng& rng) {
    const auto cfg = tiny_with_specials();
    const auto model = Model<double>::create(cfg, opts.seed + 2);
    int failures = 0;
    for (int c = 0; c < opts.cases; ++c) {
        const int n = 1 + static_cast<int>(rng.below(3));
        const auto imgs = random_images(rng, n, cfg.encoder.image_size);
        const auto ctx = findings_context<double>(model, pointers(imgs));
        const int len = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.decoder.max_seq_len - 1)));
        auto tokens = random_ids(rng, len, cfg.decoder.vocab_size);
        const auto t = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(len - 1)));
        auto mutated = tokens;
        for (std::size_t i = t + 1; i < mutated.size(); ++i) {
            mutated[i] = (mutated[i] + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.decoder.vocab_size - 1)))) %
                         cfg.decoder.vocab_size;
        }
        if (opts.inject_fault && c == 0) mutated[t] = (mutated[t] + 1) % cfg.decoder.vocab_size;
        const auto a = decoder_forward<double>(tokens, ctx, model.params, cfg.decoder, false);
        const auto b = decoder_forward<double>(mutated, ctx, model.params, cfg.decoder, false);
        const std::size_t width = a.logits.dim(1);
        const std::span<const double> pa(a.logits.data(), (t + 1) * width), pb(b.logits.data(), (t + 1) * width);
        if (!bitwise_equal(pa, pb)) ++failures;
    }
    return {"causality", failures == 0,
            std::to_string(failures) + " of " + std::to_string(opts.cases) + " cases changed logits at positions <= t"};
}

CheckResult check_incremental(const VerifyOptions& opts, Rng& rng) {
    const auto cfg = tiny_with_specials();
    const auto model = Model<double>::create(cfg, opts.seed + 3);
    int failures = 0;
    for (int c = 0; c < 10; ++c) {
        const auto imgs = random_images(rng, 1 + c % 4, cfg.encoder.image_size);
        const auto ctx = findings_context<double>(model, pointers(imgs));
        const auto tokens = random_ids(rng, cfg.decoder.max_seq_len, cfg.decoder.vocab_size);
        const auto full = decoder_forward<double>(tokens, ctx, model.params, cfg.decoder, false);
        IncrementalDecoder<double> inc(model.params, cfg.decoder, ctx);
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const auto row = inc.step(tokens[i]);
            if (!bitwise_equal<double>(row, full.logits.row(i))) {
                ++failures;
                break;
            }
        }
    }
    return {"incremental_decoding", failures == 0, std::to_string(failures) + " of 10 sequences diverged from the full pass"};
}

CheckResult check_schedule(const VerifyOptions& opts) {
    StageConfig cfg;
    cfg.peak_lr = 6e-4;
    cfg.warmup_frac = 0.05;
    cfg.lr_floor_frac = 0.10;
    // 101 updates: warmup 6, cosine over steps 6..100 with its midpoint at 53
    const long total = 101;
    const long warmup = 6;
    struct Anchor {
        long step;
        double expected;
    };
    const Anchor anchors[] = {{0, 6e-4 / warmup}, {warmup - 1, 6e-4}, {53, 3.3e-4}, {total - 1, 6e-5}};
    double worst = 0;
    for (const auto& a : anchors) {
        double got = lr_at(a.step, total, cfg);
        if (opts.inject_fault && a.step == 53) got *= 1 + 1e-9;
        worst = std::max(worst, std::abs(got - a.expected) / a.expected);
    }
    return {"lr_schedule", worst <= 1e-12, "max relative error at anchors " + fmt("%.3g", worst)};
}

Dataset<double> tiny_caption_data(Rng& rng, const ModelConfig& cfg, int n) {
    Dataset<double> d;
    d.images = random_images(rng, n, cfg.encoder.image_size);
    for (int i = 0; i < n; ++i) {
        typename Dataset<double>::Item item;
        item.id = "s" + std::to_string(i);
        item.images = {static_cast<std::size_t>(i)};
        item.text = random_ids(rng, 1 + static_cast<int>(rng.below(6)), 256);
        d.items.push_back(std::move(item));
    }
    return d;
}

CheckResult check_accumulation(const VerifyOptions& opts, Rng& rng) {
    const auto cfg = tiny_with_specials();
    const auto data = tiny_caption_data(rng, cfg, 32);
    StageConfig sc;
    sc.epochs = 1;
    sc.select_best = false;
    sc.max_seq_len = cfg.decoder.max_seq_len;
    sc.seed = opts.seed;
    struct Outcome {
        Model<double> model;
        ParamStore<double> grads;
    };
    auto run = [&](int micro, int accum) {
        Outcome o{Model<double>::create(cfg, opts.seed + 4), {}};
        auto c = sc;
        c.micro_batch = micro;
        c.accum_steps = accum;
        TrainHooks<double> hooks;
        hooks.on_gradients = [&](const ParamStore<double>& ps) {
            for (const auto& [name, p] : ps.entries()) o.grads.add(name, p.grad.shape()).value = p.grad;
        };
        train_stage<double>(o.model, data, nullptr, c, hooks);
        return o;
    };
    const auto a = run(1, 32);
    const auto b = run(32, 1);
    // Norm-wise per tensor, so tiny entries do not dominate.
    auto rel = [](const ParamStore<double>& x, const ParamStore<double>& y) {
        double worst = 0;
        for (const auto& [name, p] : x.entries()) {
            const auto& q = y.at(name).value;
            double diff = 0, scale = 0;
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                diff = std::max(diff, std::abs(p.value[i] - q[i]));
                scale = std::max({scale, std::abs(p.value[i]), std::abs(q[i])});
            }
            if (scale > 0) worst = std::max(worst, diff / scale);
        }
        return worst;
    };
    const double grad_diff = rel(a.grads, b.grads);
    double worst = std::max(grad_diff, rel(a.model.params, b.model.params));
    if (opts.inject_fault) worst += 1e-6;
    return {"accumulation_equivalence", worst <= 1e-10,
            "32x1 vs 1x32 max relative difference " + fmt("%.3g", worst) + " (gradients " + fmt("%.3g", grad_diff) +
                ")"};
}

CheckResult check_checkpoint_roundtrip(const VerifyOptions& opts) {
    const auto cfg = tiny_with_specials();
    const auto model = Model<double>::create(cfg, opts.seed + 5);
    CheckpointInfo info{cfg, "0123456789abcdef", 1, {}, stage_config_to_json(StageConfig{})};
    auto adam = AdamState<double>::zeros_like(model.params);
    adam.step = 3;
    const auto first = checkpoint_bytes(model, info, &adam);
    const auto loaded = parse_checkpoint<double>(first, &info.tokenizer_hash, &cfg);
    auto second = checkpoint_bytes(loaded.model, loaded.info, loaded.adam ? &*loaded.adam : nullptr);
    if (opts.inject_fault) second.back() ^= 1;
    return {"checkpoint_roundtrip", first == second, std::to_string(first.size()) + " bytes, save-load-save identical"};
}

CheckResult check_determinism(const VerifyOptions& opts, Rng& rng) {
    const auto cfg = tiny_with_specials();
    const auto data = tiny_caption_data(rng, cfg, 8);
    StageConfig sc;
    sc.epochs = 2;
    sc.micro_batch = 2;
    sc.accum_steps = 2;
    sc.select_best = false;
    sc.max_seq_len = cfg.decoder.max_seq_len;
    sc.seed = opts.seed;
    auto run = [&] {
        auto m = Model<double>::create(cfg, opts.seed + 6);
        TrainState<double> state;
        train_stage<double>(m, data, nullptr, sc, {}, &state);
        CheckpointInfo info{cfg, "hash", 1, state.progress, stage_config_to_json(sc)};
        auto bytes = checkpoint_bytes(m, info, &state.adam);
        const auto ctx = caption_context(m, data.images[0]);
        const auto gen = greedy_generate(ctx, m.params, cfg.decoder, 8);
        for (int id : gen.ids) bytes.push_back(static_cast<std::uint8_t>(id & 0xff));
        return bytes;
    };
    const auto a = run();
    auto b = run();
    if (opts.inject_fault) b[b.size() / 2] ^= 1;
    return {"determinism", a == b, "two seeded train+generate runs " + std::string(a == b ? "match" : "differ")};
}

}  // namespace

SuiteReport verify_gradcheck(const VerifyOptions& opts) {
    SuiteReport rep{"gradcheck", {}};
    const auto cfg = ModelConfig::tiny(64);
    auto model = Model<double>::create(cfg, opts.seed);
    Rng rng(derive_seed(opts.seed, "gradcheck"));
    // move layer-norm gains and biases off their trivial initial values
    for (auto& [name, p] : model.params.entries())
        for (auto& v : p.value.span()) v += 0.05 * rng.normal();
    const auto imgs = random_images(rng, 2, cfg.encoder.image_size);
    const auto ptrs = pointers(imgs);
    // vocab 64 has no room for the tokenizer's specials, so ids 0/1 stand in
    const auto tf = teacher_forcing(random_ids(rng, 5, 64), cfg.decoder.max_seq_len, 0, 1);
    const std::string victim = "dec.head.w";
    LossFn loss = [&](ParamStore<double>& ps, bool with_grad) {
        Graph<double> g(with_grad);
        ParamScope<double> scope(g, ps);
        const auto l = findings_loss<double>(scope, cfg, ptrs, tf);
        if (with_grad) {
            g.backward(l);
            if (opts.inject_fault && ps.contains(victim))
                for (auto& v : ps.at(victim).grad.span()) v *= 1.01;
        }
        return g.value(l)[0];
    };
    const auto r = grad_check(loss, model.params, 1e-5, 400, derive_seed(opts.seed, "coords"));
    const bool covered = r.groups_covered == model.params.size();
    rep.checks.push_back({"finite_difference", r.max_rel_error < 1e-4 && r.coordinates >= 200 && covered,
                          "max rel err " + fmt("%.3g", r.max_rel_error) + " (worst " + r.worst_param + ") over " +
                              std::to_string(r.coordinates) + " coordinates, " + std::to_string(r.groups_covered) +
                              "/" + std::to_string(model.params.size()) + " tensors"});
    return rep;
}

SuiteReport verify_invariants(const VerifyOptions& opts) {
    SuiteReport rep{"invariants", {}};
    Rng rng(derive_seed(opts.seed, "invariants"));
    rep.checks.push_back(check_masking_loss(opts, rng));
    rep.checks.push_back(check_masking_greedy(opts, rng));
    rep.checks.push_back(check_causality(opts, rng));
    rep.checks.push_back(check_incremental(opts, rng));
    rep.checks.push_back(check_schedule(opts));
    rep.checks.push_back(check_accumulation(opts, rng));
    rep.checks.push_back(check_checkpoint_roundtrip(opts));
    rep.checks.push_back(check_determinism(opts, rng));
    return rep;
}

namespace oracle {

double bleu(std::span<const Words> candidates, std::span<const Words> references, int k) {
    if (candidates.size() != references.size() || candidates.empty()) throw std::invalid_argument("oracle::bleu");
    double log_sum = 0;
    std::size_t c_len = 0, r_len = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        c_len += candidates[i].size();
        r_len += references[i].size();
    }
    if (c_len == 0) return 0;
    for (int n = 1; n <= k; ++n) {
        std::size_t matched = 0, total = 0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const auto& c = candidates[i];
            const auto& r = references[i];
            auto count = [n](const Words& w, std::size_t start, const Words& in) {
                std::size_t hits = 0;
                for (std::size_t j = 0; j + n <= in.size(); ++j) {
                    bool eq = true;
                    for (int t = 0; t < n && eq; ++t) eq = in[j + t] == w[start + t];
                    hits += eq;
                }
                return hits;
            };
            // each distinct n-gram once, at its first occurrence
            for (std::size_t s = 0; s + n <= c.size(); ++s) {
                bool first = true;
                for (std::size_t p = 0; p < s && first; ++p) {
                    bool eq = true;
                    for (int t = 0; t < n && eq; ++t) eq = c[p + t] == c[s + t];
                    if (eq) first = false;
                }
                if (!first) continue;
                const std::size_t in_c = count(c, s, c), in_r = count(c, s, r);
                matched += std::min(in_c, in_r);
                total += in_c;
            }
        }
        if (matched == 0) return 0;
        log_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
    }
    const double bp = c_len >= r_len ? 1.0 : std::exp(1.0 - static_cast<double>(r_len) / static_cast<double>(c_len));
    return bp * std::exp(log_sum / k);
}

std::size_t lcs(const Words& a, const Words& b) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
    std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
        if (i == a.size() || j == b.size()) return 0;
        const auto key = std::make_pair(i, j);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        const std::size_t v = a[i] == b[j] ? 1 + go(i + 1, j + 1) : std::max(go(i + 1, j), go(i, j + 1));
        memo[key] = v;
        return v;
    };
    return go(0, 0);
}

double rouge_l_f1(const Words& candidate, const Words& reference) {
    const auto l = static_cast<double>(lcs(candidate, reference));
    if (l == 0) return 0;
    const double p = l / static_cast<double>(candidate.size()), r = l / static_cast<double>(reference.size());
    return 2 * p * r / (p + r);
}

double meteor(const Words& candidate, const Words& reference) {
    int best_m = 0, best_chunks = 0;
    std::vector<int> assign(candidate.size(), -1);
    std::vector<bool> used(reference.size(), false);
    std::function<void(std::size_t)> go = [&](std::size_t i) {
        if (i == candidate.size()) {
            std::vector<std::pair<int, int>> pairs;
            for (std::size_t k = 0; k < assign.size(); ++k)
                if (assign[k] >= 0) pairs.emplace_back(static_cast<int>(k), assign[k]);
            const int m = static_cast<int>(pairs.size());
            int chunks = 0;
            for (std::size_t k = 0; k < pairs.size(); ++k) {
                const bool continues = k > 0 && pairs[k].first == pairs[k - 1].first + 1 &&
                                       pairs[k].second == pairs[k - 1].second + 1;
                if (!continues) ++chunks;
            }
            if (m > best_m || (m == best_m && chunks < best_chunks)) {
                best_m = m;
                best_chunks = chunks;
            }
            return;
        }
        go(i + 1);
        for (std::size_t j = 0; j < reference.size(); ++j) {
            if (used[j] || reference[j] != candidate[i]) continue;
            used[j] = true;
            assign[i] = static_cast<int>(j);
            go(i + 1);
            assign[i] = -1;
            used[j] = false;
        }
    };
    go(0);
    if (best_m == 0) return 0;
    const double p = static_cast<double>(best_m) / static_cast<double>(candidate.size());
    const double r = static_cast<double>(best_m) / static_cast<double>(reference.size());
    const double f = 10 * p * r / (r + 9 * p);
    const double frag = static_cast<double>(best_chunks) / best_m;
    return f * (1 - 0.5 * frag * frag * frag);
}

}  // namespace oracle

SuiteReport verify_oracles(const VerifyOptions& opts) {
    SuiteReport rep{"oracles", {}};
    Rng rng(derive_seed(opts.seed, "oracles"));
    const std::vector<std::string> lexicon{"the", "a", "polyp", "was", "found", "in", "stomach", "normal"};
    auto random_words = [&](int max_len) {
        Words w(rng.below(static_cast<std::uint64_t>(max_len) + 1));
        for (auto& s : w) s = lexicon[rng.below(lexicon.size())];
        return w;
    };
    std::vector<Words> cands, refs;
    double worst_meteor = 0, worst_rouge = 0;
    for (int i = 0; i < opts.cases; ++i) {
        cands.push_back(random_words(8));
        refs.push_back(random_words(8));
        worst_meteor = std::max(worst_meteor, std::abs(meteor(cands.back(), refs.back()) - oracle::meteor(cands.back(), refs.back())));
        auto long_c = random_words(50), long_r = random_words(50);
        if (lcs_length(long_c, long_r) != oracle::lcs(long_c, long_r)) worst_rouge = 1;
        worst_rouge = std::max(worst_rouge, std::abs(rouge_l(cands.back(), refs.back()).f1 -
                                                     oracle::rouge_l_f1(cands.back(), refs.back())));
    }
    double worst_bleu = 0;
    for (int k = 1; k <= 4; ++k) {
        // whole corpus plus a few sub-corpora, which exercise the brevity penalty and zero counts
        for (std::size_t n : {cands.size(), std::size_t{1}, std::size_t{3}, std::size_t{10}}) {
            const std::span<const Words> c(cands.data(), n), r(refs.data(), n);
            worst_bleu = std::max(worst_bleu, std::abs(bleu(c, r, k) - oracle::bleu(c, r, k)));
        }
    }
    if (opts.inject_fault) worst_bleu += 1e-9;
    rep.checks.push_back({"bleu_oracle", worst_bleu <= 1e-12, "max |diff| " + fmt("%.3g", worst_bleu)});
    rep.checks.push_back({"meteor_oracle", worst_meteor <= 1e-12, "max |diff| " + fmt("%.3g", worst_meteor)});
    rep.checks.push_back({"rouge_l_oracle", worst_rouge <= 1e-12, "max |diff| " + fmt("%.3g", worst_rouge)});

    struct Example {
        const char* name;
        double got, expected;
    };
    auto w = [](const char* s) { return normalize_words(s); };
    const std::vector<Words> c1{w("the the the the the the the")}, r1{w("the cat is on the mat")};
    const std::vector<Words> c2{w("polyp rectum")}, r2{w("polyp in the rectum")};
    const std::vector<TextPair> single{{"x", "a b c d", "a c b d"}};
    const Example examples[] = {
        {"bleu1 clipped counts", bleu(c1, r1, 1), 2.0 / 7.0},
        {"bleu1 brevity penalty", bleu(c2, r2, 1), std::exp(1.0 - 4.0 / 2.0)},
        {"meteor identical", meteor(w("a b c"), w("a b c")), 1.0 - 0.5 / 27.0},
        {"meteor swapped", meteor(w("b a"), w("a b")), 0.5},
        {"meteor disjoint", meteor(w("x y"), w("a b")), 0.0},
        {"rouge_l swap", rouge_l(w("a b c d"), w("a c b d")).f1, 0.75},
        {"corpus rouge", evaluate_corpus(single).rouge, 0.75},
        {"relative change", relative_change(0.550, 0.318), (0.550 - 0.318) / 0.318},
    };
    double worst_example = 0;
    std::string worst_name = "none";
    for (const auto& e : examples) {
        const double d = std::abs(e.got - e.expected);
        if (d > worst_example) {
            worst_example = d;
            worst_name = e.name;
        }
    }
    rep.checks.push_back({"worked_examples", worst_example <= 1e-12,
                          "max |diff| " + fmt("%.3g", worst_example) + " (" + worst_name + ")"});
    return rep;
}

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"gradcheck", "invariants", "oracles"};
    return names;
}

SuiteReport run_suite(std::string_view name, const VerifyOptions& opts) {
    if (name == "gradcheck") return verify_gradcheck(opts);
    if (name == "invariants") return verify_invariants(opts);
    if (name == "oracles") return verify_oracles(opts);
    throw std::invalid_argument("unknown suite '" + std::string(name) + "'");
}

std::string format_report(const SuiteReport& report) {
    std::string s;
    for (const auto& c : report.checks) {
        s += report.suite + "/" + c.name + ": " + (c.pass ? "PASS" : "FAIL") + "  " + c.detail + "\n";
    }
    s += report.suite + ": " + (report.passed() ? "PASS" : "FAIL") + "\n";
    return s;
}

}  // namespace endo
