#include "endo/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <thread>

#include "endo/synthetic.hpp"
#include "json_util.hpp"

namespace endo {

Tokenizer build_tokenizer(std::span<const ManifestRecord> records, std::size_t vocab_size, bool lexicon) {
    std::vector<std::string> texts;
    texts.reserve(records.size());
    for (const auto& r : records) texts.push_back(r.text);
    auto tok = Tokenizer::train(texts, vocab_size);
    if (lexicon) {
        const auto terms = domain_terms();
        tok = tok.with_lexicon(terms);
    }
    return tok;
}

template <typename T>
Dataset<T> load_dataset(std::span<const ManifestRecord> records, const std::filesystem::path& base_dir,
                        const Tokenizer& tokenizer, const EncoderConfig& enc, std::optional<Split> split) {
    Dataset<T> d;
    std::map<std::string, std::size_t> index;
    for (const auto& r : records) {
        if (split && r.split != *split) continue;
        typename Dataset<T>::Item item;
        item.id = r.record_id;
        for (const auto& p : r.image_paths) {
            auto [it, fresh] = index.try_emplace(p, d.images.size());
            if (fresh) d.images.push_back(preprocess<T>(read_png(base_dir / p), enc));
            item.images.push_back(it->second);
        }
        item.text = tokenizer.encode(r.text);
        d.items.push_back(std::move(item));
    }
    return d;
}

template <typename T>
std::vector<GeneratedReport> generate_reports(const Model<T>& model, const Dataset<T>& data, const Tokenizer& tokenizer,
                                              int stage, int max_len, bool want_maps, int threads) {
    std::vector<GeneratedReport> out(data.items.size());
    auto run = [&](std::size_t i) {
        const auto& item = data.items[i];
        std::vector<const ImageTensor<T>*> imgs;
        for (auto idx : item.images) imgs.push_back(&data.images.at(idx));
        const auto ctx = stage == 1 ? caption_context(model, *imgs.at(0)) : findings_context<T>(model, imgs);
        auto& rep = out[i];
        rep.id = item.id;
        rep.reference = tokenizer.decode(item.text);
        rep.result = greedy_generate(ctx, model.params, model.cfg.decoder, max_len, &tokenizer, want_maps);
        rep.generated = rep.result.text;
    };
    const std::size_t workers = std::max(1, threads);
    if (workers == 1 || out.size() < 2) {
        for (std::size_t i = 0; i < out.size(); ++i) run(i);
        return out;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < out.size(); i += workers) run(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

std::string reports_jsonl(std::span<const GeneratedReport> reports) {
    std::string s;
    for (const auto& r : reports) {
        nlohmann::ordered_json j;
        j["id"] = r.id;
        j["generated"] = r.generated;
        j["reference"] = r.reference;
        j["stop"] = std::string(stop_reason_name(r.result.stop_reason));
        s += j.dump() + "\n";
    }
    return s;
}

std::vector<TextPair> read_pairs(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open pairs file " + path.string());
    std::vector<TextPair> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(f, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = detail::json::parse(line);
            out.push_back({j.value("id", std::to_string(n)), j.at("generated").get<std::string>(),
                           j.at("reference").get<std::string>()});
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + " line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

std::string curve_csv(std::span<const CurvePoint> curve) {
    std::string s = "update_index,epoch,lr,loss\n";
    char buf[128];
    for (const auto& p : curve) {
        std::snprintf(buf, sizeof buf, "%ld,%d,%.17g,%.17g\n", p.update, p.epoch, p.lr, p.loss);
        s += buf;
    }
    return s;
}

#define ENDO_INSTANTIATE(T)                                                                                         \
    template Dataset<T> load_dataset(std::span<const ManifestRecord>, const std::filesystem::path&, const Tokenizer&, \
                                     const EncoderConfig&, std::optional<Split>);                                   \
    template std::vector<GeneratedReport> generate_reports(const Model<T>&, const Dataset<T>&, const Tokenizer&, int, \
                                                           int, bool, int);
ENDO_INSTANTIATE(float)
ENDO_INSTANTIATE(double)
#undef ENDO_INSTANTIATE

}  // namespace endo
