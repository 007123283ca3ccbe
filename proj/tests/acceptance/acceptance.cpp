// Runs the acceptance criteria end to end and prints one PASS/FAIL line each.
// Exit status is 0 only when every selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "endo/pipeline.hpp"
#include "endo/rng.hpp"
#include "endo/synthetic.hpp"
#include "endo/verify.hpp"

using namespace endo;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void progress(const std::string& msg) { std::fprintf(stderr, "[acceptance] %s\n", msg.c_str()); }

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

const CheckResult& find_check(const SuiteReport& rep, const std::string& name) {
    for (const auto& c : rep.checks)
        if (c.name == name) return c;
    throw std::logic_error("suite " + rep.suite + " has no check " + name);
}

Outcome from_checks(const SuiteReport& rep, std::initializer_list<const char*> names) {
    Outcome o{true, ""};
    for (const char* n : names) {
        const auto& c = find_check(rep, n);
        o.pass = o.pass && c.pass;
        o.detail += (o.detail.empty() ? "" : "; ") + std::string(n) + ": " + c.detail;
    }
    return o;
}

// ---------------------------------------------------------------- shared corpus

struct Corpus {
    fs::path dir;
    std::vector<ManifestRecord> stage1, stage2;
    Tokenizer tok;
};

Corpus make_corpus(const CorpusConfig& cfg, const fs::path& dir) {
    const auto t0 = Clock::now();
    const auto sum = generate_corpus(cfg, dir);
    Corpus c;
    c.dir = dir;
    c.stage1 = read_manifest(sum.stage1_manifest, 1).records;
    c.stage2 = read_manifest(sum.stage2_manifest, 2).records;
    std::vector<ManifestRecord> texts;
    for (const auto* recs : {&c.stage1, &c.stage2})
        for (const auto& r : *recs)
            if (r.split == Split::train) texts.push_back(r);
    c.tok = build_tokenizer(texts, 512, true);
    progress("corpus " + dir.string() + ": " + std::to_string(sum.images) + " images, " +
             std::to_string(sum.procedures) + " procedures, vocab " + std::to_string(c.tok.vocab_size()) + " (" +
             fmt("%.1f", seconds_since(t0)) + " s)");
    return c;
}

// ---------------------------------------------------------------- 4: overfit

Outcome overfit(const Corpus& corpus) {
    const auto t0 = Clock::now();
    std::vector<ManifestRecord> sub;
    for (const auto& r : corpus.stage1)
        if (r.split == Split::train && sub.size() < 32) sub.push_back(r);
    const auto cfg = ModelConfig::desk(static_cast<int>(corpus.tok.vocab_size()));
    const auto data = load_dataset<float>(sub, corpus.dir, corpus.tok, cfg.encoder);
    auto model = Model<float>::create(cfg, 7);

    StageConfig sc;
    sc.micro_batch = 8;
    sc.accum_steps = 1;
    sc.peak_lr = 1e-3;
    sc.select_best = false;
    sc.seed = 7;
    const long budget = 2000;
    sc.epochs = static_cast<int>(budget * sc.micro_batch / 32);
    TrainState<float> state;
    double ce = 0;
    int exact = 0;
    long done = 0;
    while (done < budget) {
        sc.max_updates = std::min(budget, done + 40);
        done = train_stage<float>(model, data, nullptr, sc, {}, &state).updates;
        ce = evaluate_loss(model, data, 1, sc.max_seq_len);
        exact = 0;
        for (const auto& r : generate_reports(model, data, corpus.tok, 1, 16, false)) exact += r.generated == r.reference;
        if (ce < 0.05 && exact >= 30) break;
    }
    const double t = seconds_since(t0);
    return {ce < 0.05 && exact >= 30 && t < 600,
            "CE " + fmt("%.4f", ce) + ", exact " + std::to_string(exact) + "/32 after " + std::to_string(done) +
                " updates, " + fmt("%.0f", t) + " s"};
}

// ---------------------------------------------------------------- 7 and 9: ablation, grounding

std::vector<std::string> sentences(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (const auto& w : normalize_words(text)) {
        cur += (cur.empty() ? "" : " ") + w;
        if (w.back() == '.') {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// For each generated sentence, the reference sentence it aligns to under an
// LCS alignment of the two sentence sequences, or -1.
std::vector<int> align_sentences(const std::vector<std::string>& gen, const std::vector<std::string>& ref) {
    const std::size_t n = gen.size(), m = ref.size();
    std::vector<std::vector<int>> L(n + 1, std::vector<int>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;)
        for (std::size_t j = m; j-- > 0;)
            L[i][j] = gen[i] == ref[j] ? L[i + 1][j + 1] + 1 : std::max(L[i + 1][j], L[i][j + 1]);
    std::vector<int> out(n, -1);
    std::size_t i = 0, j = 0;
    while (i < n && j < m) {
        if (gen[i] == ref[j]) {
            out[i++] = static_cast<int>(j++);
        } else if (L[i + 1][j] >= L[i][j + 1]) {
            ++i;
        } else {
            ++j;
        }
    }
    return out;
}

struct Grounding {
    int tokens = 0;
    int hits = 0;
    int maps = 0;
    int normalized = 0;

    double hit_rate() const { return tokens ? double(hits) / tokens : 0.0; }
};

// Counts correctly generated finding tokens whose attention mass inside the
// lesion box exceeds twice the box's share of the valid image area.
Grounding measure_grounding(const std::vector<GeneratedReport>& reps, const std::vector<ManifestRecord>& records,
                            const Tokenizer& tok, int stage, int image_size) {
    static const std::set<std::string> finding_words{"polyp", "ulcer", "erosion"};
    std::map<std::string, const ManifestRecord*> by_id;
    for (const auto& r : records) by_id[r.record_id] = &r;
    Grounding g;
    for (const auto& rep : reps) {
        const auto& rec = *by_id.at(rep.id);
        const auto& maps = rep.result.maps;
        for (const auto& m : maps) {
            ++g.maps;
            bool ok = std::abs(m.total() - 1.0) <= 1e-6;
            const std::size_t cells = std::size_t(m.grid()) * m.grid();
            for (std::size_t j = cells * std::size_t(m.n_images); j < m.weights.size(); ++j) ok = ok && m.weights[j] == 0;
            g.normalized += ok;
        }
        const auto ref = sentences(rec.text);
        const auto gen = sentences(rep.generated);
        const auto aligned = stage == 2 ? align_sentences(gen, ref) : std::vector<int>{};
        std::size_t sentence = 0;
        for (std::size_t k = 0; k < rep.result.ids.size(); ++k) {
            const std::string piece = tok.decode(std::vector<int>{rep.result.ids[k]});
            std::string word;
            for (char c : piece)
                if (c != ' ') word += c;
            if (finding_words.count(word)) {
                int image = -1;
                if (stage == 1) {
                    if (rec.text.find(word) != std::string::npos) image = 0;
                } else if (sentence < aligned.size()) {
                    image = aligned[sentence];
                }
                if (image >= 0 && std::size_t(image) < rec.boxes.size() && rec.boxes[std::size_t(image)]) {
                    const auto& box = *rec.boxes[std::size_t(image)];
                    const auto& map = maps.at(k);
                    const double mass = box_attention_mass(map, image, box, image_size);
                    const double frac = double(box.area()) / (double(image_size) * image_size * map.n_images);
                    ++g.tokens;
                    g.hits += mass > 2 * frac;
                }
            }
            if (piece.find('.') != std::string::npos) ++sentence;
        }
    }
    return g;
}

struct AblationPlan {
    long stage1_updates = 600;
    long stage2_updates = 1000;
};

struct SeedResult {
    MetricReport pretrained, fresh;
    std::optional<Grounding> ground_stage1, ground_stage2;
    double seconds = 0;
};

SeedResult ablation_seed(const Corpus& corpus, std::uint64_t seed, const AblationPlan& plan, bool grounding,
                         const fs::path& out) {
    const auto t0 = Clock::now();
    const auto cfg = ModelConfig::desk(static_cast<int>(corpus.tok.vocab_size()));
    const auto s1_train = load_dataset<float>(corpus.stage1, corpus.dir, corpus.tok, cfg.encoder, Split::train);
    const auto s2_train = load_dataset<float>(corpus.stage2, corpus.dir, corpus.tok, cfg.encoder, Split::train);
    const auto s2_test = load_dataset<float>(corpus.stage2, corpus.dir, corpus.tok, cfg.encoder, Split::test);

    StageConfig s1;
    s1.micro_batch = 16;
    s1.accum_steps = 1;
    s1.peak_lr = 1e-3;
    s1.select_best = false;
    s1.seed = seed;
    s1.epochs = 1000;
    s1.max_updates = s1.schedule_updates = plan.stage1_updates;

    StageConfig s2 = StageConfig::stage2_defaults();
    s2.micro_batch = 1;
    s2.accum_steps = 4;
    s2.peak_lr = 1e-3;
    s2.select_best = false;
    s2.seed = seed;
    s2.epochs = 1000;
    s2.max_seq_len = 128;
    s2.max_updates = s2.schedule_updates = plan.stage2_updates;

    SeedResult res;
    fs::create_directories(out);
    auto pretrained = Model<float>::create(cfg, seed);
    train_stage<float>(pretrained, s1_train, nullptr, s1);
    progress("seed " + std::to_string(seed) + ": stage 1 done (" + fmt("%.0f", seconds_since(t0)) + " s)");
    if (grounding) {
        const auto s1_test = load_dataset<float>(corpus.stage1, corpus.dir, corpus.tok, cfg.encoder, Split::test);
        const auto reps = generate_reports(pretrained, s1_test, corpus.tok, 1, 16, true);
        res.ground_stage1 = measure_grounding(reps, corpus.stage1, corpus.tok, 1, cfg.encoder.image_size);
    }

    auto fresh = Model<float>::create(cfg, seed);
    for (int arm = 0; arm < 2; ++arm) {
        auto& model = arm == 0 ? pretrained : fresh;
        const char* name = arm == 0 ? "pretrained" : "fresh";
        train_stage<float>(model, s2_train, nullptr, s2);
        const auto reps = generate_reports(model, s2_test, corpus.tok, 2, 127, grounding && arm == 0);
        write_file_atomic(out / (std::string(name) + "_reports.jsonl"), reports_jsonl(reps));
        std::vector<TextPair> pairs;
        for (const auto& r : reps) pairs.push_back({r.id, r.generated, r.reference});
        (arm == 0 ? res.pretrained : res.fresh) = evaluate_corpus(pairs);
        if (grounding && arm == 0) {
            res.ground_stage2 = measure_grounding(reps, corpus.stage2, corpus.tok, 2, cfg.encoder.image_size);
        }
        progress("seed " + std::to_string(seed) + ": " + name + " ROUGE-L " +
                 fmt("%.4f", (arm == 0 ? res.pretrained : res.fresh).rouge) + " (" + fmt("%.0f", seconds_since(t0)) +
                 " s)");
    }
    write_file_atomic(out / "ablation.csv", ablation_csv(res.pretrained, res.fresh));
    res.seconds = seconds_since(t0);
    return res;
}

// ---------------------------------------------------------------- 10: determinism

std::vector<fs::path> pipeline_run(const fs::path& out) {
    fs::remove_all(out);
    CorpusConfig cc;
    cc.n_patients = 16;
    cc.master_seed = 11;
    const auto corpus = make_corpus(cc, out / "corpus");
    const auto cfg = ModelConfig::desk(static_cast<int>(corpus.tok.vocab_size()));
    const auto hash = corpus.tok.content_hash();

    StageConfig s1;
    s1.epochs = 2;
    s1.micro_batch = 8;
    s1.accum_steps = 2;
    s1.seed = 5;
    StageConfig s2 = StageConfig::stage2_defaults();
    s2.epochs = 1;
    s2.accum_steps = 4;
    s2.seed = 5;
    s2.max_seq_len = 128;

    auto model = Model<float>::create(cfg, 5);
    std::vector<fs::path> files;
    for (int stage = 1; stage <= 2; ++stage) {
        const auto& recs = stage == 1 ? corpus.stage1 : corpus.stage2;
        const auto& sc = stage == 1 ? s1 : s2;
        const auto train = load_dataset<float>(recs, corpus.dir, corpus.tok, cfg.encoder, Split::train);
        const auto val = load_dataset<float>(recs, corpus.dir, corpus.tok, cfg.encoder, Split::val);
        const auto test = load_dataset<float>(recs, corpus.dir, corpus.tok, cfg.encoder, Split::test);
        TrainState<float> state;
        const auto res = train_stage<float>(model, train, &val, sc, {}, &state);
        const auto ckpt = out / ("stage" + std::to_string(stage) + ".ckpt");
        save_checkpoint(ckpt, model, {model.cfg, hash, stage, state.progress, stage_config_to_json(sc)}, &state.adam);
        const auto reports = out / ("stage" + std::to_string(stage) + "_reports.jsonl");
        write_file_atomic(reports, reports_jsonl(generate_reports(model, test, corpus.tok, stage, 127, false, 1)));
        write_file_atomic(out / ("stage" + std::to_string(stage) + "_curve.csv"), curve_csv(res.curve));
        files.insert(files.end(), {ckpt, reports, out / ("stage" + std::to_string(stage) + "_curve.csv")});
    }
    return files;
}

Outcome determinism(const fs::path& work) {
    const auto a = pipeline_run(work / "determinism_a");
    const auto b = pipeline_run(work / "determinism_b");
    std::size_t same = 0, bytes = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto x = slurp(a[i]), y = slurp(b[i]);
        same += !x.empty() && x == y;
        bytes += x.size();
    }
    return {same == a.size(), std::to_string(same) + "/" + std::to_string(a.size()) +
                                  " files byte-identical (checkpoints, reports, curves; " + std::to_string(bytes) +
                                  " bytes)"};
}

// ---------------------------------------------------------------- 11: tokenizer

std::string random_utf8(Rng& rng) {
    std::string s;
    const std::size_t n = rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t cp = 0;
        switch (rng.below(4)) {
            case 0: cp = static_cast<std::uint32_t>(rng.below(0x80)); break;
            case 1: cp = 0x80 + static_cast<std::uint32_t>(rng.below(0x800 - 0x80)); break;
            case 2:
                do cp = 0x800 + static_cast<std::uint32_t>(rng.below(0x10000 - 0x800));
                while (cp >= 0xD800 && cp <= 0xDFFF);
                break;
            default: cp = 0x10000 + static_cast<std::uint32_t>(rng.below(0x110000 - 0x10000)); break;
        }
        if (cp < 0x80) {
            s += static_cast<char>(cp);
        } else if (cp < 0x800) {
            s += static_cast<char>(0xC0 | (cp >> 6));
            s += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
            s += static_cast<char>(0xE0 | (cp >> 12));
            s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            s += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            s += static_cast<char>(0xF0 | (cp >> 18));
            s += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
            s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            s += static_cast<char>(0x80 | (cp & 0x3F));
        }
    }
    return s;
}

Outcome tokenizer_checks(const Corpus& corpus) {
    Rng rng(2024);
    int round_trips = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto s = random_utf8(rng);
        round_trips += corpus.tok.decode(corpus.tok.encode(s)) == s;
    }
    const auto generic = Tokenizer::train(generic_corpus(), 400);
    const auto terms = domain_terms();
    const auto lex = generic.with_lexicon(terms);
    const auto before = generic.encode("polyp").size();
    const auto after = lex.encode("polyp").size();
    const auto in_context = lex.encode("A small polyp was found.");
    bool atomic_in_context = false;
    for (int id : in_context) atomic_in_context = atomic_in_context || lex.token_bytes(id) == " polyp";
    const bool pass = round_trips == 10000 && before > 1 && after == 1 && atomic_in_context &&
                      corpus.tok.encode("polyp").size() == 1;
    return {pass, std::to_string(round_trips) + "/10000 round trips; \"polyp\" " + std::to_string(before) +
                      " tokens generic, " + std::to_string(after) + " with lexicon" +
                      (atomic_in_context ? ", atomic in a sentence" : ", split in a sentence")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    fs::path work = fs::temp_directory_path() / "endo_acceptance";
    std::vector<int> only;
    int seeds = 3;
    AblationPlan plan;
    app.add_option("--work-dir", work, "Scratch directory");
    app.add_option("--only", only, "Criterion numbers to run (default: all)");
    app.add_option("--seeds", seeds, "Ablation seeds")->check(CLI::PositiveNumber);
    app.add_option("--stage1-updates", plan.stage1_updates, "Stage-1 pretraining updates per ablation seed");
    app.add_option("--stage2-updates", plan.stage2_updates, "Stage-2 updates per ablation arm");
    CLI11_PARSE(app, argc, argv);

    auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };
    fs::create_directories(work);
    const auto t_all = Clock::now();
    std::map<int, std::pair<std::string, Outcome>> results;
    auto record = [&](int k, const std::string& name, const std::function<Outcome()>& fn) {
        if (!wanted(k)) return;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        o.detail += " [" + fmt("%.1f", seconds_since(t0)) + " s]";
        std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", k, name.c_str(), o.detail.c_str());
        std::fflush(stdout);
        results[k] = {name, o};
    };

    VerifyOptions vopts;
    std::optional<SuiteReport> invariants;
    auto inv = [&]() -> const SuiteReport& {
        if (!invariants) invariants = verify_invariants(vopts);
        return *invariants;
    };

    record(1, "gradient_check", [&] {
        const auto t0 = Clock::now();
        const auto rep = verify_gradcheck(vopts);
        auto o = from_checks(rep, {"finite_difference"});
        o.pass = o.pass && seconds_since(t0) < 120;
        return o;
    });
    record(2, "masking_invariance", [&] { return from_checks(inv(), {"masking_loss", "masking_greedy"}); });
    record(3, "causality", [&] { return from_checks(inv(), {"causality"}); });

    std::optional<Corpus> corpus;
    auto default_corpus = [&]() -> const Corpus& {
        if (!corpus) corpus = make_corpus(CorpusConfig{}, work / "corpus");
        return *corpus;
    };

    record(4, "overfit", [&] { return overfit(default_corpus()); });
    record(5, "schedule_anchors", [&] { return from_checks(inv(), {"lr_schedule"}); });
    record(6, "accumulation_equivalence", [&] { return from_checks(inv(), {"accumulation_equivalence"}); });

    std::vector<SeedResult> seed_results;
    auto run_seeds = [&](int count) {
        while (static_cast<int>(seed_results.size()) < count) {
            const auto seed = static_cast<std::uint64_t>(seed_results.size() + 1);
            seed_results.push_back(ablation_seed(default_corpus(), seed, plan, seed == 1,
                                                 work / ("ablation_seed" + std::to_string(seed))));
        }
    };
    record(7, "ablation_direction", [&] {
        run_seeds(seeds);
        Outcome o{true, ""};
        double total = 0;
        for (std::size_t i = 0; i < seed_results.size(); ++i) {
            const auto& r = seed_results[i];
            const double gain = relative_change(r.pretrained.rouge, r.fresh.rouge);
            o.pass = o.pass && gain >= 0.10;
            total += r.seconds;
            o.detail += (i ? "; " : "") + std::string("seed ") + std::to_string(i + 1) + " ROUGE-L " +
                        fmt("%.4f", r.pretrained.rouge) + " vs " + fmt("%.4f", r.fresh.rouge) + " (" +
                        fmt("%+.1f%%", 100 * gain) + ")";
        }
        o.pass = o.pass && total <= 3600;
        o.detail += "; " + std::to_string(plan.stage2_updates) + " updates per arm, " + fmt("%.0f", total) + " s total";
        return o;
    });
    record(8, "metric_oracles",
           [&] { return from_checks(verify_oracles(vopts), {"bleu_oracle", "meteor_oracle", "rouge_l_oracle", "worked_examples"}); });
    record(9, "grounding", [&] {
        run_seeds(1);
        const auto& g2 = *seed_results[0].ground_stage2;
        const auto& g1 = *seed_results[0].ground_stage1;
        const double rate = g2.hit_rate();
        const bool normalized = g1.normalized == g1.maps && g2.normalized == g2.maps;
        return Outcome{g2.tokens > 0 && rate >= 0.70 && normalized,
                       "report model: " + std::to_string(g2.hits) + "/" + std::to_string(g2.tokens) + " (" +
                           fmt("%.1f%%", 100 * rate) + ") finding tokens above 2x area share; caption model " +
                           std::to_string(g1.hits) + "/" + std::to_string(g1.tokens) + "; normalized maps " +
                           std::to_string(g1.normalized + g2.normalized) + "/" + std::to_string(g1.maps + g2.maps)};
    });
    record(10, "determinism", [&] { return determinism(work); });
    record(11, "tokenizer", [&] { return tokenizer_checks(default_corpus()); });

    int passed = 0;
    for (const auto& [k, r] : results) passed += r.second.pass;
    std::printf("%d/%zu criteria passed in %.0f s\n", passed, results.size(), seconds_since(t_all));
    return passed == static_cast<int>(results.size()) ? 0 : 1;
}
