#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "endo/pipeline.hpp"
#include "endo/storage.hpp"
#include "endo/synthetic.hpp"
#include "endo/verify.hpp"
#include "json.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace endo;
using cli::RunConfig;
using nlohmann::ordered_json;

namespace {

const auto g_start = std::chrono::steady_clock::now();

void log(const std::string& msg) {
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - g_start).count();
    std::fprintf(stderr, "[endoreport %8.1fs] %s\n", t, msg.c_str());
}

struct Common {
    std::optional<fs::path> config;
    std::optional<std::uint64_t> seed;
    fs::path out;
    int threads = 1;
    std::string dtype = "f32";
};

void add_common(CLI::App* app, Common& c, bool out_required = true) {
    app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "Seed override");
    auto* out = app->add_option("--out", c.out, "Output directory");
    if (out_required) out->required();
    app->add_option("--threads", c.threads, "Worker threads (generation only)")->check(CLI::PositiveNumber);
    app->add_option("--dtype", c.dtype, "Compute precision")->check(CLI::IsMember({"f32", "f64"}));
}

void write_text(const fs::path& path, const std::string& text) { write_file_atomic(path, text); }

void echo_config(const fs::path& out, const RunConfig& cfg, const ordered_json& run) {
    fs::create_directories(out);
    write_text(out / "effective_config.json", cli::run_config_json(cfg, run.dump()));
}

// ---------------------------------------------------------------- synth

int cmd_synth(const Common& c) {
    auto cfg = cli::load_run_config(c.config);
    if (c.seed) cfg.corpus.master_seed = *c.seed;
    cfg.corpus.validate();
    log("rendering corpus into " + c.out.string());
    const auto sum = generate_corpus(cfg.corpus, c.out);
    echo_config(c.out, cfg, {{"command", "synth"}});
    std::ostringstream s;
    s << "patients " << sum.patients << ", procedures " << sum.procedures << ", images " << sum.images
      << "; train/val/test procedures " << sum.procedures_per_split[0] << "/" << sum.procedures_per_split[1] << "/"
      << sum.procedures_per_split[2];
    log(s.str());
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    int stage = 1;
    fs::path data;
    std::optional<fs::path> manifest;
    std::string init = "fresh";
    std::optional<fs::path> resume;
    std::optional<fs::path> tokenizer;
};

// Run directories keep tokenizer.txt at the top, next to final.ckpt and above checkpoints/.
fs::path run_tokenizer(const fs::path& ckpt) {
    for (const auto& dir : {ckpt.parent_path(), ckpt.parent_path().parent_path()})
        if (fs::exists(dir / "tokenizer.txt")) return dir / "tokenizer.txt";
    throw std::runtime_error("no tokenizer.txt next to " + ckpt.string() + "; pass --tokenizer");
}

fs::path manifest_path(const fs::path& data, const std::optional<fs::path>& manifest, int stage) {
    return manifest ? *manifest : data / ("stage" + std::to_string(stage) + ".jsonl");
}

std::vector<CurvePoint> read_curve(const fs::path& path, long keep_below) {
    std::vector<CurvePoint> out;
    std::ifstream f(path);
    if (!f) return out;
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
        CurvePoint p;
        if (std::sscanf(line.c_str(), "%ld,%d,%lf,%lf", &p.update, &p.epoch, &p.lr, &p.loss) == 4 &&
            p.update < keep_below)
            out.push_back(p);
    }
    return out;
}

std::string epochs_csv(const std::vector<EpochSummary>& epochs) {
    std::string s = "epoch,train_loss,val_loss,best\n";
    char buf[128];
    for (const auto& e : epochs) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d\n", e.epoch, e.train_loss, e.val_loss, e.best ? 1 : 0);
        s += buf;
    }
    return s;
}

template <typename T>
int run_train(const Common& c, const TrainArgs& a) {
    auto cfg = cli::load_run_config(c.config);
    auto& sc = cfg.stage(a.stage);
    if (c.seed) sc.seed = *c.seed;

    const auto mpath = manifest_path(a.data, a.manifest, a.stage);
    const auto report = read_manifest(mpath, a.stage);
    const auto base = mpath.parent_path();
    if (!report.excluded_ids.empty()) log(std::to_string(report.excluded_ids.size()) + " records over the image limit excluded");
    const auto violations = validate_splits(report.records);
    if (!violations.empty()) throw std::runtime_error(violations[0].kind + " '" + violations[0].id + "' appears in several splits");

    // Tokenizer: explicit file, else the one stored next to the init checkpoint, else trained here.
    std::optional<fs::path> tok_path = a.tokenizer;
    if (!tok_path && a.init != "fresh") tok_path = run_tokenizer(a.init);
    if (!tok_path && a.resume) tok_path = run_tokenizer(*a.resume);
    Tokenizer tok;
    if (tok_path) {
        tok = Tokenizer::load(*tok_path);
        log("tokenizer " + tok_path->string() + " (" + std::to_string(tok.vocab_size()) + " entries)");
    } else {
        // Train texts from both stages when the sibling manifest exists, so one
        // tokenizer serves the whole two-stage run.
        std::vector<ManifestRecord> texts;
        for (int s : {1, 2}) {
            const auto p = s == a.stage ? mpath : base / ("stage" + std::to_string(s) + ".jsonl");
            if (s != a.stage && (a.manifest || !fs::exists(p))) continue;
            const auto recs = s == a.stage ? report.records : read_manifest(p, s, false).records;
            for (const auto& r : recs)
                if (r.split == Split::train) texts.push_back(r);
        }
        tok = build_tokenizer(texts, static_cast<std::size_t>(cfg.tokenizer.vocab_size), cfg.tokenizer.lexicon);
        log("trained tokenizer with " + std::to_string(tok.vocab_size()) + " entries");
    }
    const auto tok_hash = tok.content_hash();

    fs::create_directories(c.out / "checkpoints");
    tok.save(c.out / "tokenizer.txt");

    Model<T> model;
    TrainState<T> state;
    std::optional<ParamStore<T>> best;
    TrainState<T>* resume = nullptr;
    if (a.resume) {
        auto ck = load_checkpoint<T>(*a.resume, &tok_hash);
        if (ck.info.stage != a.stage) throw std::runtime_error("resume checkpoint is from stage " + std::to_string(ck.info.stage));
        if (!ck.adam) throw std::runtime_error("resume checkpoint carries no optimizer state");
        model = std::move(ck.model);
        state.adam = std::move(*ck.adam);
        state.progress = ck.info.progress;
        if (!ck.info.stage_config.empty()) sc = stage_config_from_json(ck.info.stage_config, sc);
        if (state.progress.best_epoch >= 0) {
            // The epoch checkpoint of the best epoch holds exactly the parameters best.ckpt had at that point.
            char name[32];
            std::snprintf(name, sizeof name, "epoch_%03d.ckpt", state.progress.best_epoch);
            best = load_checkpoint<T>(a.resume->parent_path() / name, &tok_hash).model.params;
        }
        resume = &state;
        log("resuming after epoch " + std::to_string(state.progress.epochs_done));
    } else if (a.init == "fresh") {
        auto mcfg = cfg.model;
        mcfg.decoder.vocab_size = static_cast<int>(tok.vocab_size());
        mcfg.validate();
        model = Model<T>::create(mcfg, sc.seed);
    } else {
        auto ck = load_checkpoint<T>(a.init, &tok_hash);
        model = std::move(ck.model);
        log("initialized from " + a.init + " (stage " + std::to_string(ck.info.stage) + ")");
    }
    cfg.model = model.cfg;
    sc.max_seq_len = std::min(sc.max_seq_len, model.cfg.decoder.max_seq_len);

    ordered_json run = {{"command", "train"}, {"stage", a.stage}, {"manifest", mpath.string()}, {"init", a.init},
                        {"dtype", c.dtype}, {"tokenizer_hash", tok_hash}};
    if (a.resume) run["resume"] = a.resume->string();
    echo_config(c.out, cfg, run);

    const auto train = load_dataset<T>(report.records, base, tok, model.cfg.encoder, Split::train);
    const auto val = load_dataset<T>(report.records, base, tok, model.cfg.encoder, Split::val);
    if (train.items.empty()) throw std::runtime_error("no training records in " + mpath.string());
    log(std::to_string(train.items.size()) + " train / " + std::to_string(val.items.size()) + " val records");

    std::vector<CurvePoint> curve = read_curve(c.out / "curve.csv", resume ? state.progress.updates_done : 0);
    std::vector<EpochSummary> epochs;
    CheckpointInfo info{model.cfg, tok_hash, a.stage, {}, stage_config_to_json(sc)};
    TrainHooks<T> hooks;
    hooks.on_update = [&](const CurvePoint& p) { curve.push_back(p); };
    hooks.on_epoch = [&](const EpochSummary& e, const Model<T>& m, const TrainState<T>& st) {
        epochs.push_back(e);
        info.progress = st.progress;
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%03d.ckpt", e.epoch);
        save_checkpoint(c.out / "checkpoints" / name, m, info, &st.adam);
        if (e.best) {
            save_checkpoint(c.out / "checkpoints" / "best.ckpt", m, info, &st.adam);
            write_text(c.out / "best.txt", std::string("epoch ") + std::to_string(e.epoch) + "\n");
        }
        write_text(c.out / "curve.csv", curve_csv(curve));
        char buf[160];
        std::snprintf(buf, sizeof buf, "epoch %d train %.5f val %.5f%s", e.epoch, e.train_loss, e.val_loss,
                      e.best ? " (best)" : "");
        log(buf);
    };
    const auto result = train_stage<T>(model, train, val.items.empty() ? nullptr : &val, sc, hooks, resume,
                                       best ? &*best : nullptr);
    info.progress.updates_done = result.updates;
    save_checkpoint(c.out / "final.ckpt", model, info);
    write_text(c.out / "curve.csv", curve_csv(curve));
    if (!epochs.empty()) write_text(c.out / "epochs.csv", epochs_csv(epochs));
    log("done: " + std::to_string(result.updates) + " updates, best epoch " + std::to_string(result.best_epoch));
    return 0;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    fs::path ckpt;
    fs::path manifest;
    std::optional<fs::path> tokenizer;
    std::optional<int> stage;
    std::string split = "all";
    bool attn = false;
    std::optional<int> max_len;
};

template <typename T>
int run_generate(const Common& c, const GenerateArgs& a) {
    auto cfg = cli::load_run_config(c.config);
    const auto tok_path = a.tokenizer ? *a.tokenizer : run_tokenizer(a.ckpt);
    const auto tok = Tokenizer::load(tok_path);
    const auto hash = tok.content_hash();
    const auto ck = load_checkpoint<T>(a.ckpt, &hash);
    const int stage = a.stage.value_or(ck.info.stage);
    const auto report = read_manifest(a.manifest, stage);
    std::optional<Split> split;
    if (a.split != "all") split = parse_split(a.split);
    const auto data = load_dataset<T>(report.records, a.manifest.parent_path(), tok, ck.model.cfg.encoder, split);
    if (data.items.empty()) throw std::runtime_error("no records selected from " + a.manifest.string());
    const int max_len = std::min(a.max_len.value_or(cfg.generate.max_len), ck.model.cfg.decoder.max_seq_len);

    ordered_json run = {{"command", "generate"}, {"checkpoint", a.ckpt.string()}, {"manifest", a.manifest.string()},
                        {"stage", stage}, {"split", a.split}, {"max_len", max_len}, {"attn", a.attn},
                        {"dtype", c.dtype}};
    cfg.model = ck.model.cfg;
    echo_config(c.out, cfg, run);
    log("generating " + std::to_string(data.items.size()) + " reports");
    const auto reports = generate_reports(ck.model, data, tok, stage, max_len, a.attn, c.threads);
    write_text(c.out / "reports.jsonl", reports_jsonl(reports));
    if (a.attn) {
        std::size_t files = 0;
        for (std::size_t i = 0; i < reports.size(); ++i) {
            std::vector<Raster> bases;
            for (auto idx : data.items[i].images) bases.push_back(to_raster(data.images[idx]));
            const auto dir = c.out / "attention" / reports[i].id;
            fs::create_directories(dir);
            for (const auto& m : reports[i].result.maps) {
                render_heatmap(m, bases, dir);
                ++files;
            }
        }
        log("wrote " + std::to_string(files) + " heatmaps");
    }
    return 0;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const Common& c, const fs::path& pairs, const std::optional<fs::path>& baseline) {
    const auto cfg = cli::load_run_config(c.config);
    ordered_json run{{"command", "evaluate"}, {"pairs", pairs.string()}};
    if (baseline) run["baseline"] = baseline->string();
    echo_config(c.out, cfg, run);
    const auto a = evaluate_corpus(read_pairs(pairs));
    write_text(c.out / "metrics.csv", metric_csv(a));
    write_text(c.out / "metrics.txt", metric_table(a));
    std::cerr << metric_table(a);
    if (baseline) {
        const auto b = evaluate_corpus(read_pairs(*baseline));
        write_text(c.out / "baseline_metrics.csv", metric_csv(b));
        write_text(c.out / "ablation.csv", ablation_csv(a, b));
        // Both files are usually reports.jsonl; their run directories tell them apart.
        const bool same = pairs.stem() == baseline->stem();
        const auto label = [&](const fs::path& f) {
            return (same ? fs::absolute(f).parent_path().filename() : f.stem()).string();
        };
        const auto table = ablation_table(a, b, label(pairs), label(*baseline));
        write_text(c.out / "ablation.txt", table);
        std::cerr << table;
    }
    return 0;
}

// ---------------------------------------------------------------- verify

int cmd_verify(const Common& c, const std::string& suite, bool fault) {
    const auto cfg = cli::load_run_config(c.config);
    VerifyOptions opts;
    opts.seed = c.seed.value_or(0);
    opts.inject_fault = fault;
    std::vector<std::string> suites = suite == "all" ? suite_names() : std::vector<std::string>{suite};
    std::string text;
    bool ok = true;
    for (const auto& s : suites) {
        log("running suite " + s);
        const auto rep = run_suite(s, opts);
        text += format_report(rep);
        ok = ok && rep.passed();
    }
    std::cout << text;
    if (!c.out.empty()) {
        echo_config(c.out, cfg, {{"command", "verify"}, {"suite", suite}, {"seed", opts.seed}, {"inject_fault", fault}});
        write_text(c.out / "verify_report.txt", text);
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage endoscopy report generator on a synthetic corpus"};
    app.require_subcommand(1);

    Common synth_c, train_c, gen_c, eval_c, verify_c;
    auto* synth = app.add_subcommand("synth", "Render the synthetic corpus and its manifests");
    add_common(synth, synth_c);

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train stage 1 (captions) or stage 2 (findings)");
    add_common(train, train_c);
    train->add_option("--stage", ta.stage, "1 or 2")->required()->check(CLI::IsMember({1, 2}));
    train->add_option("--data", ta.data, "Corpus directory holding stage1.jsonl / stage2.jsonl");
    train->add_option("--manifest", ta.manifest, "Manifest path (overrides --data)");
    train->add_option("--init", ta.init, "'fresh' or a checkpoint to start from");
    train->add_option("--resume", ta.resume, "Epoch checkpoint to continue from")->check(CLI::ExistingFile);
    train->add_option("--tokenizer", ta.tokenizer, "Tokenizer file")->check(CLI::ExistingFile);

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "Greedy report generation");
    add_common(gen, gen_c);
    gen->add_option("--ckpt", ga.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    gen->add_option("--manifest", ga.manifest, "Manifest")->required()->check(CLI::ExistingFile);
    gen->add_option("--tokenizer", ga.tokenizer, "Tokenizer file (default: the checkpoint's run directory)");
    gen->add_option("--stage", ga.stage, "Manifest stage (default: the checkpoint's)")->check(CLI::IsMember({1, 2}));
    gen->add_option("--split", ga.split, "train, val, test or all")->check(CLI::IsMember({"train", "val", "test", "all"}));
    gen->add_flag("--attn", ga.attn, "Write per-token attention heatmaps");
    gen->add_option("--max-len", ga.max_len, "Maximum generated tokens")->check(CLI::PositiveNumber);

    fs::path pairs;
    std::optional<fs::path> baseline;
    auto* eval = app.add_subcommand("evaluate", "BLEU-1..4, METEOR and ROUGE-L over a reports file");
    add_common(eval, eval_c);
    eval->add_option("--pairs", pairs, "Reports JSONL with generated/reference")->required();
    eval->add_option("--baseline", baseline, "Second reports file; writes (a - b) / b per metric");

    std::string suite = "all";
    bool fault = false;
    auto* verify = app.add_subcommand("verify", "Run the built-in property suites");
    add_common(verify, verify_c, false);
    verify->add_option("--suite", suite, "gradcheck, invariants, oracles or all")
        ->check(CLI::IsMember({"gradcheck", "invariants", "oracles", "all"}));
    verify->add_flag("--inject-fault", fault, "Break one check per suite (harness self-test)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*synth) return cmd_synth(synth_c);
        if (*train) {
            if (ta.data.empty() && !ta.manifest) throw CLI::ValidationError("train: --data or --manifest is required");
            if (ta.resume && ta.init != "fresh") throw CLI::ValidationError("train: --resume and --init are exclusive");
            return train_c.dtype == "f64" ? run_train<double>(train_c, ta) : run_train<float>(train_c, ta);
        }
        if (*gen) return gen_c.dtype == "f64" ? run_generate<double>(gen_c, ga) : run_generate<float>(gen_c, ga);
        if (*eval) return cmd_evaluate(eval_c, pairs, baseline);
        if (*verify) return cmd_verify(verify_c, suite, fault);
    } catch (const CLI::Error& e) {
        log(std::string("usage error: ") + e.what());
        return 2;
    } catch (const cli::ConfigError& e) {
        log(std::string("config error: ") + e.what());
        return 2;
    } catch (const std::exception& e) {
        log(std::string("error: ") + e.what());
        return 1;
    }
    return 2;
}
