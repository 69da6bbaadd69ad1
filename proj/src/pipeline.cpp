#include "conceptscope/pipeline.hpp"

#include "conceptscope/interventions.hpp"
#include "conceptscope/patching.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

namespace conceptscope {

namespace fs = std::filesystem;
using acceptance::Check;

std::uint64_t PipelineConfig::data_seed() const { return substream_seed(seed, "data"); }
std::uint64_t PipelineConfig::train_seed() const { return substream_seed(seed, "train"); }
std::uint64_t PipelineConfig::analysis_seed() const { return substream_seed(seed, "analysis"); }

nlohmann::json to_json(const PipelineConfig & c) {
    return {{"seed", c.seed},
            {"workers", c.workers},
            {"model",
             {{"n_layers", c.model.n_layers},
              {"n_heads", c.model.n_heads},
              {"d_model", c.model.d_model},
              {"max_context", c.model.max_context},
              {"rope_base", c.model.rope_base}}},
            {"train", to_json(c.train)},
            {"data",
             {{"shots", c.data.shots},
              {"prompts", c.data.prompts},
              {"ambiguous_shots", c.data.ambiguous_shots},
              {"ambiguous_prompts", c.data.ambiguous_prompts},
              {"dev_prompts", c.data.dev_prompts},
              {"shot_sweep", c.data.shot_sweep},
              {"letter_string_prompts", c.data.letter_string_prompts},
              {"letter_cv_prompts", c.data.letter_cv_prompts}}},
            {"analysis",
             {{"fv_heads", c.analysis.fv_heads},
              {"cv_heads", c.analysis.cv_heads},
              {"fv_scale", c.analysis.fv_scale},
              {"cv_scale", c.analysis.cv_scale},
              {"fv_layer", c.analysis.fv_layer},
              {"sweep_scales", c.analysis.sweep_scales},
              {"min_group", c.analysis.min_group}}}};
}

PipelineConfig pipeline_config_from_json(const nlohmann::json & j) {
    PipelineConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        c.workers = j.value("workers", c.workers);
        if (j.contains("model")) {
            const auto & m = j.at("model");
            c.model.n_layers = m.value("n_layers", c.model.n_layers);
            c.model.n_heads = m.value("n_heads", c.model.n_heads);
            c.model.d_model = m.value("d_model", c.model.d_model);
            c.model.max_context = m.value("max_context", c.model.max_context);
            c.model.rope_base = m.value("rope_base", c.model.rope_base);
        }
        if (j.contains("train")) {
            c.train = train_config_from_json(j.at("train"));
        }
        if (j.contains("data")) {
            const auto & d = j.at("data");
            c.data.shots = d.value("shots", c.data.shots);
            c.data.prompts = d.value("prompts", c.data.prompts);
            c.data.ambiguous_shots = d.value("ambiguous_shots", c.data.ambiguous_shots);
            c.data.ambiguous_prompts = d.value("ambiguous_prompts", c.data.ambiguous_prompts);
            c.data.dev_prompts = d.value("dev_prompts", c.data.dev_prompts);
            c.data.shot_sweep = d.value("shot_sweep", c.data.shot_sweep);
            c.data.letter_string_prompts = d.value("letter_string_prompts", c.data.letter_string_prompts);
            c.data.letter_cv_prompts = d.value("letter_cv_prompts", c.data.letter_cv_prompts);
        }
        if (j.contains("analysis")) {
            const auto & a = j.at("analysis");
            c.analysis.fv_heads = a.value("fv_heads", c.analysis.fv_heads);
            c.analysis.cv_heads = a.value("cv_heads", c.analysis.cv_heads);
            c.analysis.fv_scale = a.value("fv_scale", c.analysis.fv_scale);
            c.analysis.cv_scale = a.value("cv_scale", c.analysis.cv_scale);
            c.analysis.fv_layer = a.value("fv_layer", c.analysis.fv_layer);
            c.analysis.sweep_scales = a.value("sweep_scales", c.analysis.sweep_scales);
            c.analysis.min_group = a.value("min_group", c.analysis.min_group);
        }
    } catch (const nlohmann::json::exception & e) {
        throw PipelineError(std::string("invalid config: ") + e.what());
    }
    if (c.data.shot_sweep.empty() || std::find(c.data.shot_sweep.begin(), c.data.shot_sweep.end(), 1) ==
                                         c.data.shot_sweep.end()) {
        throw PipelineError("invalid config: data.shot_sweep must include 1");
    }
    if (std::find(c.data.shot_sweep.begin(), c.data.shot_sweep.end(), c.data.shots) == c.data.shot_sweep.end()) {
        throw PipelineError("invalid config: data.shot_sweep must include data.shots");
    }
    if (c.data.letter_cv_prompts > c.data.letter_string_prompts) {
        throw PipelineError("invalid config: letter_cv_prompts exceeds letter_string_prompts");
    }
    if (std::find(c.analysis.sweep_scales.begin(), c.analysis.sweep_scales.end(), c.analysis.cv_scale) ==
        c.analysis.sweep_scales.end()) {
        throw PipelineError("invalid config: analysis.cv_scale must be one of analysis.sweep_scales");
    }
    if (c.workers < 1) {
        throw PipelineError("invalid config: workers must be >= 1");
    }
    return c;
}

PipelineConfig load_pipeline_config(const std::string & path) {
    std::ifstream f(path);
    if (!f) {
        throw PipelineError("cannot open config " + path);
    }
    try {
        return pipeline_config_from_json(nlohmann::json::parse(f));
    } catch (const nlohmann::json::parse_error & e) {
        throw PipelineError("config " + path + " is not valid JSON: " + e.what());
    }
}

fs::path RunPaths::dataset(const std::string & name, std::size_t shots) const {
    return data() / "shots" / (name + "_" + std::to_string(shots) + ".jsonl");
}

nlohmann::json read_stage_json(const fs::path & path, const std::string & producer) {
    std::ifstream f(path);
    if (!f) {
        throw PipelineError("missing " + path.string() + "; run `conceptscope " + producer + "` first");
    }
    return nlohmann::json::parse(f);
}

double chi_square_sf(double x, double dof) {
    if (x <= 0.0) {
        return 1.0;
    }
    return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

namespace {

void write_json(const fs::path & path, const nlohmann::json & j) {
    std::ofstream f(path);
    if (!f) {
        throw PipelineError("cannot write " + path.string());
    }
    f << j.dump(2) << '\n';
}

std::vector<Check> finish(const fs::path & path, std::vector<Check> checks) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto & c : checks) {
        a.push_back(acceptance::to_json(c));
        std::cerr << acceptance::format_line(c) << '\n';
    }
    write_json(path, a);
    return checks;
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::uint64_t world_seed_of(const PipelineConfig & c) {
    return substream_seed(c.data_seed(), "world");
}

std::vector<PromptInstance> load_prompts(const fs::path & path) {
    if (!fs::exists(path)) {
        throw PipelineError("missing " + path.string() + "; run `conceptscope gen` first");
    }
    return read_jsonl(path.string());
}

// Training config fields that determine the checkpoint.
nlohmann::json checkpoint_identity(const PipelineConfig & c) {
    const auto j = to_json(c);
    return {{"seed", c.seed}, {"model", j.at("model")}, {"train", j.at("train")}};
}

} // namespace

// --- gen ---------------------------------------------------------------------

std::vector<Check> generator_checks(std::uint64_t seed) {
    std::vector<Check> checks;
    const World world = build_world(substream_seed(seed, "world"));
    Rng rng = make_rng(seed, "oracle");

    // Independent oracle: drop positional dots; the answer is the indicator's
    // neighbour in the remaining sequence.
    std::size_t agree = 0;
    const auto letters = std::vector<std::string>(lists::letters().begin(), lists::letters().begin() + 4);
    const auto words = world.content_words(Language::EN);
    for (std::size_t i = 0; i < acceptance::kAbstractOracleLines; ++i) {
        const Direction d = uniform_index(rng, 2) == 0 ? Direction::Previous : Direction::Next;
        const auto & cls = uniform_index(rng, 2) == 0 ? letters : words;
        const AbstractLine line = make_abstract_line(d, cls, 3, 3, rng);
        std::vector<std::string> kept;
        for (const auto & e : line.elements) {
            if (e != ".") {
                kept.push_back(e);
            }
        }
        const auto star = std::find(kept.begin(), kept.end(), "*") - kept.begin();
        const auto at = d == Direction::Next ? star + 1 : star - 1;
        if (at >= 0 && at < static_cast<std::ptrdiff_t>(kept.size()) &&
            kept[static_cast<std::size_t>(at)] == line.answer) {
            ++agree;
        }
    }
    const bool oracle_ok = agree == acceptance::kAbstractOracleLines;

    const auto canonical = permuted_alphabet(0, AlphabetKind::Latin, seed);
    const auto ls = gen_letter_string(0, AlphabetKind::Latin, 5, seed);
    const bool canonical_ok =
        canonical == lists::letters() &&
        std::all_of(ls.begin(), ls.end(), [](const PromptInstance & p) { return p.preamble == lists::letters(); });

    const Lexicon & lx = world.lexicon("antonym_en");
    const auto open = gen_verbal_prompts(lx, kDefaultShots, acceptance::kChiSquareItems, Split::Test,
                                         substream_seed(seed, "chi"));
    std::vector<double> counts(kMcOptions, 0.0);
    for (std::size_t i = 0; i < open.size(); ++i) {
        const auto mc = to_multiple_choice(open[i], lx, Split::Test, kMcOptions,
                                           substream_seed(seed, "chi/" + std::to_string(i)));
        const auto pos = std::find(option_labels().begin(), option_labels().end(), mc.target) - option_labels().begin();
        counts[static_cast<std::size_t>(pos)] += 1.0;
    }
    const double expected = static_cast<double>(acceptance::kChiSquareItems) / kMcOptions;
    double chi2 = 0.0;
    for (double o : counts) {
        chi2 += (o - expected) * (o - expected) / expected;
    }
    const double p = chi_square_sf(chi2, static_cast<double>(kMcOptions - 1));

    checks.push_back({10, "generators", oracle_ok && canonical_ok && p > acceptance::kChiSquareAlpha,
                      "abstract oracle " + std::to_string(agree) + "/" +
                          std::to_string(acceptance::kAbstractOracleLines) + ", canonical alphabet " +
                          (canonical_ok ? "yes" : "no") + ", MC position chi2=" + num(chi2) + " p=" + num(p) +
                          " (need > " + num(acceptance::kChiSquareAlpha) + ")"});
    return checks;
}

std::vector<Check> run_gen(const PipelineConfig & c, const RunPaths & out) {
    fs::create_directories(out.data() / "shots");
    fs::create_directories(out.data() / "corrupted");
    const std::uint64_t seed = c.data_seed();
    const World world = build_world(world_seed_of(c));
    const Vocabulary vocab = Vocabulary::build(world);

    nlohmann::json manifest = {{"world_seed", world.seed}, {"vocab_size", vocab.size()}, {"datasets", nlohmann::json::object()}};
    for (const auto & spec : dataset_table()) {
        for (std::size_t k : c.data.shot_sweep) {
            if (k != c.data.shots && !spec.verbal) {
                continue;
            }
            const Dataset ds = build_dataset(world, vocab, spec.name, k, c.data.prompts, seed);
            write_jsonl((k == c.data.shots ? out.dataset(spec.name) : out.dataset(spec.name, k)).string(), ds.prompts);
            if (k == c.data.shots) {
                manifest["datasets"][spec.name] = ds.prompts.size();
                if (spec.verbal) {
                    write_jsonl((out.data() / "corrupted" / (spec.name + ".jsonl")).string(),
                                corrupt_dataset(ds.prompts, world, vocab, substream_seed(seed, "corrupt/" + spec.name)));
                }
            }
        }
    }

    const Lexicon & a = world.lexicon("antonym_en");
    const Lexicon & b = world.lexicon("translation_en_fr");
    auto amb_test = gen_ambiguous_icl(a, b, c.data.ambiguous_shots, c.data.ambiguous_prompts, Split::Test,
                                      substream_seed(seed, "ambiguous/test"));
    auto amb_dev = gen_ambiguous_icl(a, b, c.data.ambiguous_shots, c.data.dev_prompts, Split::Train,
                                     substream_seed(seed, "ambiguous/dev"));
    attach_rendering(amb_test, vocab);
    attach_rendering(amb_dev, vocab);
    write_jsonl((out.data() / "ambiguous_test.jsonl").string(), amb_test);
    write_jsonl((out.data() / "ambiguous_dev.jsonl").string(), amb_dev);

    for (const auto & s : letter_string_settings()) {
        auto ls = gen_letter_string(s.n_perm, s.kind, c.data.letter_string_prompts,
                                    substream_seed(seed, "letter/" + s.label));
        attach_rendering(ls, vocab);
        write_jsonl((out.data() / ("letter_string_" + s.label + ".jsonl")).string(), ls);
    }

    TrainConfig mix = c.train;
    Rng rng = make_rng(seed, "identity");
    std::vector<PromptInstance> identity;
    for (std::size_t i = 0; i < acceptance::kDecompositionPrompts; ++i) {
        identity.push_back(sample_training_prompt(world, mix, rng));
    }
    attach_rendering(identity, vocab);
    write_jsonl((out.data() / "identity_prompts.jsonl").string(), identity);

    write_json(out.data() / "manifest.json", manifest);
    return finish(out.root / "gen_checks.json", generator_checks(seed));
}

// --- train -------------------------------------------------------------------

std::vector<Check> run_train(const PipelineConfig & c, const RunPaths & out) {
    fs::create_directories(out.root);
    const World world = build_world(world_seed_of(c));
    const Vocabulary vocab = Vocabulary::build(world);
    const nlohmann::json identity = checkpoint_identity(c);

    double minutes = 0.0;
    bool reused = false;
    Transformer model;
    if (fs::exists(out.checkpoint())) {
        const auto header = read_checkpoint_header(out.checkpoint().string());
        const auto extra = header.value("extra", nlohmann::json::object());
        if (extra.value("identity", nlohmann::json()) == identity) {
            LoadedModel lm = load_model(out.checkpoint().string());
            model = std::move(lm.model);
            minutes = extra.value("train_minutes", 0.0);
            reused = true;
            std::cerr << "[train] reusing checkpoint " << out.checkpoint() << " (config unchanged)\n";
        }
    }
    if (!reused) {
        ModelConfig mc = c.model;
        mc.seed = c.train_seed();
        mc.world_seed = world.seed;
        model = Transformer::initialize(mc, vocab);
        std::cerr << "[train] " << model.params().numel() << " parameters, " << c.train.steps << " steps\n";
        // Small fixed probes of the gate datasets for the loss curve.
        std::vector<std::pair<std::string, std::vector<PromptInstance>>> probes;
        for (const char * name : {"antonym_en", "translation_en_fr", "categorical_en", "antonym_mc",
                                  "translation_en_fr_mc", "categorical_mc"}) {
            auto ps = load_prompts(out.dataset(name));
            ps.resize(std::min<std::size_t>(ps.size(), 20));
            probes.emplace_back(name, std::move(ps));
        }
        const auto t0 = std::chrono::steady_clock::now();
        const auto log = train(model, world, vocab, c.train, c.train_seed(), [&](TrainLogRow & r) {
            for (const auto & [name, ps] : probes) {
                r.eval.emplace_back(name, evaluate_accuracy(model, vocab, ps));
            }
            const double el = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::cerr << "[train] step " << r.step << " loss " << num(r.loss) << " lr " << num(r.lr) << " antonym_en "
                      << num(r.eval[0].second) << " antonym_mc " << num(r.eval[3].second) << " ("
                      << static_cast<int>(el) << "s)\n";
        });
        minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
        write_loss_csv((out.root / "train_loss.csv").string(), log);
        save_model(out.checkpoint().string(), model, vocab, {{"identity", identity}, {"train_minutes", minutes}});
    }

    nlohmann::json acc = nlohmann::json::object();
    for (const auto & spec : dataset_table()) {
        acc[spec.name] = evaluate_accuracy(model, vocab, load_prompts(out.dataset(spec.name)));
    }
    nlohmann::json shot_acc = nlohmann::json::object();
    for (const auto & name : verbal_dataset_names()) {
        for (std::size_t k : c.data.shot_sweep) {
            const auto path = k == c.data.shots ? out.dataset(name) : out.dataset(name, k);
            shot_acc[name][std::to_string(k)] = evaluate_accuracy(model, vocab, load_prompts(path));
        }
    }
    write_json(out.root / "train_summary.json",
               {{"minutes", minutes}, {"reused_checkpoint", reused}, {"accuracy", acc}, {"shot_accuracy", shot_acc}});

    const auto a = [&](const char * n) { return acc.at(n).get<double>(); };
    const bool open_ok = a("antonym_en") >= acceptance::kOpenAccuracy &&
                         a("translation_en_fr") >= acceptance::kOpenAccuracy &&
                         a("categorical_en") >= acceptance::kOpenAccuracy;
    const bool mc_ok = a("antonym_mc") >= acceptance::kMcAccuracy && a("translation_en_fr_mc") >= acceptance::kMcAccuracy &&
                       a("categorical_mc") >= acceptance::kMcAccuracy;
    const bool time_ok = minutes < acceptance::kTrainMinutes;
    std::vector<Check> checks;
    checks.push_back({4, "training gate", open_ok && mc_ok && time_ok,
                      "antonym_en=" + num(a("antonym_en")) + " translation_en_fr=" + num(a("translation_en_fr")) +
                          " categorical_en=" + num(a("categorical_en")) + " (need >= " + num(acceptance::kOpenAccuracy) +
                          "); antonym_mc=" + num(a("antonym_mc")) + " translation_en_fr_mc=" +
                          num(a("translation_en_fr_mc")) + " categorical_mc=" + num(a("categorical_mc")) +
                          " (need >= " + num(acceptance::kMcAccuracy) + "); train " + num(minutes) + " min (need < " +
                          num(acceptance::kTrainMinutes) + ")"});
    return finish(out.root / "train_checks.json", std::move(checks));
}

// --- timings -------------------------------------------------------------------

void record_stage_seconds(const RunPaths & out, const std::string & stage, double seconds) {
    const fs::path path = out.root / "timings.json";
    nlohmann::json t = nlohmann::json::object();
    if (fs::exists(path)) {
        std::ifstream f(path);
        t = nlohmann::json::parse(f);
    }
    t[stage] = seconds;
    write_json(path, t);
}

std::optional<double> pipeline_minutes(const RunPaths & out) {
    const fs::path path = out.root / "timings.json";
    if (!fs::exists(path)) {
        return std::nullopt;
    }
    std::ifstream f(path);
    const auto t = nlohmann::json::parse(f);
    double seconds = 0.0;
    for (const char * stage : {"gen", "train", "patch", "rsa", "intervene", "report"}) {
        if (!t.contains(stage)) {
            return std::nullopt;
        }
        seconds += t.at(stage).get<double>();
    }
    const fs::path summary = out.root / "train_summary.json";
    if (fs::exists(summary)) {
        std::ifstream sf(summary);
        const double trained = nlohmann::json::parse(sf).value("minutes", 0.0) * 60.0;
        seconds += std::max(0.0, trained - t.at("train").get<double>());
    }
    return seconds / 60.0;
}

// --- identities ---------------------------------------------------------------

std::vector<Check> identity_checks(const Transformer & model, const Vocabulary & vocab,
                                   const std::vector<PromptInstance> & prompts) {
    double worst_rel = 0.0;
    double worst_patch = 0.0;
    bool zero_scale_identical = true;
    HookPlan capture;
    capture.capture_all = true;
    const auto L = static_cast<std::size_t>(model.config().n_layers);
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        const auto & ids = prompts[i].rendered;
        const auto res = model.forward(ids, capture);
        for (std::size_t l = 0; l < L; ++l) {
            Vec sum = res.residual[l];
            for (int h = 0; h < model.config().n_heads; ++h) {
                sum += res.captured.at({static_cast<int>(l), h}).vector;
            }
            sum += res.mlp_out[l];
            const Vec & want = res.residual[l + 1];
            worst_rel = std::max(worst_rel, norm(sum + (-1.0) * want) / norm(want));
        }

        const TokenId target = vocab.id(prompts[i].target);
        const auto base = softmax(res.logits)[static_cast<std::size_t>(target)];
        HookPlan all;
        for (const auto & [id, act] : res.captured) {
            all.patches.emplace(id, act.vector);
        }
        worst_patch = std::max(worst_patch, std::abs(next_token_prob(model, ids, all, target) - base));
        if (i < 10) {
            const PrefixCache cache = model.prefill(std::span(ids).first(ids.size() - 1));
            for (const auto & [id, act] : res.captured) {
                HookPlan one;
                one.patches.emplace(id, act.vector);
                const auto p = softmax(model.decode_last(cache, ids.back(), one).logits)[static_cast<std::size_t>(target)];
                worst_patch = std::max(worst_patch, std::abs(p - base));
            }
        }
        HookPlan zero;
        Rng rng(i);
        std::vector<double> v(static_cast<std::size_t>(model.config().d_model));
        for (auto & x : v) {
            x = std::normal_distribution<double>(0.0, 5.0)(rng);
        }
        zero.injections.push_back({static_cast<int>(i % L), Vec(v), 0.0});
        zero_scale_identical = zero_scale_identical && model.forward(ids, zero).logits == model.forward(ids, {}).logits;
    }
    std::vector<Check> checks;
    checks.push_back({2, "residual decomposition", worst_rel < acceptance::kDecompositionRelTol,
                      "max relative error " + num(worst_rel) + " over " + std::to_string(prompts.size()) +
                          " prompts x " + std::to_string(L) + " layers (tol " + num(acceptance::kDecompositionRelTol) + ")"});
    checks.push_back({3, "patch/inject identities", worst_patch < acceptance::kSelfPatchTol && zero_scale_identical,
                      "max self-patch |dp| " + num(worst_patch) + " (tol " + num(acceptance::kSelfPatchTol) +
                          "), zero-scale injection bit-identical: " + (zero_scale_identical ? "yes" : "no")});
    return checks;
}

} // namespace conceptscope
