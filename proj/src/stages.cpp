#include "conceptscope/interventions.hpp"
#include "conceptscope/patching.hpp"
#include "conceptscope/pipeline.hpp"
#include "conceptscope/rsa.hpp"
#include "conceptscope/svg.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>

namespace conceptscope {

namespace fs = std::filesystem;
using acceptance::Check;

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

std::vector<PromptInstance> load_prompts(const fs::path & path) {
    if (!fs::exists(path)) {
        throw PipelineError("missing " + path.string() + "; run `conceptscope gen` first");
    }
    return read_jsonl(path.string());
}

LoadedModel load_trained(const RunPaths & out) {
    if (!fs::exists(out.checkpoint())) {
        throw PipelineError("missing " + out.checkpoint().string() + "; run `conceptscope train` first");
    }
    return load_model(out.checkpoint().string());
}

void require(const fs::path & path, const std::string & producer) {
    if (!fs::exists(path)) {
        throw PipelineError("missing " + path.string() + "; run `conceptscope " + producer + "` first");
    }
}

double mean_of(const std::vector<double> & v) {
    if (v.empty()) {
        return std::nan("");
    }
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

Vec scores_vec(const ScoreTable & t) {
    std::vector<double> v;
    for (const auto & [h, s] : t) {
        v.push_back(s);
    }
    return Vec(std::move(v));
}

void write_matrix_csv(const fs::path & path, const Matrix & m, const std::vector<std::string> & labels) {
    std::ofstream f(path);
    if (!f) {
        throw PipelineError("cannot write " + path.string());
    }
    f << "row";
    for (std::size_t c = 0; c < m.cols(); ++c) {
        f << ',' << labels.at(c);
    }
    f << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        f << labels.at(r);
        for (std::size_t c = 0; c < m.cols(); ++c) {
            f << ',' << svg::fmt(m(r, c));
        }
        f << '\n';
    }
}

// Prompt pool with per-dataset index ranges.
struct Pool {
    std::vector<PromptInstance> prompts;
    std::vector<std::string> dataset; // per prompt
    std::vector<TaskAttributes> attributes;

    void add(const std::string & name, std::vector<PromptInstance> ps, const TaskAttributes & a) {
        for (auto & p : ps) {
            prompts.push_back(std::move(p));
            dataset.push_back(name);
            attributes.push_back(a);
        }
    }
    std::vector<std::size_t> indices_of(const std::set<std::string> & names) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            if (names.contains(dataset[i])) {
                out.push_back(i);
            }
        }
        return out;
    }
    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        std::map<std::string, int> seen;
        for (const auto & d : dataset) {
            out.push_back(d + "#" + std::to_string(seen[d]++));
        }
        return out;
    }
};

template <typename T>
std::vector<T> pick(const std::vector<T> & v, const std::vector<std::size_t> & idx) {
    std::vector<T> out;
    for (std::size_t i : idx) {
        out.push_back(v.at(i));
    }
    return out;
}

HeadVectors mean_over(const HeadOutputs & outputs, const std::vector<std::size_t> & idx) {
    HeadVectors out;
    for (const auto & [h, v] : outputs) {
        Vec acc(v.front().size());
        for (std::size_t i : idx) {
            acc += v.at(i);
        }
        acc *= 1.0 / static_cast<double>(idx.size());
        out.emplace(h, std::move(acc));
    }
    return out;
}

std::vector<std::string> dataset_list(bool verbal) {
    return verbal ? verbal_dataset_names() : abstract_dataset_names();
}

std::vector<HeadId> read_heads(const nlohmann::json & a) {
    std::vector<HeadId> out;
    for (const auto & e : a) {
        out.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    }
    return out;
}

nlohmann::json heads_json(const std::vector<HeadId> & heads) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto & h : heads) {
        a.push_back({h.layer, h.head});
    }
    return a;
}

} // namespace

// --- patch -------------------------------------------------------------------

std::vector<Check> run_patch(const PipelineConfig & c, const RunPaths & out) {
    fs::create_directories(out.patch());
    const LoadedModel lm = load_trained(out);
    const Transformer & model = lm.model;

    std::map<std::string, ScoreTable> cie;
    std::map<std::string, HeadVectors> means;
    for (const auto & name : verbal_dataset_names()) {
        std::cerr << "[patch] " << name << '\n';
        const auto clean = load_prompts(out.dataset(name));
        const auto corrupted = load_prompts(out.data() / "corrupted" / (name + ".jsonl"));
        if (corrupted.size() != clean.size()) {
            throw PipelineError("corrupted set for " + name + " does not match its clean set; rerun `conceptscope gen`");
        }
        means[name] = mean_head_activations(model, clean, c.workers);
        cie[name] = compute_cie(model, lm.vocab, corrupted, means[name], c.workers);
        write_head_vectors((out.patch() / ("means_" + name + ".json")).string(), means[name]);
        write_score_csv((out.patch() / ("cie_" + name + ".csv")).string(), cie[name]);
    }
    std::vector<ScoreTable> all;
    for (const auto & [n, t] : cie) {
        all.push_back(t);
    }
    const ScoreTable aie = compute_aie(all);
    write_score_csv((out.patch() / "aie.csv").string(), aie);
    const auto fv_heads = top_heads_by_score(aie, c.analysis.fv_heads);
    for (const auto & name : verbal_dataset_names()) {
        SteeringVector sv{"function_vector", name, fv_heads, c.fv_layer(), c.analysis.fv_scale,
                          build_function_vector(means[name], fv_heads)};
        save_steering_vector((out.patch() / ("fv_" + name + ".bin")).string(), sv);
    }

    // Antonym CIE alone vs averaged over the three antonym presentations.
    const ScoreTable antonym_aie = compute_aie({cie["antonym_en"], cie["antonym_fr"], cie["antonym_mc"]});
    const double rho = spearman_rho(scores_vec(cie["antonym_en"]), scores_vec(antonym_aie));
    const auto top_en = top_heads_by_score(cie["antonym_en"], c.analysis.fv_heads);
    const auto top_all = top_heads_by_score(antonym_aie, c.analysis.fv_heads);
    std::size_t overlap = 0;
    for (const auto & h : top_en) {
        overlap += std::find(top_all.begin(), top_all.end(), h) != top_all.end() ? 1 : 0;
    }
    const double overlap_frac = static_cast<double>(overlap) / static_cast<double>(top_en.size());
    double min_cie = 1.0;
    nlohmann::json head_rows = nlohmann::json::array();
    for (const auto & h : fv_heads) {
        min_cie = std::min(min_cie, cie["antonym_en"].at(h));
        head_rows.push_back({{"layer", h.layer}, {"head", h.head}, {"aie", aie.at(h)}, {"cie_antonym_en", cie["antonym_en"].at(h)}});
    }

    const auto identity_prompts = load_prompts(out.data() / "identity_prompts.jsonl");
    std::vector<Check> checks = identity_checks(model, lm.vocab, identity_prompts);
    write_json(out.patch() / "summary.json", {{"fv_heads", heads_json(fv_heads)},
                                              {"fv_head_scores", head_rows},
                                              {"fv_layer", c.fv_layer()},
                                              {"antonym_spearman", rho},
                                              {"antonym_top_overlap", overlap_frac},
                                              {"min_top_cie_antonym_en", min_cie}});
    checks.push_back({5, "patching direction",
                      min_cie > 0.0 && rho > 0.0 && overlap_frac >= acceptance::kTopHeadOverlap,
                      "min antonym_en CIE over top-" + std::to_string(fv_heads.size()) + " AIE heads " + num(min_cie) +
                          " (need > 0); Spearman(CIE antonym_en, AIE antonym en/fr/mc) " + num(rho) +
                          " (need > 0); top-" + std::to_string(top_en.size()) + " overlap " + num(overlap_frac) +
                          " (need >= " + num(acceptance::kTopHeadOverlap) + ")"});
    return finish(out.root / "patch_checks.json", std::move(checks));
}

// --- rsa ---------------------------------------------------------------------

std::vector<Check> run_rsa(const PipelineConfig & c, const RunPaths & out) {
    fs::create_directories(out.rsa());
    require(out.patch() / "summary.json", "patch");
    const LoadedModel lm = load_trained(out);
    const Transformer & model = lm.model;
    const auto patch_summary = read_stage_json(out.patch() / "summary.json", "patch");
    const auto fv_heads = read_heads(patch_summary.at("fv_heads"));

    Pool pool;
    for (const auto & spec : dataset_table()) {
        pool.add(spec.name, load_prompts(out.dataset(spec.name)), spec.attributes);
    }
    std::cerr << "[rsa] collecting head outputs on " << pool.prompts.size() << " prompts\n";
    const HeadOutputs outputs = collect_head_outputs(model, pool.prompts, c.workers);
    const std::vector<Attribute> axes(kAllAttributes.begin(), kAllAttributes.end());

    const auto verbal_names = dataset_list(true);
    const auto abstract_names = dataset_list(false);
    const auto verbal_idx = pool.indices_of({verbal_names.begin(), verbal_names.end()});
    const auto abstract_idx = pool.indices_of({abstract_names.begin(), abstract_names.end()});

    const PhiTable phi_all = phi_table(outputs, pool.attributes, axes, c.workers);
    const PhiTable phi_verbal =
        phi_table(select_prompts(outputs, verbal_idx), pick(pool.attributes, verbal_idx), axes, c.workers);
    const PhiTable phi_abstract =
        phi_table(select_prompts(outputs, abstract_idx), pick(pool.attributes, abstract_idx), {Attribute::Concept}, c.workers);
    write_phi_csv((out.rsa() / "phi_all.csv").string(), phi_all);
    write_phi_csv((out.rsa() / "phi_verbal.csv").string(), phi_verbal);
    write_phi_csv((out.rsa() / "phi_abstract.csv").string(), phi_abstract);

    const auto cv_heads = top_heads_by_phi(phi_verbal, Attribute::Concept, c.analysis.cv_heads);
    for (const auto & spec : dataset_table()) {
        const auto idx = pool.indices_of({spec.name});
        SteeringVector sv{"concept_vector", spec.name, cv_heads, -1, c.analysis.cv_scale,
                          build_concept_vector(mean_over(outputs, idx), cv_heads)};
        save_steering_vector((out.rsa() / ("cv_" + spec.name + ".bin")).string(), sv);
    }

    // Per-prompt vectors and their similarity structure.
    const auto cv_prompt = per_prompt_vectors(outputs, cv_heads);
    const auto fv_prompt = per_prompt_vectors(select_prompts(outputs, verbal_idx), fv_heads);
    const Matrix rsm_cv = build_rsm(cv_prompt);
    const Matrix rsm_fv = build_rsm(fv_prompt);
    const auto labels = pool.labels();
    write_matrix_csv(out.rsa() / "rsm_cv_all.csv", rsm_cv, labels);
    write_matrix_csv(out.rsa() / "rsm_fv_verbal.csv", rsm_fv, pick(labels, verbal_idx));

    // CV invariance across languages (open-ended verbal datasets).
    const auto open_lang = [&](std::size_t i) {
        const auto & a = pool.attributes[i];
        return a.question_type == QuestionType::Open && a.language != Language::None &&
               (a.concept_kind == Concept::Antonym || a.concept_kind == Concept::Translation ||
                a.concept_kind == Concept::Categorical);
    };
    std::vector<double> within;
    std::vector<double> between;
    for (std::size_t i : verbal_idx) {
        for (std::size_t j : verbal_idx) {
            if (j <= i || !open_lang(i) || !open_lang(j)) {
                continue;
            }
            const auto & a = pool.attributes[i];
            const auto & b = pool.attributes[j];
            if (a.concept_kind == b.concept_kind && a.language != b.language) {
                within.push_back(rsm_cv(i, j));
            } else if (a.concept_kind != b.concept_kind) {
                between.push_back(rsm_cv(i, j));
            }
        }
    }
    const double cv_within = mean_of(within);
    const double cv_between = mean_of(between);

    // FV multiple-choice cluster: MC-MC across concepts vs MC-open within concept.
    std::vector<double> mc_mc;
    std::vector<double> mc_open;
    for (std::size_t a = 0; a < verbal_idx.size(); ++a) {
        for (std::size_t b = a + 1; b < verbal_idx.size(); ++b) {
            const auto & x = pool.attributes[verbal_idx[a]];
            const auto & y = pool.attributes[verbal_idx[b]];
            const bool x_mc = x.question_type == QuestionType::MultipleChoice;
            const bool y_mc = y.question_type == QuestionType::MultipleChoice;
            if (x_mc && y_mc && x.concept_kind != y.concept_kind) {
                mc_mc.push_back(rsm_fv(a, b));
            } else if (x_mc != y_mc && x.concept_kind == y.concept_kind) {
                mc_open.push_back(rsm_fv(a, b));
            }
        }
    }
    const double fv_mc_mc = mean_of(mc_mc);
    const double fv_mc_open = mean_of(mc_open);
    double cv_mc_mc = 0.0;
    double cv_mc_open = 0.0;
    {
        std::vector<double> x1;
        std::vector<double> x2;
        for (std::size_t a = 0; a < verbal_idx.size(); ++a) {
            for (std::size_t b = a + 1; b < verbal_idx.size(); ++b) {
                const auto & x = pool.attributes[verbal_idx[a]];
                const auto & y = pool.attributes[verbal_idx[b]];
                const bool x_mc = x.question_type == QuestionType::MultipleChoice;
                const bool y_mc = y.question_type == QuestionType::MultipleChoice;
                if (x_mc && y_mc && x.concept_kind != y.concept_kind) {
                    x1.push_back(rsm_cv(verbal_idx[a], verbal_idx[b]));
                } else if (x_mc != y_mc && x.concept_kind == y.concept_kind) {
                    x2.push_back(rsm_cv(verbal_idx[a], verbal_idx[b]));
                }
            }
        }
        cv_mc_mc = mean_of(x1);
        cv_mc_open = mean_of(x2);
    }

    // Verbal vs abstract concept alignment.
    double max_verbal = -1.0;
    double max_abstract = -1.0;
    for (const auto & [h, row] : phi_verbal.values) {
        max_verbal = std::max(max_verbal, row.at(Attribute::Concept));
    }
    for (const auto & [h, row] : phi_abstract.values) {
        max_abstract = std::max(max_abstract, row.at(Attribute::Concept));
    }

    // Shot sweep over the verbal pool, with correctness-split CVs.
    const auto train_summary = read_stage_json(out.root / "train_summary.json", "train");
    std::ofstream sweep(out.rsa() / "shot_sweep.csv");
    sweep << "shots,mean_phi_concept,max_phi_concept,mean_accuracy\n";
    std::map<std::size_t, double> mean_phi_by_shots;
    std::map<std::string, std::vector<Vec>> correct_cvs;
    std::map<std::string, std::vector<Vec>> incorrect_cvs;
    for (std::size_t k : c.data.shot_sweep) {
        Pool sp;
        for (const auto & name : verbal_names) {
            sp.add(name, load_prompts(k == c.data.shots ? out.dataset(name) : out.dataset(name, k)),
                   dataset_spec(name).attributes);
        }
        std::cerr << "[rsa] shot sweep k=" << k << '\n';
        const HeadOutputs so = k == c.data.shots ? select_prompts(outputs, verbal_idx)
                                                  : collect_head_outputs(model, sp.prompts, c.workers);
        const PhiTable t = phi_table(so, sp.attributes, {Attribute::Concept}, c.workers);
        std::vector<double> vals;
        for (const auto & [h, row] : t.values) {
            vals.push_back(row.at(Attribute::Concept));
        }
        const double mean_phi = mean_of(vals);
        mean_phi_by_shots[k] = mean_phi;
        std::vector<double> accs;
        for (const auto & name : verbal_names) {
            accs.push_back(train_summary.at("shot_accuracy").at(name).at(std::to_string(k)).get<double>());
        }
        sweep << k << ',' << svg::fmt(mean_phi) << ',' << svg::fmt(*std::max_element(vals.begin(), vals.end())) << ','
              << svg::fmt(mean_of(accs)) << '\n';

        const auto cvs = per_prompt_vectors(so, cv_heads);
        for (std::size_t i = 0; i < sp.prompts.size(); ++i) {
            const bool ok = greedy_next(model, sp.prompts[i].rendered) == lm.vocab.id(sp.prompts[i].target);
            (ok ? correct_cvs : incorrect_cvs)[sp.dataset[i]].push_back(cvs[i]);
        }
    }
    sweep.close();

    // Correctness split: group CVs for datasets with enough items in both groups.
    {
        std::ofstream groups(out.rsa() / "correctness_groups.csv");
        groups << "dataset,n_correct,n_incorrect,included\n";
        std::vector<Vec> group_vecs;
        std::vector<std::string> group_labels;
        for (const auto & name : verbal_names) {
            const std::size_t nc = correct_cvs[name].size();
            const std::size_t ni = incorrect_cvs[name].size();
            const bool included = nc >= c.analysis.min_group && ni >= c.analysis.min_group;
            groups << name << ',' << nc << ',' << ni << ',' << (included ? 1 : 0) << '\n';
            if (included) {
                group_vecs.push_back(mean_vector(correct_cvs[name]));
                group_labels.push_back(name + ":correct");
                group_vecs.push_back(mean_vector(incorrect_cvs[name]));
                group_labels.push_back(name + ":incorrect");
            }
        }
        if (group_vecs.size() >= 2) {
            write_matrix_csv(out.rsa() / "correctness_rsm.csv", build_rsm(group_vecs), group_labels);
        } else if (fs::exists(out.rsa() / "correctness_rsm.csv")) {
            fs::remove(out.rsa() / "correctness_rsm.csv");
        }
    }

    // Letter strings: accuracy and per-alphabet CV structure.
    {
        std::ofstream acc(out.rsa() / "letter_string_accuracy.csv");
        acc << "alphabet,n_perm,accuracy,chance\n";
        Pool lp;
        std::vector<Vec> alphabet_cvs;
        std::vector<std::string> alphabet_labels;
        for (const auto & s : letter_string_settings()) {
            const auto ps = load_prompts(out.data() / ("letter_string_" + s.label + ".jsonl"));
            acc << s.label << ',' << (s.kind == AlphabetKind::Symbolic ? std::string("symbolic") : std::to_string(s.n_perm))
                << ',' << svg::fmt(evaluate_accuracy(model, lm.vocab, ps)) << ',' << svg::fmt(s.chance) << '\n';
            lp.add("alphabet_" + s.label,
                   std::vector<PromptInstance>(ps.begin(), ps.begin() + static_cast<std::ptrdiff_t>(c.data.letter_cv_prompts)),
                   ps.front().attributes);
        }
        const auto lo = collect_head_outputs(model, lp.prompts, c.workers);
        const auto lcv = per_prompt_vectors(lo, cv_heads);
        write_matrix_csv(out.rsa() / "rsm_letter_string.csv", build_rsm(lcv), lp.labels());
    }

    write_json(out.rsa() / "summary.json",
               {{"cv_heads", heads_json(cv_heads)},
                {"fv_heads", heads_json(fv_heads)},
                {"cv_within_concept_cross_language", cv_within},
                {"cv_between_concept", cv_between},
                {"fv_mc_mc_cross_concept", fv_mc_mc},
                {"fv_mc_open_within_concept", fv_mc_open},
                {"cv_mc_mc_cross_concept", cv_mc_mc},
                {"cv_mc_open_within_concept", cv_mc_open},
                {"max_phi_concept_verbal", max_verbal},
                {"max_phi_concept_abstract", max_abstract},
                {"mean_phi_concept_by_shots", [&] {
                     nlohmann::json j = nlohmann::json::object();
                     for (const auto & [k, v] : mean_phi_by_shots) {
                         j[std::to_string(k)] = v;
                     }
                     return j;
                 }()}});

    std::vector<Check> checks;
    checks.push_back({6, "CV invariance and FV MC cluster",
                      cv_within - cv_between >= acceptance::kCvInvarianceMargin && fv_mc_mc > fv_mc_open,
                      "CV within-concept cross-language " + num(cv_within) + " vs between-concept " + num(cv_between) +
                          " (margin " + num(cv_within - cv_between) + ", need >= " +
                          num(acceptance::kCvInvarianceMargin) + "); FV MC-MC cross-concept " + num(fv_mc_mc) +
                          " vs MC-open within-concept " + num(fv_mc_open) + " (need >)"});
    checks.push_back({7, "abstract-concept gap", max_verbal > max_abstract,
                      "max Phi^concept verbal " + num(max_verbal) + " vs previous/next " + num(max_abstract) + " (need >)"});
    const double phi5 = mean_phi_by_shots.at(c.data.shots);
    const double phi1 = mean_phi_by_shots.at(1);
    checks.push_back({9, "shot sweep", phi5 > phi1,
                      "mean Phi^concept at " + std::to_string(c.data.shots) + " shots " + num(phi5) + " vs 1 shot " +
                          num(phi1) + " (need >)"});
    return finish(out.root / "rsa_checks.json", std::move(checks));
}

// --- intervene ---------------------------------------------------------------

std::vector<Check> run_intervene(const PipelineConfig & c, const RunPaths & out) {
    fs::create_directories(out.intervene());
    require(out.rsa() / "cv_antonym_en.bin", "rsa");
    require(out.patch() / "fv_antonym_en.bin", "patch");
    const LoadedModel lm = load_trained(out);
    const Transformer & model = lm.model;
    const auto & vocab = lm.vocab;

    const auto cv = load_steering_vector((out.rsa() / "cv_antonym_en.bin").string());
    const auto fv = load_steering_vector((out.patch() / "fv_antonym_en.bin").string());
    const auto cv_mc = load_steering_vector((out.rsa() / "cv_antonym_mc.bin").string());
    const auto fv_mc = load_steering_vector((out.patch() / "fv_antonym_mc.bin").string());
    const auto dev = load_prompts(out.data() / "ambiguous_dev.jsonl");
    const auto test = load_prompts(out.data() / "ambiguous_test.jsonl");

    std::cerr << "[intervene] sweeping layers x scales on " << dev.size() << " dev prompts\n";
    const double dev_baseline = continuation_rate(model, vocab, dev, {}, 0, c.workers);
    const auto cv_grid = sweep_layer_scale(model, vocab, dev, cv.vector, c.analysis.sweep_scales, c.workers);
    const auto fv_grid = sweep_layer_scale(model, vocab, dev, fv.vector, c.analysis.sweep_scales, c.workers);
    write_sweep_csv((out.intervene() / "cv_sweep.csv").string(), cv_grid, dev_baseline);
    write_sweep_csv((out.intervene() / "fv_sweep.csv").string(), fv_grid, dev_baseline);
    const int cv_layer = best_layer(cv_grid, c.analysis.cv_scale);
    const SweepCell cv_best = best_cell(cv_grid);
    const SweepCell fv_best = best_cell(fv_grid);
    const int fv_layer = c.fv_layer();

    // Layer where Φ^concept peaks, for comparison with the best CV layer.
    int phi_peak_layer = -1;
    {
        const auto phi = read_phi_csv((out.rsa() / "phi_verbal.csv").string());
        double best = -2.0;
        for (const auto & [h, row] : phi.values) {
            if (row.at(Attribute::Concept) > best) {
                best = row.at(Attribute::Concept);
                phi_peak_layer = h.layer;
            }
        }
    }

    const auto amb = [&](const Vec & v, int layer, double scale) {
        return continuation_rate(model, vocab, test, {{layer, v, scale}}, 0, c.workers);
    };
    const double amb_base = continuation_rate(model, vocab, test, {}, 0, c.workers);
    const double amb_cv = amb(cv.vector, cv_layer, c.analysis.cv_scale);
    const double amb_fv = amb(fv.vector, fv_layer, c.analysis.fv_scale);
    const double amb_cv_mc = amb(cv_mc.vector, cv_layer, c.analysis.cv_scale);
    const double amb_fv_mc = amb(fv_mc.vector, fv_layer, c.analysis.fv_scale);

    const auto zs = zero_shot(load_prompts(out.dataset("antonym_en")), vocab);
    const auto zs_rate = [&](const Vec & v, int layer, double scale) {
        return continuation_rate(model, vocab, zs, {{layer, v, scale}}, std::string::npos, c.workers);
    };
    const double zs_base = continuation_rate(model, vocab, zs, {}, std::string::npos, c.workers);
    const double zs_cv = zs_rate(cv.vector, cv_layer, c.analysis.cv_scale);
    const double zs_fv = zs_rate(fv.vector, fv_layer, c.analysis.fv_scale);
    const double zs_cv_mc = zs_rate(cv_mc.vector, cv_layer, c.analysis.cv_scale);
    const double zs_fv_mc = zs_rate(fv_mc.vector, fv_layer, c.analysis.fv_scale);

    // Rank of "slow" after "fast ->" with and without the antonym FV.
    nlohmann::json transplant = nullptr;
    if (vocab.contains("fast") && vocab.contains("slow")) {
        const std::vector<TokenId> ids = {vocab.id("fast"), vocab.id("->")};
        const auto rank_of = [&](const HookPlan & plan) {
            const auto logits = model.forward(ids, plan).logits;
            const float v = logits[static_cast<std::size_t>(vocab.id("slow"))];
            return 1 + std::count_if(logits.begin(), logits.end(), [&](float x) { return x > v; });
        };
        HookPlan with;
        with.injections.push_back({fv_layer, fv.vector, c.analysis.fv_scale});
        transplant = {{"rank_without", rank_of({})}, {"rank_with_fv", rank_of(with)}};
    }

    std::ofstream bars(out.intervene() / "bars.csv");
    bars << "setting,baseline,cv,fv,cv_mc,fv_mc\n";
    bars << "ambiguous," << svg::fmt(amb_base) << ',' << svg::fmt(amb_cv) << ',' << svg::fmt(amb_fv) << ','
         << svg::fmt(amb_cv_mc) << ',' << svg::fmt(amb_fv_mc) << '\n';
    bars << "zero_shot," << svg::fmt(zs_base) << ',' << svg::fmt(zs_cv) << ',' << svg::fmt(zs_fv) << ','
         << svg::fmt(zs_cv_mc) << ',' << svg::fmt(zs_fv_mc) << '\n';
    bars.close();

    write_json(out.intervene() / "summary.json",
               {{"cv_layer", cv_layer},
                {"cv_scale", c.analysis.cv_scale},
                {"cv_best_cell", {{"layer", cv_best.layer}, {"scale", cv_best.scale}, {"rate", cv_best.value}}},
                {"fv_best_cell", {{"layer", fv_best.layer}, {"scale", fv_best.scale}, {"rate", fv_best.value}}},
                {"fv_layer", fv_layer},
                {"fv_scale", c.analysis.fv_scale},
                {"phi_peak_layer", phi_peak_layer},
                {"dev_baseline", dev_baseline},
                {"ambiguous", {{"baseline", amb_base}, {"cv", amb_cv}, {"fv", amb_fv}, {"cv_mc", amb_cv_mc}, {"fv_mc", amb_fv_mc}}},
                {"zero_shot", {{"baseline", zs_base}, {"cv", zs_cv}, {"fv", zs_fv}, {"cv_mc", zs_cv_mc}, {"fv_mc", zs_fv_mc}}},
                {"fast_slow_transplant", transplant}});

    std::vector<Check> checks;
    checks.push_back({8, "steering",
                      amb_cv - amb_base >= acceptance::kSteeringGain && zs_fv >= zs_cv,
                      "AmbiguousICL antonym rate " + num(amb_base) + " -> " + num(amb_cv) + " with CV at layer " +
                          std::to_string(cv_layer) + " x" + num(c.analysis.cv_scale) + " (gain " +
                          num(amb_cv - amb_base) + ", need >= " + num(acceptance::kSteeringGain) +
                          "); zero-shot FV " + num(zs_fv) + " vs CV " + num(zs_cv) + " (need >=)"});
    return finish(out.root / "intervene_checks.json", std::move(checks));
}

} // namespace conceptscope
