#include "conceptscope/patching.hpp"

#include "conceptscope/parallel.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace conceptscope {

namespace {

const std::vector<TokenId> & ids_of(const PromptInstance & p) {
    if (p.rendered.empty()) {
        throw TaskError("prompt '" + p.dataset + "' is not rendered");
    }
    return p.rendered;
}

} // namespace

HeadVectors mean_head_activations(const Transformer & model, const std::vector<PromptInstance> & prompts,
                                  int workers) {
    if (prompts.empty()) {
        throw TaskError("mean_head_activations: no prompts");
    }
    std::vector<std::map<HeadId, HeadActivation>> captured(prompts.size());
    HookPlan plan;
    plan.capture_all = true;
    parallel_for(prompts.size(), workers,
                 [&](std::size_t i) { captured[i] = model.forward(ids_of(prompts[i]), plan).captured; });
    HeadVectors means;
    for (const auto & id : all_heads(model.config())) {
        Vec acc(static_cast<std::size_t>(model.config().d_model));
        for (const auto & c : captured) {
            acc += c.at(id).vector;
        }
        acc *= 1.0 / static_cast<double>(prompts.size());
        means.emplace(id, std::move(acc));
    }
    return means;
}

std::vector<PromptInstance> corrupt_dataset(const std::vector<PromptInstance> & prompts, const World & world,
                                            const Vocabulary & vocab, std::uint64_t seed) {
    std::vector<PromptInstance> out;
    out.reserve(prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        PromptInstance c = corrupt_prompt(prompts[i], world, substream_seed(seed, "corrupt/" + std::to_string(i)));
        c.rendered = render_prompt(c, vocab);
        out.push_back(std::move(c));
    }
    return out;
}

ScoreTable compute_cie(const Transformer & model, const Vocabulary & vocab,
                       const std::vector<PromptInstance> & corrupted, const HeadVectors & clean_means, int workers) {
    if (corrupted.empty()) {
        throw TaskError("compute_cie: no prompts");
    }
    const auto heads = all_heads(model.config());
    for (const auto & h : heads) {
        if (!clean_means.contains(h)) {
            throw TaskError("compute_cie: missing clean mean for " + to_string(h));
        }
    }
    // effects[i][k]: prompt i, head k
    std::vector<std::vector<double>> effects(corrupted.size());
    parallel_for(corrupted.size(), workers, [&](std::size_t i) {
        const auto & ids = ids_of(corrupted[i]);
        const TokenId target = vocab.id(corrupted[i].target);
        const PrefixCache cache = model.prefill(std::span(ids).first(ids.size() - 1));
        const double base = softmax(model.decode_last(cache, ids.back(), {}).logits)[static_cast<std::size_t>(target)];
        effects[i].resize(heads.size());
        for (std::size_t k = 0; k < heads.size(); ++k) {
            HookPlan plan;
            plan.patches.emplace(heads[k], clean_means.at(heads[k]));
            const double p = softmax(model.decode_last(cache, ids.back(), plan).logits)[static_cast<std::size_t>(target)];
            effects[i][k] = p - base;
        }
    });
    ScoreTable out;
    for (std::size_t k = 0; k < heads.size(); ++k) {
        double s = 0.0;
        for (const auto & e : effects) {
            s += e[k];
        }
        out.emplace(heads[k], s / static_cast<double>(corrupted.size()));
    }
    return out;
}

ScoreTable compute_aie(const std::vector<ScoreTable> & per_dataset) {
    if (per_dataset.empty()) {
        throw TaskError("compute_aie: no datasets");
    }
    ScoreTable out;
    for (const auto & [h, _] : per_dataset.front()) {
        double s = 0.0;
        for (const auto & t : per_dataset) {
            const auto it = t.find(h);
            if (it == t.end() || t.size() != per_dataset.front().size()) {
                throw TaskError("compute_aie: score tables cover different heads");
            }
            s += it->second;
        }
        out.emplace(h, s / static_cast<double>(per_dataset.size()));
    }
    return out;
}

std::vector<HeadId> top_heads_by_score(const ScoreTable & scores, std::size_t k) {
    std::vector<std::pair<HeadId, double>> v(scores.begin(), scores.end());
    std::stable_sort(v.begin(), v.end(), [](const auto & a, const auto & b) { return a.second > b.second; });
    std::vector<HeadId> out;
    for (std::size_t i = 0; i < std::min(k, v.size()); ++i) {
        out.push_back(v[i].first);
    }
    return out;
}

void write_score_csv(const std::string & path, const ScoreTable & scores) {
    std::ofstream f(path);
    if (!f) {
        throw std::runtime_error("cannot write " + path);
    }
    f << "layer,head,score\n";
    f.precision(17);
    for (const auto & [h, s] : scores) {
        f << h.layer << ',' << h.head << ',' << s << '\n';
    }
}

ScoreTable read_score_csv(const std::string & path) {
    std::ifstream f(path);
    if (!f) {
        throw std::runtime_error("cannot open " + path);
    }
    std::string line;
    std::getline(f, line);
    if (line != "layer,head,score") {
        throw std::runtime_error("unexpected score table header in " + path);
    }
    ScoreTable out;
    while (std::getline(f, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream is(line);
        HeadId h;
        char c1 = 0;
        char c2 = 0;
        double s = 0.0;
        if (!(is >> h.layer >> c1 >> h.head >> c2 >> s) || c1 != ',' || c2 != ',') {
            throw std::runtime_error("malformed score row in " + path + ": " + line);
        }
        out[h] = s;
    }
    return out;
}

Vec sum_head_vectors(const HeadVectors & vectors, const std::vector<HeadId> & heads) {
    if (heads.empty()) {
        throw TaskError("sum_head_vectors: no heads");
    }
    Vec out;
    for (const auto & h : heads) {
        const auto it = vectors.find(h);
        if (it == vectors.end()) {
            throw TaskError("sum_head_vectors: no vector for " + to_string(h));
        }
        if (out.empty()) {
            out = it->second;
        } else {
            out += it->second;
        }
    }
    return out;
}

namespace {

constexpr char kSvMagic[4] = {'C', 'S', 'S', 'V'};
constexpr std::uint32_t kSvVersion = 1;

nlohmann::json heads_to_json(const std::vector<HeadId> & heads) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto & h : heads) {
        a.push_back({h.layer, h.head});
    }
    return a;
}

std::vector<HeadId> heads_from_json(const nlohmann::json & a) {
    std::vector<HeadId> out;
    for (const auto & e : a) {
        out.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    }
    return out;
}

} // namespace

void save_steering_vector(const std::string & path, const SteeringVector & sv) {
    static_assert(std::endian::native == std::endian::little);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw std::runtime_error("cannot write " + path);
    }
    const auto dim = static_cast<std::uint32_t>(sv.vector.size());
    f.write(kSvMagic, 4);
    f.write(reinterpret_cast<const char *>(&kSvVersion), 4);
    f.write(reinterpret_cast<const char *>(&dim), 4);
    f.write(reinterpret_cast<const char *>(sv.vector.raw().data()), static_cast<std::streamsize>(dim * sizeof(double)));
    std::ofstream m(path + ".json");
    m << nlohmann::json{{"kind", sv.kind},   {"source", sv.source}, {"heads", heads_to_json(sv.heads)},
                        {"layer", sv.layer}, {"scale", sv.scale},   {"dim", dim},
                        {"norm", norm(sv.vector)}}
             .dump(2)
      << '\n';
}

SteeringVector load_steering_vector(const std::string & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open " + path);
    }
    char magic[4];
    std::uint32_t version = 0;
    std::uint32_t dim = 0;
    if (!f.read(magic, 4) || std::memcmp(magic, kSvMagic, 4) != 0 ||
        !f.read(reinterpret_cast<char *>(&version), 4) || version != kSvVersion ||
        !f.read(reinterpret_cast<char *>(&dim), 4)) {
        throw std::runtime_error("not a steering vector: " + path);
    }
    std::vector<double> data(dim);
    if (!f.read(reinterpret_cast<char *>(data.data()), static_cast<std::streamsize>(dim * sizeof(double)))) {
        throw std::runtime_error("truncated steering vector: " + path);
    }
    std::ifstream m(path + ".json");
    if (!m) {
        throw std::runtime_error("missing metadata " + path + ".json");
    }
    const auto j = nlohmann::json::parse(m);
    SteeringVector sv;
    sv.kind = j.at("kind").get<std::string>();
    sv.source = j.at("source").get<std::string>();
    sv.heads = heads_from_json(j.at("heads"));
    sv.layer = j.at("layer").get<int>();
    sv.scale = j.at("scale").get<double>();
    sv.vector = Vec(std::move(data));
    return sv;
}

void write_head_vectors(const std::string & path, const HeadVectors & vectors) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto & [h, v] : vectors) {
        a.push_back({{"layer", h.layer}, {"head", h.head}, {"vector", v.raw()}});
    }
    std::ofstream f(path);
    if (!f) {
        throw std::runtime_error("cannot write " + path);
    }
    f << a.dump() << '\n';
}

HeadVectors read_head_vectors(const std::string & path) {
    std::ifstream f(path);
    if (!f) {
        throw std::runtime_error("cannot open " + path);
    }
    HeadVectors out;
    for (const auto & e : nlohmann::json::parse(f)) {
        out.emplace(HeadId{e.at("layer").get<int>(), e.at("head").get<int>()},
                    Vec(e.at("vector").get<std::vector<double>>()));
    }
    return out;
}

} // namespace conceptscope
