#include "conceptscope/training.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace conceptscope {

nlohmann::json to_json(const TrainConfig & c) {
    return {{"steps", c.steps},
            {"batch_size", c.batch_size},
            {"lr", c.lr},
            {"min_lr_ratio", c.min_lr_ratio},
            {"warmup", c.warmup},
            {"weight_decay", c.weight_decay},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"adam_eps", c.adam_eps},
            {"grad_clip", c.grad_clip},
            {"min_shots", c.min_shots},
            {"max_shots", c.max_shots},
            {"log_every", c.log_every},
            {"overlap_weight", c.overlap_weight},
            {"mixture",
             {{"verbal_open", c.mixture.verbal_open},
              {"verbal_mc", c.mixture.verbal_mc},
              {"list", c.mixture.list},
              {"abstract", c.mixture.abstract},
              {"letter_string", c.mixture.letter_string}}}};
}

TrainConfig train_config_from_json(const nlohmann::json & j) {
    TrainConfig c;
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.min_lr_ratio = j.value("min_lr_ratio", c.min_lr_ratio);
    c.warmup = j.value("warmup", c.warmup);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.min_shots = j.value("min_shots", c.min_shots);
    c.max_shots = j.value("max_shots", c.max_shots);
    c.log_every = j.value("log_every", c.log_every);
    c.overlap_weight = j.value("overlap_weight", c.overlap_weight);
    if (j.contains("mixture")) {
        const auto & m = j.at("mixture");
        c.mixture.verbal_open = m.value("verbal_open", c.mixture.verbal_open);
        c.mixture.verbal_mc = m.value("verbal_mc", c.mixture.verbal_mc);
        c.mixture.list = m.value("list", c.mixture.list);
        c.mixture.abstract = m.value("abstract", c.mixture.abstract);
        c.mixture.letter_string = m.value("letter_string", c.mixture.letter_string);
    }
    if (c.steps <= 0 || c.batch_size <= 0 || c.lr <= 0.0 || c.min_shots < 1 || c.max_shots < c.min_shots ||
        !(c.overlap_weight > 0.0)) {
        throw TrainingError("invalid training config");
    }
    return c;
}

double lr_at(const TrainConfig & c, int step) {
    if (step < c.warmup) {
        return c.lr * (step + 1) / c.warmup;
    }
    const double span = std::max(1, c.steps - c.warmup);
    const double progress = std::min(1.0, (step - c.warmup) / span);
    const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    return c.lr * (c.min_lr_ratio + (1.0 - c.min_lr_ratio) * cosine);
}

void append_example(const PromptInstance & p, PromptFormat format, const Vocabulary & vocab, TrainBatch & batch) {
    std::vector<std::string> tokens = render_tokens(p, format);
    tokens.push_back(p.target);
    std::vector<TokenId> ids;
    ids.reserve(tokens.size());
    for (const auto & t : tokens) {
        ids.push_back(vocab.id(t));
    }
    std::vector<std::pair<int, TokenId>> labels;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        if (tokens[i] == "->" || tokens[i] == "A:") {
            labels.emplace_back(static_cast<int>(i), ids[i + 1]);
        }
    }
    batch.sequences.push_back(std::move(ids));
    batch.labels.push_back(std::move(labels));
}

PromptInstance sample_training_prompt(const World & world, const TrainConfig & c, Rng & rng) {
    const auto & m = c.mixture;
    const double weights[] = {m.verbal_open, m.verbal_mc, m.list, m.abstract, m.letter_string};
    std::discrete_distribution<int> family(std::begin(weights), std::end(weights));
    const std::size_t shots = c.min_shots + uniform_index(rng, c.max_shots - c.min_shots + 1);
    const std::uint64_t seed = rng();
    const auto direction = uniform_index(rng, 2) == 0 ? Direction::Previous : Direction::Next;

    const int fam = family(rng);
    switch (fam) {
    case 0:
    case 1: {
        const Lexicon & lx = world.lexicons[uniform_index(rng, world.lexicons.size())];
        PromptInstance p = gen_verbal_prompts(lx, shots, 1, Split::Train, seed, c.overlap_weight).front();
        if (fam == 1) {
            return to_multiple_choice(p, lx, Split::Train, kMcOptions, seed ^ 0x9e3779b97f4a7c15ULL);
        }
        return p;
    }
    case 2:
        return gen_list_prevnext(direction, 1, shots, seed).front();
    case 3: {
        const auto variant = uniform_index(rng, 2) == 0 ? AbstractVariant::Letter : AbstractVariant::Word;
        return gen_abstract_prevnext(direction, variant, 3, 3, 1, shots, seed, world).front();
    }
    default: {
        const bool symbolic = uniform_index(rng, 5) == 0;
        const std::size_t n_perm = symbolic ? 0 : uniform_index(rng, 27);
        return gen_letter_string(n_perm, symbolic ? AlphabetKind::Symbolic : AlphabetKind::Latin, 1, seed).front();
    }
    }
}

TrainBatch sample_batch(const World & world, const Vocabulary & vocab, const TrainConfig & c, Rng & rng) {
    TrainBatch batch;
    for (int i = 0; i < c.batch_size; ++i) {
        const PromptInstance p = sample_training_prompt(world, c, rng);
        // Abstract and letter-string prompts keep their question/answer layout.
        const bool free_format = !p.source_lexicon.empty();
        const PromptFormat f = free_format && uniform_index(rng, 2) == 0 ? PromptFormat::Arrow : PromptFormat::QA;
        append_example(p, free_format ? f : p.format, vocab, batch);
    }
    return batch;
}

AdamW::AdamW(const ParamSet & params, const TrainConfig & c)
    : c_(c), m_(params.zeros_like()), v_(params.zeros_like()) {}

void AdamW::step(ParamSet & params, const ParamSet & grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(c_.beta1, t_);
    const double bc2 = 1.0 - std::pow(c_.beta2, t_);
    auto & ps = params.tensors();
    for (std::size_t ti = 0; ti < ps.size(); ++ti) {
        if (!Transformer::trainable(ps[ti].name)) {
            continue;
        }
        // Norm gains and biases are not decayed.
        const bool decay = ps[ti].shape.size() == 2;
        auto & w = ps[ti].data;
        const auto & g = grads.tensors()[ti].data;
        auto & m = m_.tensors()[ti].data;
        auto & v = v_.tensors()[ti].data;
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = static_cast<float>(c_.beta1 * m[i] + (1.0 - c_.beta1) * g[i]);
            v[i] = static_cast<float>(c_.beta2 * v[i] + (1.0 - c_.beta2) * static_cast<double>(g[i]) * g[i]);
            double upd = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c_.adam_eps);
            if (decay) {
                upd += c_.weight_decay * w[i];
            }
            w[i] = static_cast<float>(w[i] - lr * upd);
        }
    }
}

double grad_norm(const ParamSet & grads) {
    double s = 0.0;
    for (const auto & t : grads.tensors()) {
        if (!Transformer::trainable(t.name)) {
            continue;
        }
        for (float x : t.data) {
            s += static_cast<double>(x) * x;
        }
    }
    return std::sqrt(s);
}

std::vector<TrainLogRow> train(Transformer & model, const World & world, const Vocabulary & vocab,
                               const TrainConfig & c, std::uint64_t seed, const TrainCallback & on_log) {
    Rng rng = make_rng(seed, "train");
    AdamW opt(model.params(), c);
    ParamSet grads = model.params().zeros_like();
    std::vector<TrainLogRow> log;
    double running = 0.0;
    int in_window = 0;
    for (int step = 0; step < c.steps; ++step) {
        const TrainBatch batch = sample_batch(world, vocab, c, rng);
        grads.fill(0.0f);
        const double loss = model.loss_and_grad(batch, &grads);
        if (!std::isfinite(loss)) {
            throw TrainingError("non-finite loss at step " + std::to_string(step));
        }
        const double gn = grad_norm(grads);
        if (!std::isfinite(gn)) {
            throw TrainingError("non-finite gradient at step " + std::to_string(step));
        }
        if (c.grad_clip > 0.0 && gn > c.grad_clip) {
            const float s = static_cast<float>(c.grad_clip / gn);
            for (auto & t : grads.tensors()) {
                for (auto & x : t.data) {
                    x *= s;
                }
            }
        }
        const double lr = lr_at(c, step);
        opt.step(model.params(), grads, lr);
        running += loss;
        ++in_window;
        if ((step + 1) % c.log_every == 0 || step + 1 == c.steps) {
            TrainLogRow row{step + 1, lr, running / in_window, gn, {}};
            if (on_log) {
                on_log(row);
            }
            log.push_back(std::move(row));
            running = 0.0;
            in_window = 0;
        }
    }
    return log;
}

void write_loss_csv(const std::string & path, const std::vector<TrainLogRow> & rows) {
    std::ofstream f(path);
    if (!f) {
        throw TrainingError("cannot write " + path);
    }
    f << "step,lr,loss,grad_norm";
    if (!rows.empty()) {
        for (const auto & [name, v] : rows.front().eval) {
            f << ",acc_" << name;
        }
    }
    f << '\n';
    for (const auto & r : rows) {
        f << r.step << ',' << r.lr << ',' << r.loss << ',' << r.grad_norm;
        for (const auto & [name, v] : r.eval) {
            f << ',' << v;
        }
        f << '\n';
    }
}

double evaluate_accuracy(const Transformer & model, const Vocabulary & vocab,
                         const std::vector<PromptInstance> & prompts) {
    if (prompts.empty()) {
        throw TrainingError("evaluate_accuracy: no prompts");
    }
    std::size_t hits = 0;
    for (const auto & p : prompts) {
        const auto ids = p.rendered.empty() ? render_prompt(p, vocab) : p.rendered;
        hits += greedy_next(model, ids) == vocab.id(p.target) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(prompts.size());
}

LoadedModel load_model(const std::string & path) {
    Checkpoint ck = load_checkpoint(path);
    LoadedModel out;
    out.world = build_world(ck.config.world_seed);
    try {
        out.vocab = Vocabulary::from_tokens(ck.vocab_tokens, out.world);
    } catch (const VocabularyError & e) {
        throw CheckpointError(std::string("checkpoint vocabulary does not match its world: ") + e.what());
    }
    out.model = Transformer(ck.config, std::move(ck.params));
    return out;
}

void save_model(const std::string & path, const Transformer & model, const Vocabulary & vocab,
                const nlohmann::json & extra) {
    Checkpoint ck{model.config(), vocab.tokens(), model.params(), extra};
    save_checkpoint(path, ck);
}

} // namespace conceptscope
