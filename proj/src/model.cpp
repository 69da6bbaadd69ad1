#include "conceptscope/model.hpp"

#include "conceptscope/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <tuple>

namespace conceptscope {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<float, 1, Eigen::Dynamic>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;
using CVecMap = Eigen::Map<const RowVec>;
using VecMap = Eigen::Map<RowVec>;
using Strided = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using CStrided = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

namespace {

constexpr double kRmsEps = 1e-5;
constexpr int kTensorsPerLayer = 8;

enum Slot { kLn1 = 0, kWqkv, kWo, kLn2, kW1, kB1, kW2, kB2 };

const char * slot_name(int s) {
    static const char * names[] = {"ln1", "wqkv", "wo", "ln2", "w1", "b1", "w2", "b2"};
    return names[s];
}

constexpr float kGeluK = 0.7978845608028654f;
constexpr float kGeluC = 0.044715f;

template <typename Derived>
auto gelu_inner(const Eigen::ArrayBase<Derived> & u) {
    return (kGeluK * (u + kGeluC * u.cube())).tanh();
}

template <typename In, typename Out>
void gelu(const Eigen::MatrixBase<In> & u, Eigen::MatrixBase<Out> & out) {
    const auto a = u.array();
    out.array() = 0.5f * a * (1.0f + gelu_inner(a));
}

// Multiplies grad in place by gelu'(u).
template <typename In, typename Out>
void gelu_backward(const Eigen::MatrixBase<In> & u, Eigen::MatrixBase<Out> & grad) {
    const auto a = u.array();
    const auto t = gelu_inner(a).eval();
    grad.array() *= 0.5f * (1.0f + t) + 0.5f * a * (1.0f - t.square()) * kGeluK * (1.0f + 3.0f * kGeluC * a.square());
}

// y = g * x / rms(x); returns 1/rms.
float rms_norm_row(const float * x, const float * g, float * y, int d) {
    double ss = 0.0;
    for (int i = 0; i < d; ++i) {
        ss += static_cast<double>(x[i]) * x[i];
    }
    const double r = 1.0 / std::sqrt(ss / d + kRmsEps);
    for (int i = 0; i < d; ++i) {
        y[i] = static_cast<float>(static_cast<double>(x[i]) * r) * g[i];
    }
    return static_cast<float>(r);
}

// Accumulates dx (+=) and dg (+=) for y = g * x * r.
void rms_norm_backward_row(const float * x, const float * g, float r, const float * dy, float * dx, float * dg,
                           int d) {
    double dot = 0.0;
    for (int i = 0; i < d; ++i) {
        dot += static_cast<double>(g[i]) * dy[i] * x[i];
    }
    const double rd = r;
    const double coef = rd * rd * rd * dot / d;
    for (int i = 0; i < d; ++i) {
        dx[i] += static_cast<float>(rd * g[i] * dy[i] - x[i] * coef);
        dg[i] += static_cast<float>(static_cast<double>(dy[i]) * x[i] * rd);
    }
}

struct Rope {
    int half = 0;
    std::vector<float> cos;
    std::vector<float> sin;

    Rope(int max_ctx, int d_head, double base) : half(d_head / 2) {
        cos.resize(static_cast<std::size_t>(max_ctx * half));
        sin.resize(cos.size());
        for (int p = 0; p < max_ctx; ++p) {
            for (int i = 0; i < half; ++i) {
                const double freq = std::pow(base, -2.0 * i / d_head);
                const double a = p * freq;
                cos[static_cast<std::size_t>(p * half + i)] = static_cast<float>(std::cos(a));
                sin[static_cast<std::size_t>(p * half + i)] = static_cast<float>(std::sin(a));
            }
        }
    }

    void rotate(float * v, int pos) const {
        const float * c = &cos[static_cast<std::size_t>(pos * half)];
        const float * s = &sin[static_cast<std::size_t>(pos * half)];
        for (int i = 0; i < half; ++i) {
            const float a = v[i];
            const float b = v[i + half];
            v[i] = a * c[i] - b * s[i];
            v[i + half] = a * s[i] + b * c[i];
        }
    }

    void unrotate(float * v, int pos) const {
        const float * c = &cos[static_cast<std::size_t>(pos * half)];
        const float * s = &sin[static_cast<std::size_t>(pos * half)];
        for (int i = 0; i < half; ++i) {
            const float a = v[i];
            const float b = v[i + half];
            v[i] = a * c[i] + b * s[i];
            v[i + half] = -a * s[i] + b * c[i];
        }
    }
};

const Rope & rope_for(const ModelConfig & c) {
    thread_local std::vector<std::pair<std::tuple<int, int, double>, std::unique_ptr<Rope>>> cache;
    const auto key = std::make_tuple(c.max_context, c.d_head(), c.rope_base);
    for (const auto & [k, r] : cache) {
        if (k == key) {
            return *r;
        }
    }
    cache.emplace_back(key, std::make_unique<Rope>(c.max_context, c.d_head(), c.rope_base));
    return *cache.back().second;
}

// Softmax over row[0..len), in place.
void softmax_row(float * row, int len) {
    Eigen::Map<Eigen::ArrayXf> r(row, len);
    r = (r - r.maxCoeff()).exp();
    r *= static_cast<float>(1.0 / r.cast<double>().sum());
}

} // namespace

void ModelConfig::validate() const {
    if (n_layers <= 0 || n_heads <= 0 || d_model <= 0) {
        throw ModelError("ModelConfig: sizes must be positive");
    }
    if (d_model % n_heads != 0) {
        throw ModelError("ModelConfig: d_model must be divisible by n_heads");
    }
    if (d_head() % 2 != 0) {
        throw ModelError("ModelConfig: head dimension must be even for rotary encoding");
    }
    if (vocab_size <= 0 || max_context <= 0) {
        throw ModelError("ModelConfig: vocab_size and max_context must be positive");
    }
}

nlohmann::json to_json(const ModelConfig & c) {
    return {{"n_layers", c.n_layers},       {"n_heads", c.n_heads},   {"d_model", c.d_model},
            {"vocab_size", c.vocab_size},   {"max_context", c.max_context}, {"seed", c.seed},
            {"world_seed", c.world_seed},   {"rope_base", c.rope_base}};
}

ModelConfig model_config_from_json(const nlohmann::json & j) {
    ModelConfig c;
    c.n_layers = j.value("n_layers", c.n_layers);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.d_model = j.value("d_model", c.d_model);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.max_context = j.value("max_context", c.max_context);
    c.seed = j.value("seed", c.seed);
    c.world_seed = j.value("world_seed", c.world_seed);
    c.rope_base = j.value("rope_base", c.rope_base);
    return c;
}

std::string to_string(const HeadId & h) {
    return "L" + std::to_string(h.layer) + "H" + std::to_string(h.head);
}

std::vector<HeadId> all_heads(const ModelConfig & c) {
    std::vector<HeadId> out;
    for (int l = 0; l < c.n_layers; ++l) {
        for (int h = 0; h < c.n_heads; ++h) {
            out.push_back({l, h});
        }
    }
    return out;
}

std::size_t TrainBatch::n_labels() const {
    std::size_t n = 0;
    for (const auto & l : labels) {
        n += l.size();
    }
    return n;
}

std::size_t TrainBatch::n_tokens() const {
    std::size_t n = 0;
    for (const auto & s : sequences) {
        n += s.size();
    }
    return n;
}

FloatBuffer build_structured_embedding(const Vocabulary & vocab, int d_model, std::uint64_t seed) {
    Rng rng = make_rng(seed, "embedding");
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d_model)));
    const auto code = [&]() {
        std::vector<float> v(static_cast<std::size_t>(d_model));
        for (auto & x : v) {
            x = static_cast<float>(normal(rng));
        }
        return v;
    };
    const auto codes = [&](std::size_t n) {
        std::vector<std::vector<float>> out;
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back(code());
        }
        return out;
    };

    int max_stem = 0;
    int max_cat = 0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        const auto & f = vocab.features(static_cast<TokenId>(i));
        max_stem = std::max(max_stem, f.stem + 1);
        max_cat = std::max(max_cat, f.category + 1);
    }
    const auto kind_codes = codes(9);
    const auto lang_codes = codes(5);
    const auto stem_codes = codes(static_cast<std::size_t>(max_stem));
    const auto cat_codes = codes(static_cast<std::size_t>(max_cat));
    const auto pol_codes = codes(2);

    FloatBuffer table(vocab.size() * static_cast<std::size_t>(d_model), 0.0f);
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        const auto & f = vocab.features(static_cast<TokenId>(i));
        float * row = &table[i * static_cast<std::size_t>(d_model)];
        int n_codes = 0;
        const auto add = [&](const std::vector<float> & c) {
            for (int k = 0; k < d_model; ++k) {
                row[k] += c[static_cast<std::size_t>(k)];
            }
            ++n_codes;
        };
        add(kind_codes[static_cast<std::size_t>(f.kind)]);
        if (f.kind == TokenKind::Content || f.kind == TokenKind::CategoryWord) {
            add(lang_codes[static_cast<std::size_t>(f.language)]);
            add(cat_codes[static_cast<std::size_t>(f.category)]);
            if (f.kind == TokenKind::Content) {
                add(stem_codes[static_cast<std::size_t>(f.stem)]);
                add(pol_codes[f.polarity > 0 ? 0 : 1]);
            }
        } else {
            add(code());
        }
        const float inv = 1.0f / std::sqrt(static_cast<float>(n_codes));
        for (int k = 0; k < d_model; ++k) {
            row[k] *= inv;
        }
    }
    return table;
}

struct Transformer::Impl {
    const ModelConfig & c;
    const ParamSet & p;

    const float * t(int layer, Slot s) const {
        return p.tensors()[static_cast<std::size_t>(1 + layer * kTensorsPerLayer + s)].data.data();
    }
    const float * embedding() const { return p.tensors().front().data.data(); }
    const float * ln_final() const { return p.tensors().back().data.data(); }

    static float * g(ParamSet & grads, int layer, Slot s) {
        return grads.tensors()[static_cast<std::size_t>(1 + layer * kTensorsPerLayer + s)].data.data();
    }

    struct LayerCache {
        RowMat x_in, n1, qkv, o, x_mid, n2, u, act;
        FloatBuffer r1, r2;
        std::vector<FloatBuffer> probs; // [seq * n_heads + head], T_b x T_b
    };

    struct BatchCache {
        std::vector<int> offsets;
        std::vector<int> lengths;
        std::vector<LayerCache> layers;
        RowMat x_final;
    };

    // Runs every layer over the packed sequences.
    BatchCache run(const std::vector<std::vector<TokenId>> & seqs) const {
        const int d = c.d_model;
        const int dh = c.d_head();
        const int H = c.n_heads;
        const Rope & rope = rope_for(c);
        const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

        BatchCache bc;
        int total = 0;
        for (const auto & s : seqs) {
            if (s.empty()) {
                throw ModelError("forward: empty sequence");
            }
            if (static_cast<int>(s.size()) > c.max_context) {
                throw ModelError("forward: context overflow (" + std::to_string(s.size()) + " > " +
                                 std::to_string(c.max_context) + ")");
            }
            bc.offsets.push_back(total);
            bc.lengths.push_back(static_cast<int>(s.size()));
            total += static_cast<int>(s.size());
        }

        RowMat x(total, d);
        for (std::size_t b = 0; b < seqs.size(); ++b) {
            for (int tpos = 0; tpos < bc.lengths[b]; ++tpos) {
                const TokenId id = seqs[b][static_cast<std::size_t>(tpos)];
                if (id < 0 || id >= c.vocab_size) {
                    throw ModelError("forward: token id out of range");
                }
                x.row(bc.offsets[b] + tpos) = CVecMap(embedding() + static_cast<std::ptrdiff_t>(id) * d, d);
            }
        }

        bc.layers.resize(static_cast<std::size_t>(c.n_layers));
        for (int l = 0; l < c.n_layers; ++l) {
            LayerCache & lc = bc.layers[static_cast<std::size_t>(l)];
            lc.x_in = x;
            lc.n1.resize(total, d);
            lc.r1.resize(static_cast<std::size_t>(total));
            for (int r = 0; r < total; ++r) {
                lc.r1[static_cast<std::size_t>(r)] = rms_norm_row(&x(r, 0), t(l, kLn1), &lc.n1(r, 0), d);
            }
            lc.qkv.noalias() = lc.n1 * CMatMap(t(l, kWqkv), d, 3 * d);
            for (std::size_t b = 0; b < seqs.size(); ++b) {
                for (int tpos = 0; tpos < bc.lengths[b]; ++tpos) {
                    float * row = &lc.qkv(bc.offsets[b] + tpos, 0);
                    for (int h = 0; h < H; ++h) {
                        rope.rotate(row + h * dh, tpos);
                        rope.rotate(row + d + h * dh, tpos);
                    }
                }
            }
            lc.o.setZero(total, d);
            lc.probs.resize(seqs.size() * static_cast<std::size_t>(H));
            for (std::size_t b = 0; b < seqs.size(); ++b) {
                const int T = bc.lengths[b];
                const int off = bc.offsets[b];
                for (int h = 0; h < H; ++h) {
                    CStrided Q(&lc.qkv(off, h * dh), T, dh, Eigen::OuterStride<>(3 * d));
                    CStrided K(&lc.qkv(off, d + h * dh), T, dh, Eigen::OuterStride<>(3 * d));
                    CStrided V(&lc.qkv(off, 2 * d + h * dh), T, dh, Eigen::OuterStride<>(3 * d));
                    auto & pbuf = lc.probs[b * static_cast<std::size_t>(H) + static_cast<std::size_t>(h)];
                    pbuf.assign(static_cast<std::size_t>(T * T), 0.0f);
                    MatMap P(pbuf.data(), T, T);
                    P.noalias() = (Q * K.transpose()) * scale;
                    for (int i = 0; i < T; ++i) {
                        softmax_row(&P(i, 0), i + 1);
                        for (int j = i + 1; j < T; ++j) {
                            P(i, j) = 0.0f;
                        }
                    }
                    Strided O(&lc.o(off, h * dh), T, dh, Eigen::OuterStride<>(d));
                    O.noalias() = P * V;
                }
            }
            lc.x_mid = x;
            lc.x_mid.noalias() += lc.o * CMatMap(t(l, kWo), d, d);
            lc.n2.resize(total, d);
            lc.r2.resize(static_cast<std::size_t>(total));
            for (int r = 0; r < total; ++r) {
                lc.r2[static_cast<std::size_t>(r)] = rms_norm_row(&lc.x_mid(r, 0), t(l, kLn2), &lc.n2(r, 0), d);
            }
            lc.u.noalias() = lc.n2 * CMatMap(t(l, kW1), d, c.d_mlp());
            lc.u.rowwise() += CVecMap(t(l, kB1), c.d_mlp());
            lc.act.resize(total, c.d_mlp());
            gelu(lc.u, lc.act);
            x = lc.x_mid;
            x.noalias() += lc.act * CMatMap(t(l, kW2), c.d_mlp(), d);
            x.rowwise() += CVecMap(t(l, kB2), d);
        }
        bc.x_final = std::move(x);
        return bc;
    }

    void final_logits(const float * x, float * normed, float * logits) const {
        const int d = c.d_model;
        rms_norm_row(x, ln_final(), normed, d);
        VecMap(logits, c.vocab_size).noalias() =
            CVecMap(normed, d) * CMatMap(embedding(), c.vocab_size, d).transpose();
    }

    double loss_and_grad(const TrainBatch & batch, ParamSet * grads) const {
        const int d = c.d_model;
        const int dh = c.d_head();
        const int H = c.n_heads;
        const int V = c.vocab_size;
        const Rope & rope = rope_for(c);
        const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

        if (batch.labels.size() != batch.sequences.size()) {
            throw ModelError("loss_and_grad: labels/sequences size mismatch");
        }
        BatchCache bc = run(batch.sequences);
        const int total = static_cast<int>(bc.x_final.rows());

        std::vector<int> rows;
        std::vector<TokenId> targets;
        for (std::size_t b = 0; b < batch.sequences.size(); ++b) {
            for (const auto & [pos, tgt] : batch.labels[b]) {
                if (pos < 0 || pos >= bc.lengths[b]) {
                    throw ModelError("loss_and_grad: label position out of range");
                }
                rows.push_back(bc.offsets[b] + pos);
                targets.push_back(tgt);
            }
        }
        const int K = static_cast<int>(rows.size());
        if (K == 0) {
            throw ModelError("loss_and_grad: batch has no labels");
        }
        RowMat normed(K, d);
        FloatBuffer rf(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            rf[static_cast<std::size_t>(k)] = rms_norm_row(&bc.x_final(rows[static_cast<std::size_t>(k)], 0),
                                                           ln_final(), &normed(k, 0), d);
        }
        CMatMap E(embedding(), V, d);
        RowMat logits = normed * E.transpose();
        double loss = 0.0;
        RowMat dlogits(K, V);
        for (int k = 0; k < K; ++k) {
            float * row = &logits(k, 0);
            const float mx = *std::max_element(row, row + V);
            double sum = 0.0;
            for (int v = 0; v < V; ++v) {
                sum += std::exp(static_cast<double>(row[v]) - mx);
            }
            const double lse = mx + std::log(sum);
            const TokenId tgt = targets[static_cast<std::size_t>(k)];
            loss += lse - row[tgt];
            for (int v = 0; v < V; ++v) {
                dlogits(k, v) = static_cast<float>(std::exp(static_cast<double>(row[v]) - lse) / K);
            }
            dlogits(k, tgt) -= 1.0f / static_cast<float>(K);
        }
        loss /= K;
        if (grads == nullptr) {
            return loss;
        }

        RowMat dnormed = dlogits * E;
        RowMat dx = RowMat::Zero(total, d);
        float * dgf = grads->tensors().back().data.data();
        for (int k = 0; k < K; ++k) {
            const int r = rows[static_cast<std::size_t>(k)];
            // Recover the pre-gain normalized input from x directly.
            rms_norm_backward_row(&bc.x_final(r, 0), ln_final(), rf[static_cast<std::size_t>(k)], &dnormed(k, 0),
                                  &dx(r, 0), dgf, d);
        }

        for (int l = c.n_layers - 1; l >= 0; --l) {
            const LayerCache & lc = bc.layers[static_cast<std::size_t>(l)];
            // MLP
            MatMap(g(*grads, l, kW2), c.d_mlp(), d).noalias() += lc.act.transpose() * dx;
            VecMap(g(*grads, l, kB2), d) += dx.colwise().sum();
            RowMat du = dx * CMatMap(t(l, kW2), c.d_mlp(), d).transpose();
            gelu_backward(lc.u, du);
            MatMap(g(*grads, l, kW1), d, c.d_mlp()).noalias() += lc.n2.transpose() * du;
            VecMap(g(*grads, l, kB1), c.d_mlp()) += du.colwise().sum();
            RowMat dn2 = du * CMatMap(t(l, kW1), d, c.d_mlp()).transpose();
            RowMat dmid = dx;
            for (int r = 0; r < total; ++r) {
                rms_norm_backward_row(&lc.x_mid(r, 0), t(l, kLn2), lc.r2[static_cast<std::size_t>(r)], &dn2(r, 0),
                                      &dmid(r, 0), g(*grads, l, kLn2), d);
            }
            // Attention
            MatMap(g(*grads, l, kWo), d, d).noalias() += lc.o.transpose() * dmid;
            RowMat d_o = dmid * CMatMap(t(l, kWo), d, d).transpose();
            RowMat dqkv = RowMat::Zero(total, 3 * d);
            for (std::size_t b = 0; b < bc.lengths.size(); ++b) {
                const int T = bc.lengths[b];
                const int off = bc.offsets[b];
                for (int h = 0; h < H; ++h) {
                    CStrided Q(&lc.qkv(off, h * dh), T, dh, Eigen::OuterStride<>(3 * d));
                    CStrided Kt(&lc.qkv(off, d + h * dh), T, dh, Eigen::OuterStride<>(3 * d));
                    CStrided Vt(&lc.qkv(off, 2 * d + h * dh), T, dh, Eigen::OuterStride<>(3 * d));
                    CMatMap P(lc.probs[b * static_cast<std::size_t>(H) + static_cast<std::size_t>(h)].data(), T, T);
                    CStrided dO(&d_o(off, h * dh), T, dh, Eigen::OuterStride<>(d));
                    Strided dQ(&dqkv(off, h * dh), T, dh, Eigen::OuterStride<>(3 * d));
                    Strided dK(&dqkv(off, d + h * dh), T, dh, Eigen::OuterStride<>(3 * d));
                    Strided dV(&dqkv(off, 2 * d + h * dh), T, dh, Eigen::OuterStride<>(3 * d));
                    dV.noalias() = P.transpose() * dO;
                    RowMat dS = dO * Vt.transpose();
                    for (int i = 0; i < T; ++i) {
                        double rowdot = 0.0;
                        for (int j = 0; j <= i; ++j) {
                            rowdot += static_cast<double>(P(i, j)) * dS(i, j);
                        }
                        for (int j = 0; j <= i; ++j) {
                            dS(i, j) = static_cast<float>(P(i, j) * (dS(i, j) - rowdot)) * scale;
                        }
                        for (int j = i + 1; j < T; ++j) {
                            dS(i, j) = 0.0f;
                        }
                    }
                    dQ.noalias() = dS * Kt;
                    dK.noalias() = dS.transpose() * Q;
                }
                for (int tpos = 0; tpos < T; ++tpos) {
                    float * row = &dqkv(off + tpos, 0);
                    for (int h = 0; h < H; ++h) {
                        rope.unrotate(row + h * dh, tpos);
                        rope.unrotate(row + d + h * dh, tpos);
                    }
                }
            }
            MatMap(g(*grads, l, kWqkv), d, 3 * d).noalias() += lc.n1.transpose() * dqkv;
            RowMat dn1 = dqkv * CMatMap(t(l, kWqkv), d, 3 * d).transpose();
            dx = dmid;
            for (int r = 0; r < total; ++r) {
                rms_norm_backward_row(&lc.x_in(r, 0), t(l, kLn1), lc.r1[static_cast<std::size_t>(r)], &dn1(r, 0),
                                      &dx(r, 0), g(*grads, l, kLn1), d);
            }
        }
        return loss;
    }

    ForwardResult decode_last(const PrefixCache & cache, TokenId last, const HookPlan & plan) const {
        const int d = c.d_model;
        const int dh = c.d_head();
        const int H = c.n_heads;
        const int pos = static_cast<int>(cache.ids.size());
        const Rope & rope = rope_for(c);
        const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
        if (pos + 1 > c.max_context) {
            throw ModelError("forward: context overflow");
        }
        if (last < 0 || last >= c.vocab_size) {
            throw ModelError("forward: token id out of range");
        }
        for (const auto & [head, v] : plan.patches) {
            if (head.layer < 0 || head.layer >= c.n_layers || head.head < 0 || head.head >= H) {
                throw ModelError("malformed plan: patch head out of range");
            }
            if (static_cast<int>(v.size()) != d) {
                throw ModelError("malformed plan: patch vector dimension mismatch");
            }
        }
        for (const auto & inj : plan.injections) {
            if (inj.layer < 0 || inj.layer >= c.n_layers) {
                throw ModelError("malformed plan: injection layer out of range");
            }
            if (static_cast<int>(inj.vector.size()) != d) {
                throw ModelError("malformed plan: injection vector dimension mismatch");
            }
        }

        ForwardResult res;
        RowVec h = CVecMap(embedding() + static_cast<std::ptrdiff_t>(last) * d, d);
        const auto to_vec = [](const RowVec & v) {
            return Vec(std::vector<double>(v.data(), v.data() + v.size()));
        };
        res.residual.push_back(to_vec(h));

        RowVec n(d);
        RowVec qkv(3 * d);
        RowVec head_out(d);
        RowVec attn_sum(d);
        FloatBuffer scores(static_cast<std::size_t>(pos + 1));
        for (int l = 0; l < c.n_layers; ++l) {
            rms_norm_row(h.data(), t(l, kLn1), n.data(), d);
            qkv.noalias() = n * CMatMap(t(l, kWqkv), d, 3 * d);
            for (int hh = 0; hh < H; ++hh) {
                rope.rotate(qkv.data() + hh * dh, pos);
                rope.rotate(qkv.data() + d + hh * dh, pos);
            }
            attn_sum.setZero();
            const float * keys = pos > 0 ? cache.keys[static_cast<std::size_t>(l)].data() : nullptr;
            const float * vals = pos > 0 ? cache.values[static_cast<std::size_t>(l)].data() : nullptr;
            for (int hh = 0; hh < H; ++hh) {
                const HeadId id{l, hh};
                const auto patched = plan.patches.find(id);
                if (patched != plan.patches.end()) {
                    for (int i = 0; i < d; ++i) {
                        head_out[i] = static_cast<float>(patched->second[static_cast<std::size_t>(i)]);
                    }
                } else {
                    const float * q = qkv.data() + hh * dh;
                    for (int j = 0; j < pos; ++j) {
                        const float * k = keys + static_cast<std::ptrdiff_t>(j) * d + hh * dh;
                        scores[static_cast<std::size_t>(j)] = CVecMap(q, dh).dot(CVecMap(k, dh)) * scale;
                    }
                    scores[static_cast<std::size_t>(pos)] = CVecMap(q, dh).dot(CVecMap(qkv.data() + d + hh * dh, dh)) * scale;
                    softmax_row(scores.data(), pos + 1);
                    RowVec o = RowVec::Zero(dh);
                    for (int j = 0; j < pos; ++j) {
                        o += scores[static_cast<std::size_t>(j)] * CVecMap(vals + static_cast<std::ptrdiff_t>(j) * d + hh * dh, dh);
                    }
                    o += scores[static_cast<std::size_t>(pos)] * CVecMap(qkv.data() + 2 * d + hh * dh, dh);
                    head_out.noalias() = o * CMatMap(t(l, kWo) + static_cast<std::ptrdiff_t>(hh) * dh * d, dh, d);
                }
                if (plan.capture_all || plan.captures.contains(id)) {
                    res.captured.emplace(id, HeadActivation{id, to_vec(head_out)});
                }
                attn_sum += head_out;
            }
            RowVec mid = h + attn_sum;
            rms_norm_row(mid.data(), t(l, kLn2), n.data(), d);
            RowVec u = n * CMatMap(t(l, kW1), d, c.d_mlp());
            u += CVecMap(t(l, kB1), c.d_mlp());
            RowVec act(c.d_mlp());
            gelu(u, act);
            RowVec m = act * CMatMap(t(l, kW2), c.d_mlp(), d);
            m += CVecMap(t(l, kB2), d);
            h = mid + m;
            for (const auto & inj : plan.injections) {
                if (inj.layer == l) {
                    for (int i = 0; i < d; ++i) {
                        h[i] = static_cast<float>(h[i] + inj.scale * inj.vector[static_cast<std::size_t>(i)]);
                    }
                }
            }
            res.mlp_out.push_back(to_vec(m));
            res.residual.push_back(to_vec(h));
        }
        res.logits.resize(static_cast<std::size_t>(c.vocab_size));
        RowVec normed(d);
        final_logits(h.data(), normed.data(), res.logits.data());
        return res;
    }
};

Transformer::Transformer(ModelConfig config, ParamSet params) : config_(config), params_(std::move(params)) {
    config_.validate();
    const std::size_t expected = 2 + static_cast<std::size_t>(config_.n_layers * kTensorsPerLayer);
    if (params_.tensors().size() != expected) {
        throw ModelError("Transformer: unexpected tensor count");
    }
    const auto & emb = params_.tensors().front();
    if (emb.name != "tok_embedding" ||
        emb.numel() != static_cast<std::size_t>(config_.vocab_size) * static_cast<std::size_t>(config_.d_model)) {
        throw ModelError("Transformer: embedding tensor does not match config");
    }
}

bool Transformer::trainable(const std::string & tensor_name) {
    return tensor_name != "tok_embedding";
}

Transformer Transformer::initialize(const ModelConfig & config, const Vocabulary & vocab) {
    ModelConfig cfg = config;
    cfg.vocab_size = static_cast<int>(vocab.size());
    cfg.validate();
    const int d = cfg.d_model;
    const int m = cfg.d_mlp();
    ParamSet ps;
    ps.add("tok_embedding", {cfg.vocab_size, d}).data = build_structured_embedding(vocab, d, cfg.world_seed);

    Rng rng = make_rng(cfg.seed, "init");
    const double std_in = 0.02;
    const double std_out = 0.02 / std::sqrt(2.0 * cfg.n_layers);
    const auto gaussian = [&](Tensor & tt, double sd) {
        std::normal_distribution<double> nd(0.0, sd);
        for (auto & x : tt.data) {
            x = static_cast<float>(nd(rng));
        }
    };
    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string pre = "layers." + std::to_string(l) + ".";
        ps.add(pre + slot_name(kLn1), {d}, 1.0f);
        gaussian(ps.add(pre + slot_name(kWqkv), {d, 3 * d}), std_in);
        gaussian(ps.add(pre + slot_name(kWo), {d, d}), std_out);
        ps.add(pre + slot_name(kLn2), {d}, 1.0f);
        gaussian(ps.add(pre + slot_name(kW1), {d, m}), std_in);
        ps.add(pre + slot_name(kB1), {m}, 0.0f);
        gaussian(ps.add(pre + slot_name(kW2), {m, d}), std_out);
        ps.add(pre + slot_name(kB2), {d}, 0.0f);
    }
    ps.add("ln_final", {d}, 1.0f);
    return Transformer(cfg, std::move(ps));
}

PrefixCache Transformer::prefill(std::span<const TokenId> prefix) const {
    PrefixCache cache;
    cache.ids.assign(prefix.begin(), prefix.end());
    cache.keys.resize(static_cast<std::size_t>(config_.n_layers));
    cache.values.resize(static_cast<std::size_t>(config_.n_layers));
    if (prefix.empty()) {
        return cache;
    }
    const Impl impl{config_, params_};
    const auto bc = impl.run({cache.ids});
    const int d = config_.d_model;
    const int T = static_cast<int>(prefix.size());
    for (int l = 0; l < config_.n_layers; ++l) {
        const auto & qkv = bc.layers[static_cast<std::size_t>(l)].qkv;
        auto & k = cache.keys[static_cast<std::size_t>(l)];
        auto & v = cache.values[static_cast<std::size_t>(l)];
        k.resize(static_cast<std::size_t>(T * d));
        v.resize(static_cast<std::size_t>(T * d));
        for (int r = 0; r < T; ++r) {
            std::copy_n(&qkv(r, d), d, &k[static_cast<std::size_t>(r * d)]);
            std::copy_n(&qkv(r, 2 * d), d, &v[static_cast<std::size_t>(r * d)]);
        }
    }
    return cache;
}

ForwardResult Transformer::decode_last(const PrefixCache & cache, TokenId last, const HookPlan & plan) const {
    const Impl impl{config_, params_};
    return impl.decode_last(cache, last, plan);
}

ForwardResult Transformer::forward(std::span<const TokenId> ids, const HookPlan & plan) const {
    if (ids.empty()) {
        throw ModelError("forward: empty input");
    }
    if (static_cast<int>(ids.size()) > config_.max_context) {
        throw ModelError("forward: context overflow (" + std::to_string(ids.size()) + " > " +
                         std::to_string(config_.max_context) + ")");
    }
    const PrefixCache cache = prefill(ids.first(ids.size() - 1));
    return decode_last(cache, ids.back(), plan);
}

std::vector<float> Transformer::sequence_logits(std::span<const TokenId> ids) const {
    const Impl impl{config_, params_};
    const auto bc = impl.run({std::vector<TokenId>(ids.begin(), ids.end())});
    const int T = static_cast<int>(ids.size());
    std::vector<float> out(static_cast<std::size_t>(T) * static_cast<std::size_t>(config_.vocab_size));
    FloatBuffer normed(static_cast<std::size_t>(config_.d_model));
    for (int r = 0; r < T; ++r) {
        impl.final_logits(&bc.x_final(r, 0), normed.data(), &out[static_cast<std::size_t>(r) * static_cast<std::size_t>(config_.vocab_size)]);
    }
    return out;
}

double Transformer::loss_and_grad(const TrainBatch & batch, ParamSet * grads) const {
    const Impl impl{config_, params_};
    return impl.loss_and_grad(batch, grads);
}

std::vector<double> softmax(std::span<const float> logits) {
    std::vector<double> p(logits.size());
    if (logits.empty()) {
        return p;
    }
    const float mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(static_cast<double>(logits[i]) - mx);
        sum += p[i];
    }
    for (auto & x : p) {
        x /= sum;
    }
    return p;
}

TokenId argmax(std::span<const float> logits) {
    if (logits.empty()) {
        throw ModelError("argmax: empty logits");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) {
            best = i;
        }
    }
    return static_cast<TokenId>(best);
}

double next_token_prob(const Transformer & model, std::span<const TokenId> ids, const HookPlan & plan,
                       TokenId target) {
    const auto res = model.forward(ids, plan);
    if (target < 0 || static_cast<std::size_t>(target) >= res.logits.size()) {
        throw ModelError("next_token_prob: target id out of range");
    }
    return softmax(res.logits)[static_cast<std::size_t>(target)];
}

TokenId greedy_next(const Transformer & model, std::span<const TokenId> ids, const HookPlan & plan) {
    return argmax(model.forward(ids, plan).logits);
}

} // namespace conceptscope
