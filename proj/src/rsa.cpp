#include "conceptscope/rsa.hpp"

#include "conceptscope/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace conceptscope {

HeadOutputs collect_head_outputs(const Transformer & model, const std::vector<PromptInstance> & prompts,
                                 int workers) {
    std::vector<std::map<HeadId, HeadActivation>> captured(prompts.size());
    HookPlan plan;
    plan.capture_all = true;
    parallel_for(prompts.size(), workers, [&](std::size_t i) {
        if (prompts[i].rendered.empty()) {
            throw TaskError("collect_head_outputs: prompt is not rendered");
        }
        captured[i] = model.forward(prompts[i].rendered, plan).captured;
    });
    HeadOutputs out;
    for (const auto & h : all_heads(model.config())) {
        auto & v = out[h];
        v.reserve(prompts.size());
        for (auto & c : captured) {
            v.push_back(std::move(c.at(h).vector));
        }
    }
    return out;
}

Matrix build_rsm(const std::vector<Vec> & vectors) {
    const std::size_t n = vectors.size();
    if (n == 0) {
        return {};
    }
    const std::size_t d = vectors.front().size();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        if (vectors[i].size() != d) {
            throw NumericsError("build_rsm: vectors differ in dimension");
        }
        const double nv = norm(vectors[i]);
        if (nv == 0.0) {
            throw NumericsError("build_rsm: zero vector");
        }
        for (std::size_t k = 0; k < d; ++k) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = vectors[i][k] / nv;
        }
    }
    const Eigen::MatrixXd g = x * x.transpose();
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        out(i, i) = 1.0;
        for (std::size_t j = 0; j < i; ++j) {
            const double v = std::clamp(g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), -1.0, 1.0);
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

Matrix build_design_matrix(const std::vector<TaskAttributes> & attributes, Attribute a) {
    const std::size_t n = attributes.size();
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out(i, j) = attributes[i].value_of(a) == attributes[j].value_of(a) ? 1.0 : 0.0;
        }
    }
    return out;
}

double compute_phi(const Matrix & rsm, const Matrix & design) {
    if (rsm.rows() != design.rows() || !rsm.square() || !design.square()) {
        throw NumericsError("compute_phi: matrices must be square and the same size");
    }
    return spearman_rho(lower_triangle(rsm), lower_triangle(design));
}

namespace {

bool constant(const Vec & v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
}

} // namespace

PhiTable phi_table(const HeadOutputs & outputs, const std::vector<TaskAttributes> & attributes,
                   const std::vector<Attribute> & axes, int workers) {
    PhiTable table;
    table.attributes = axes;
    std::vector<Vec> design_tri;
    for (Attribute a : axes) {
        design_tri.push_back(lower_triangle(build_design_matrix(attributes, a)));
    }
    std::vector<HeadId> heads;
    for (const auto & [h, v] : outputs) {
        if (v.size() != attributes.size()) {
            throw NumericsError("phi_table: outputs and attributes differ in prompt count");
        }
        heads.push_back(h);
    }
    std::vector<std::map<Attribute, double>> rows(heads.size());
    parallel_for(heads.size(), workers, [&](std::size_t i) {
        const Vec tri = lower_triangle(build_rsm(outputs.at(heads[i])));
        for (std::size_t k = 0; k < axes.size(); ++k) {
            rows[i][axes[k]] = constant(design_tri[k]) || constant(tri)
                                   ? std::numeric_limits<double>::quiet_NaN()
                                   : spearman_rho(tri, design_tri[k]);
        }
    });
    for (std::size_t i = 0; i < heads.size(); ++i) {
        table.values.emplace(heads[i], std::move(rows[i]));
    }
    return table;
}

HeadOutputs select_prompts(const HeadOutputs & outputs, const std::vector<std::size_t> & indices) {
    HeadOutputs out;
    for (const auto & [h, v] : outputs) {
        auto & dst = out[h];
        for (std::size_t i : indices) {
            dst.push_back(v.at(i));
        }
    }
    return out;
}

void write_phi_csv(const std::string & path, const PhiTable & table) {
    std::ofstream f(path);
    if (!f) {
        throw std::runtime_error("cannot write " + path);
    }
    f << "layer,head,attribute,phi\n";
    f.precision(17);
    for (const auto & [h, row] : table.values) {
        for (Attribute a : table.attributes) {
            const double v = row.at(a);
            f << h.layer << ',' << h.head << ',' << to_string(a) << ',';
            if (std::isnan(v)) {
                f << "nan\n";
            } else {
                f << v << '\n';
            }
        }
    }
}

PhiTable read_phi_csv(const std::string & path) {
    std::ifstream f(path);
    if (!f) {
        throw std::runtime_error("cannot open " + path);
    }
    std::string line;
    std::getline(f, line);
    if (line != "layer,head,attribute,phi") {
        throw std::runtime_error("unexpected Φ table header in " + path);
    }
    PhiTable t;
    while (std::getline(f, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::istringstream is(line);
        std::string cell;
        while (std::getline(is, cell, ',')) {
            cells.push_back(cell);
        }
        if (cells.size() != 4) {
            throw std::runtime_error("malformed Φ row in " + path + ": " + line);
        }
        const HeadId h{std::stoi(cells[0]), std::stoi(cells[1])};
        const Attribute a = parse_attribute(cells[2]);
        if (std::find(t.attributes.begin(), t.attributes.end(), a) == t.attributes.end()) {
            t.attributes.push_back(a);
        }
        t.values[h][a] = cells[3] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(cells[3]);
    }
    return t;
}

std::vector<HeadId> top_heads_by_phi(const PhiTable & table, Attribute a, std::size_t k) {
    ScoreTable scores;
    for (const auto & [h, row] : table.values) {
        const double v = row.at(a);
        if (!std::isnan(v)) {
            scores.emplace(h, v);
        }
    }
    return top_heads_by_score(scores, k);
}

std::vector<Vec> per_prompt_vectors(const HeadOutputs & outputs, const std::vector<HeadId> & heads) {
    if (heads.empty()) {
        throw NumericsError("per_prompt_vectors: no heads");
    }
    std::vector<Vec> out = outputs.at(heads.front());
    for (std::size_t k = 1; k < heads.size(); ++k) {
        const auto & v = outputs.at(heads[k]);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] += v[i];
        }
    }
    return out;
}

Vec build_concept_vector(const HeadVectors & dataset_means, const std::vector<HeadId> & concept_heads) {
    return sum_head_vectors(dataset_means, concept_heads);
}

} // namespace conceptscope
