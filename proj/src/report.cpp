#include "conceptscope/pipeline.hpp"
#include "conceptscope/rsa.hpp"
#include "conceptscope/svg.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace conceptscope {

namespace fs = std::filesystem;
using acceptance::Check;

namespace {

std::vector<std::string> split_csv(const std::string & line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        out.push_back(cell);
    }
    return out;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const fs::path & path, const std::string & producer) {
    std::ifstream f(path);
    if (!f) {
        throw PipelineError("missing " + path.string() + "; run `conceptscope " + producer + "` first");
    }
    CsvTable t;
    std::string line;
    if (std::getline(f, line)) {
        t.header = split_csv(line);
    }
    while (std::getline(f, line)) {
        if (!line.empty()) {
            t.rows.push_back(split_csv(line));
        }
    }
    return t;
}

double parse_double(const std::string & s) {
    if (s == "nan") {
        return std::nan("");
    }
    return std::stod(s);
}

struct LabelledMatrix {
    std::vector<std::string> labels;
    Matrix values;
};

LabelledMatrix read_matrix(const fs::path & path, const std::string & producer) {
    const CsvTable t = read_csv(path, producer);
    LabelledMatrix m{{t.header.begin() + 1, t.header.end()}, Matrix(t.rows.size(), t.header.size() - 1)};
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t c = 1; c < t.rows[r].size(); ++c) {
            m.values(r, c - 1) = parse_double(t.rows[r][c]);
        }
    }
    return m;
}

void write_matrix(const fs::path & path, const LabelledMatrix & m) {
    std::ostringstream os;
    os << "row";
    for (const auto & l : m.labels) {
        os << ',' << l;
    }
    os << '\n';
    for (std::size_t r = 0; r < m.values.rows(); ++r) {
        os << m.labels[r];
        for (std::size_t c = 0; c < m.values.cols(); ++c) {
            os << ',' << svg::fmt(m.values(r, c));
        }
        os << '\n';
    }
    svg::write_file(path.string(), os.str());
}

// Labels look like "<group>#<index>" or "<group>:<suffix>".
std::string group_of(const std::string & label) {
    const auto pos = label.find_first_of("#:");
    return pos == std::string::npos ? label : label.substr(0, pos);
}

std::vector<svg::Group> groups_of(const std::vector<std::string> & labels) {
    std::vector<svg::Group> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const std::string g = group_of(labels[i]);
        if (out.empty() || out.back().label != g) {
            out.push_back({g, i, i});
        }
        out.back().end = i + 1;
    }
    return out;
}

// Keeps the first `per_group` rows/cols of each group.
LabelledMatrix downsample(const LabelledMatrix & m, std::size_t per_group) {
    std::vector<std::size_t> keep;
    for (const auto & g : groups_of(m.labels)) {
        for (std::size_t i = g.begin; i < std::min(g.end, g.begin + per_group); ++i) {
            keep.push_back(i);
        }
    }
    LabelledMatrix out{{}, Matrix(keep.size(), keep.size())};
    for (std::size_t r = 0; r < keep.size(); ++r) {
        out.labels.push_back(m.labels[keep[r]]);
        for (std::size_t c = 0; c < keep.size(); ++c) {
            out.values(r, c) = m.values(keep[r], keep[c]);
        }
    }
    return out;
}

LabelledMatrix restrict_to(const LabelledMatrix & m, const std::vector<std::string> & labels) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        index[m.labels[i]] = i;
    }
    LabelledMatrix out{labels, Matrix(labels.size(), labels.size())};
    for (std::size_t r = 0; r < labels.size(); ++r) {
        for (std::size_t c = 0; c < labels.size(); ++c) {
            out.values(r, c) = m.values(index.at(labels[r]), index.at(labels[c]));
        }
    }
    return out;
}

void emit_heatmap(const fs::path & dir, const std::string & stem, const std::string & title, const LabelledMatrix & m,
                  bool annotate = false) {
    write_matrix(dir / (stem + ".csv"), m);
    svg::Heatmap h;
    h.title = title;
    h.values = m.values;
    const auto groups = groups_of(m.labels);
    h.row_groups = groups;
    h.col_groups = groups;
    if (m.labels.size() <= 40) {
        h.row_labels = m.labels;
        h.col_labels = m.labels;
    }
    h.annotate = annotate;
    svg::write_file((dir / (stem + ".svg")).string(), svg::render_heatmap(h));
}

std::string head_label(const HeadId & h) {
    return "L" + std::to_string(h.layer) + "H" + std::to_string(h.head);
}

std::string note_svg(const std::string & title, const std::string & note) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"80\">\n"
           "<rect width=\"480\" height=\"80\" fill=\"white\"/>\n"
           "<text x=\"10\" y=\"25\" font-family=\"sans-serif\" font-size=\"14\">" +
           svg::escape(title) +
           "</text>\n"
           "<text x=\"10\" y=\"55\" font-family=\"sans-serif\" font-size=\"12\">" +
           svg::escape(note) + "</text>\n</svg>\n";
}

} // namespace

std::vector<Check> run_report(const PipelineConfig & c, const RunPaths & out) {
    const fs::path dir = out.report();
    fs::create_directories(dir);
    const std::size_t per_dataset = 10;

    // fig1: per-prompt CV similarity over all datasets.
    const LabelledMatrix cv_all = read_matrix(out.rsa() / "rsm_cv_all.csv", "rsa");
    emit_heatmap(dir, "fig1_cv_similarity", "Concept vector similarity (per prompt)", downsample(cv_all, per_dataset));

    // fig2: FV and CV similarity side by side on the verbal datasets.
    const LabelledMatrix fv_verbal = downsample(read_matrix(out.rsa() / "rsm_fv_verbal.csv", "rsa"), per_dataset);
    const LabelledMatrix cv_verbal = restrict_to(cv_all, fv_verbal.labels);
    emit_heatmap(dir, "fig2_fv_similarity", "Function vector similarity (verbal)", fv_verbal);
    emit_heatmap(dir, "fig2_cv_similarity", "Concept vector similarity (verbal)", cv_verbal);

    // fig3: Φ per attribute for the FV heads.
    const PhiTable phi_verbal = read_phi_csv((out.rsa() / "phi_verbal.csv").string());
    const auto patch_summary = read_stage_json(out.patch() / "summary.json", "patch");
    std::vector<HeadId> fv_heads;
    for (const auto & e : patch_summary.at("fv_heads")) {
        fv_heads.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    }
    {
        std::ostringstream csv;
        csv << "layer,head,attribute,phi\n";
        svg::BarChart b;
        b.title = "Attribute alignment of FV heads";
        b.y_label = "Phi";
        b.y_min = -1.0;
        b.y_max = 1.0;
        for (const auto & h : fv_heads) {
            b.categories.push_back(head_label(h));
        }
        for (Attribute a : phi_verbal.attributes) {
            svg::Series s{std::string(to_string(a)), {}};
            for (const auto & h : fv_heads) {
                const double v = phi_verbal.at(h, a);
                s.values.push_back(v);
                csv << h.layer << ',' << h.head << ',' << to_string(a) << ',' << svg::fmt(v) << '\n';
            }
            b.series.push_back(std::move(s));
        }
        svg::write_file((dir / "fig3_fv_head_phi.csv").string(), csv.str());
        svg::write_file((dir / "fig3_fv_head_phi.svg").string(), svg::render_bar_chart(b));
    }

    // fig4: Φ^concept by layer and head.
    {
        int n_layers = 0;
        int n_heads = 0;
        for (const auto & [h, row] : phi_verbal.values) {
            n_layers = std::max(n_layers, h.layer + 1);
            n_heads = std::max(n_heads, h.head + 1);
        }
        svg::Heatmap hm;
        hm.title = "Phi concept by layer (rows) and head (columns)";
        hm.values = Matrix(static_cast<std::size_t>(n_layers), static_cast<std::size_t>(n_heads));
        std::ostringstream csv;
        csv << "layer,head,phi_concept\n";
        for (const auto & [h, row] : phi_verbal.values) {
            const double v = row.at(Attribute::Concept);
            hm.values(static_cast<std::size_t>(h.layer), static_cast<std::size_t>(h.head)) = v;
            csv << h.layer << ',' << h.head << ',' << svg::fmt(v) << '\n';
        }
        for (int l = 0; l < n_layers; ++l) {
            hm.row_labels.push_back("L" + std::to_string(l));
        }
        for (int h = 0; h < n_heads; ++h) {
            hm.col_labels.push_back("H" + std::to_string(h));
        }
        hm.annotate = true;
        svg::write_file((dir / "fig4_phi_concept_heads.csv").string(), csv.str());
        svg::write_file((dir / "fig4_phi_concept_heads.svg").string(), svg::render_heatmap(hm));
    }

    // fig5: intervention rates.
    {
        const CsvTable t = read_csv(out.intervene() / "bars.csv", "intervene");
        svg::BarChart b;
        b.title = "Steering: antonym continuation rate";
        b.y_label = "rate";
        b.y_min = 0.0;
        b.y_max = 1.0;
        for (std::size_t col = 1; col < t.header.size(); ++col) {
            b.series.push_back({t.header[col], {}});
        }
        std::ostringstream csv;
        csv << "setting";
        for (std::size_t col = 1; col < t.header.size(); ++col) {
            csv << ',' << t.header[col];
        }
        csv << '\n';
        for (const auto & row : t.rows) {
            b.categories.push_back(row.at(0));
            csv << row.at(0);
            for (std::size_t col = 1; col < row.size(); ++col) {
                const double v = parse_double(row[col]);
                b.series[col - 1].values.push_back(v);
                csv << ',' << svg::fmt(v);
            }
            csv << '\n';
        }
        svg::write_file((dir / "fig5_interventions.csv").string(), csv.str());
        svg::write_file((dir / "fig5_interventions.svg").string(), svg::render_bar_chart(b));
    }

    // fig6: correctness split.
    if (fs::exists(out.rsa() / "correctness_rsm.csv")) {
        emit_heatmap(dir, "fig6_correctness_split", "CV similarity by correctness",
                     read_matrix(out.rsa() / "correctness_rsm.csv", "rsa"), true);
    } else {
        svg::write_file((dir / "fig6_correctness_split.csv").string(), "row\n");
        svg::write_file((dir / "fig6_correctness_split.svg").string(),
                        note_svg("CV similarity by correctness",
                                 "no dataset has at least " + std::to_string(c.analysis.min_group) +
                                     " correct and incorrect prompts"));
    }

    // fig7: shot sweep.
    {
        const CsvTable t = read_csv(out.rsa() / "shot_sweep.csv", "rsa");
        svg::LineChart l;
        l.title = "Shot sweep";
        l.x_label = "shots";
        l.y_label = "value";
        for (std::size_t col = 1; col < t.header.size(); ++col) {
            l.series.push_back({t.header[col], {}});
        }
        std::ostringstream csv;
        csv << "shots";
        for (std::size_t col = 1; col < t.header.size(); ++col) {
            csv << ',' << t.header[col];
        }
        csv << '\n';
        for (const auto & row : t.rows) {
            l.x.push_back(parse_double(row.at(0)));
            csv << row.at(0);
            for (std::size_t col = 1; col < row.size(); ++col) {
                const double v = parse_double(row[col]);
                l.series[col - 1].values.push_back(v);
                csv << ',' << svg::fmt(v);
            }
            csv << '\n';
        }
        svg::write_file((dir / "fig7_shot_sweep.csv").string(), csv.str());
        svg::write_file((dir / "fig7_shot_sweep.svg").string(), svg::render_line_chart(l));
    }

    // fig8: strongest heads per attribute over all datasets.
    {
        const PhiTable phi_all = read_phi_csv((out.rsa() / "phi_all.csv").string());
        const std::size_t k = 5;
        std::ostringstream csv;
        csv << "attribute,rank,layer,head,phi\n";
        svg::BarChart b;
        b.title = "Top heads per attribute";
        b.y_label = "Phi";
        b.y_min = -1.0;
        b.y_max = 1.0;
        for (std::size_t r = 0; r < k; ++r) {
            b.series.push_back({"rank " + std::to_string(r + 1), {}});
        }
        for (Attribute a : phi_all.attributes) {
            b.categories.emplace_back(to_string(a));
            const auto top = top_heads_by_phi(phi_all, a, k);
            for (std::size_t r = 0; r < k; ++r) {
                const double v = r < top.size() ? phi_all.at(top[r], a) : std::nan("");
                b.series[r].values.push_back(v);
                if (r < top.size()) {
                    csv << to_string(a) << ',' << r + 1 << ',' << top[r].layer << ',' << top[r].head << ','
                        << svg::fmt(v) << '\n';
                }
            }
        }
        svg::write_file((dir / "fig8_attribute_heads.csv").string(), csv.str());
        svg::write_file((dir / "fig8_attribute_heads.svg").string(), svg::render_bar_chart(b));
    }

    // fig9: letter-string CV similarity.
    emit_heatmap(dir, "fig9_letter_string_similarity", "Letter-string CV similarity",
                 read_matrix(out.rsa() / "rsm_letter_string.csv", "rsa"));

    // table2: accuracy on permuted alphabets.
    {
        const CsvTable t = read_csv(out.rsa() / "letter_string_accuracy.csv", "rsa");
        std::ostringstream csv;
        std::ostringstream md;
        csv << "alphabet,n_perm,accuracy,chance\n";
        md << "| alphabet | n_perm | accuracy | chance |\n|---|---|---|---|\n";
        for (const auto & row : t.rows) {
            const double acc = parse_double(row.at(2));
            const double chance = parse_double(row.at(3));
            csv << row.at(0) << ',' << row.at(1) << ',' << svg::fmt(acc) << ',' << svg::fmt(chance) << '\n';
            char buf[128];
            std::snprintf(buf, sizeof buf, "| %s | %s | %.2f | %.2f |\n", row.at(0).c_str(), row.at(1).c_str(), acc, chance);
            md << buf;
        }
        svg::write_file((dir / "table2_letter_strings.csv").string(), csv.str());
        svg::write_file((dir / "table2_letter_strings.md").string(), md.str());
    }
    std::cerr << "[report] wrote " << dir.string() << '\n';
    return {};
}

} // namespace conceptscope
