#include "conceptscope/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace conceptscope {

namespace {

void require_finite(const std::vector<double> & data) {
    for (double x : data) {
        if (!std::isfinite(x)) {
            throw NumericsError("Vec: non-finite entry");
        }
    }
}

void require_same_size(const Vec & u, const Vec & v, const char * what) {
    if (u.size() != v.size()) {
        throw NumericsError(std::string(what) + ": dimension mismatch (" + std::to_string(u.size()) +
                            " vs " + std::to_string(v.size()) + ")");
    }
}

} // namespace

Vec::Vec(std::size_t n, double fill) : data_(n, fill) {
    require_finite(data_);
}

Vec::Vec(std::vector<double> data) : data_(std::move(data)) {
    require_finite(data_);
}

Vec::Vec(std::initializer_list<double> init) : data_(init) {
    require_finite(data_);
}

Vec Vec::from_floats(std::span<const float> data) {
    return Vec(std::vector<double>(data.begin(), data.end()));
}

Vec & Vec::operator+=(const Vec & other) {
    require_same_size(*this, other, "Vec::operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += other.data_[i];
    }
    return *this;
}

Vec & Vec::operator*=(double s) {
    for (double & x : data_) {
        x *= s;
    }
    return *this;
}

Vec operator+(Vec a, const Vec & b) {
    a += b;
    return a;
}

Vec operator*(double s, Vec v) {
    v *= s;
    return v;
}

double dot(const Vec & u, const Vec & v) {
    require_same_size(u, v, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        acc += u[i] * v[i];
    }
    return acc;
}

double norm(const Vec & v) {
    return std::sqrt(dot(v, v));
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw NumericsError("Matrix: data length does not match rows*cols");
    }
}

double cosine(const Vec & u, const Vec & v) {
    require_same_size(u, v, "cosine");
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu == 0.0 || nv == 0.0) {
        throw NumericsError("cosine: zero-norm input");
    }
    const double c = dot(u, v) / (nu * nv);
    return std::clamp(c, -1.0, 1.0);
}

Vec rank_with_ties(const Vec & x) {
    if (x.empty()) {
        throw NumericsError("rank_with_ties: empty input");
    }
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && x[order[j]] == x[order[i]]) {
            ++j;
        }
        // positions i..j-1 (0-based) cover ranks i+1..j
        const double avg = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            ranks[order[k]] = avg;
        }
        i = j;
    }
    return Vec(std::move(ranks));
}

double pearson(const Vec & x, const Vec & y) {
    require_same_size(x, y, "pearson");
    const std::size_t n = x.size();
    if (n < 2) {
        throw NumericsError("pearson: need at least two observations");
    }
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw NumericsError("pearson: degenerate (constant) input");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman_rho(const Vec & x, const Vec & y) {
    require_same_size(x, y, "spearman_rho");
    if (x.size() < 2) {
        throw NumericsError("spearman_rho: need at least two observations");
    }
    const auto constant = [](const Vec & v) {
        return std::all_of(v.begin(), v.end(), [&](double e) { return e == v[0]; });
    };
    if (constant(x) || constant(y)) {
        throw NumericsError("spearman_rho: degenerate (constant) input");
    }
    return pearson(rank_with_ties(x), rank_with_ties(y));
}

Vec mean_vector(std::span<const Vec> vs) {
    if (vs.empty()) {
        throw NumericsError("mean_vector: empty collection");
    }
    std::vector<double> acc(vs.front().size(), 0.0);
    for (const Vec & v : vs) {
        if (v.size() != acc.size()) {
            throw NumericsError("mean_vector: dimension mismatch");
        }
        for (std::size_t i = 0; i < acc.size(); ++i) {
            acc[i] += v[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(vs.size());
    for (double & a : acc) {
        a *= inv;
    }
    return Vec(std::move(acc));
}

Vec lower_triangle(const Matrix & m) {
    if (!m.square()) {
        throw NumericsError("lower_triangle: non-square input");
    }
    const std::size_t n = m.rows();
    std::vector<double> out;
    out.reserve(n * (n - (n > 0 ? 1 : 0)) / 2);
    for (std::size_t r = 1; r < n; ++r) {
        for (std::size_t c = 0; c < r; ++c) {
            out.push_back(m(r, c));
        }
    }
    return Vec(std::move(out));
}

} // namespace conceptscope
