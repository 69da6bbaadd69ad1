#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace conceptscope {

class NumericsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Dense real vector. Entries are finite by construction.
class Vec {
public:
    Vec() = default;
    explicit Vec(std::size_t n, double fill = 0.0);
    explicit Vec(std::vector<double> data);
    Vec(std::initializer_list<double> init);

    static Vec from_floats(std::span<const float> data);

    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double operator[](std::size_t i) const { return data_[i]; }
    double & operator[](std::size_t i) { return data_[i]; }

    std::span<const double> values() const { return data_; }
    const std::vector<double> & raw() const { return data_; }

    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    Vec & operator+=(const Vec & other);
    Vec & operator*=(double s);

    friend bool operator==(const Vec &, const Vec &) = default;

private:
    std::vector<double> data_;
};

Vec operator+(Vec a, const Vec & b);
Vec operator*(double s, Vec v);

double dot(const Vec & u, const Vec & v);
double norm(const Vec & v);

// Row-major dense matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double & operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    std::span<const double> values() const { return data_; }

    friend bool operator==(const Matrix &, const Matrix &) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// dot(u,v)/(|u||v|). Throws on dimension mismatch or a zero-norm argument.
double cosine(const Vec & u, const Vec & v);

// Average ranks starting at 1; ties share the mean of the ranks they cover.
Vec rank_with_ties(const Vec & x);

// Pearson correlation of tie-averaged ranks. Requires equal lengths >= 2 and
// at least two distinct values in each argument.
double spearman_rho(const Vec & x, const Vec & y);

double pearson(const Vec & x, const Vec & y);

Vec mean_vector(std::span<const Vec> vs);

// Strictly-below-diagonal entries in row-major order: m10, m20, m21, m30, ...
Vec lower_triangle(const Matrix & m);

} // namespace conceptscope
