#pragma once

// Independent reference implementations. Deliberately naive: O(n^2) ranks,
// long double accumulation, no shared code with the library.

#include <cmath>
#include <string>
#include <vector>

namespace oracle {

inline std::vector<long double> ranks(const std::vector<double> & x) {
    std::vector<long double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::size_t less = 0;
        std::size_t equal = 0;
        for (double y : x) {
            less += y < x[i] ? 1 : 0;
            equal += y == x[i] ? 1 : 0;
        }
        r[i] = static_cast<long double>(less) + (static_cast<long double>(equal) + 1.0L) / 2.0L;
    }
    return r;
}

inline long double pearson(const std::vector<long double> & a, const std::vector<long double> & b) {
    const auto n = static_cast<long double>(a.size());
    long double ma = 0;
    long double mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    long double sab = 0;
    long double saa = 0;
    long double sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double> & x, const std::vector<double> & y) {
    return static_cast<double>(pearson(ranks(x), ranks(y)));
}

inline double cosine(const std::vector<double> & u, const std::vector<double> & v) {
    long double uv = 0;
    long double uu = 0;
    long double vv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uv += static_cast<long double>(u[i]) * v[i];
        uu += static_cast<long double>(u[i]) * u[i];
        vv += static_cast<long double>(v[i]) * v[i];
    }
    return static_cast<double>(uv / std::sqrt(uu * vv));
}

// Answer of an abstract previous/next line read straight off the elements:
// the neighbour of "*" after dropping the positional dots.
inline std::string abstract_answer(const std::vector<std::string> & elements, bool next) {
    std::vector<std::string> kept;
    for (const auto & e : elements) {
        if (e != ".") {
            kept.push_back(e);
        }
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (kept[i] == "*") {
            if (next) {
                return i + 1 < kept.size() ? kept[i + 1] : "";
            }
            return i > 0 ? kept[i - 1] : "";
        }
    }
    return "";
}

} // namespace oracle
