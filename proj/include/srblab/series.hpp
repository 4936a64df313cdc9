#pragma once

#include <array>
#include <cassert>
#include <cmath>

namespace srblab {

// Truncated Taylor series c0 + c1 t + ... + cn t^n, arithmetic modulo t^(n+1).
class Series {
public:
    static constexpr int kMaxOrder = 8;

    Series() = default;
    explicit Series(int order, double c0 = 0) : n_(order) {
        assert(order >= 0 && order <= kMaxOrder);
        c_.fill(0);
        c_[0] = c0;
    }
    static Series variable(int order, double at) {
        Series s(order, at);
        if (order >= 1) s.c_[1] = 1;
        return s;
    }

    int order() const { return n_; }
    double operator[](int i) const { return c_[i]; }
    double& operator[](int i) { return c_[i]; }

    Series operator+(const Series& o) const { Series r(*this); for (int i = 0; i <= n_; ++i) r.c_[i] += o.c_[i]; return r; }
    Series operator-(const Series& o) const { Series r(*this); for (int i = 0; i <= n_; ++i) r.c_[i] -= o.c_[i]; return r; }
    Series operator-() const { Series r(*this); for (int i = 0; i <= n_; ++i) r.c_[i] = -r.c_[i]; return r; }
    Series operator+(double s) const { Series r(*this); r.c_[0] += s; return r; }
    Series operator-(double s) const { Series r(*this); r.c_[0] -= s; return r; }
    Series operator*(double s) const { Series r(*this); for (int i = 0; i <= n_; ++i) r.c_[i] *= s; return r; }
    Series operator*(const Series& o) const {
        Series r(n_);
        for (int i = 0; i <= n_; ++i) {
            if (c_[i] == 0) continue;
            for (int j = 0; i + j <= n_; ++j) r.c_[i + j] += c_[i] * o.c_[j];
        }
        return r;
    }

    friend Series operator*(double s, const Series& a) { return a * s; }
    friend Series operator+(double s, const Series& a) { return a + s; }
    friend Series operator-(double s, const Series& a) { return (-a) + s; }

    // sin and cos of a series via the coupled recurrences s' = c u', c' = -s u'.
    friend void sincos(const Series& u, Series& s, Series& c) {
        int n = u.n_;
        s = Series(n, std::sin(u.c_[0]));
        c = Series(n, std::cos(u.c_[0]));
        for (int k = 1; k <= n; ++k) {
            double as = 0, ac = 0;
            for (int j = 1; j <= k; ++j) {
                as += j * u.c_[j] * c.c_[k - j];
                ac -= j * u.c_[j] * s.c_[k - j];
            }
            s.c_[k] = as / k;
            c.c_[k] = ac / k;
        }
    }

private:
    int n_ = 0;
    std::array<double, kMaxOrder + 1> c_{};
};

inline double value_of(double x) { return x; }
inline double value_of(const Series& s) { return s[0]; }

inline void sincos(double u, double& s, double& c) {
    s = std::sin(u);
    c = std::cos(u);
}

}  // namespace srblab
