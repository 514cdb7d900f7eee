#pragma once

#include <Eigen/Dense>
#include <vector>

namespace waves {

/// Cubic spline through (x_k, y_k) with strictly increasing knots.
/// Ends are either natural (zero second derivative) or clamped to prescribed
/// first derivatives. Evaluation outside the knot range extrapolates the end
/// cubics; callers are expected to stay inside.
class CubicSpline {
  public:
    CubicSpline() = default;

    static CubicSpline natural(const Eigen::VectorXd& x, const Eigen::VectorXd& y);
    static CubicSpline clamped(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                               double slope_left, double slope_right);

    double operator()(double x) const;
    double derivative(double x) const;
    /// Integral from the first knot to x, exact for the piecewise cubic.
    double integral(double x) const;

    const Eigen::VectorXd& knots() const { return x_; }
    const Eigen::VectorXd& values() const { return y_; }

  private:
    // second derivatives at the knots determine everything
    void build(const Eigen::VectorXd& x, const Eigen::VectorXd& y, bool clamp,
               double sl, double sr);
    int interval(double x) const;

    Eigen::VectorXd x_, y_, m_;    // m_ = second derivatives
    Eigen::VectorXd cumint_;       // integral from x_(0) to each knot
};

inline CubicSpline CubicSpline::natural(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    CubicSpline s;
    s.build(x, y, false, 0.0, 0.0);
    return s;
}

inline CubicSpline CubicSpline::clamped(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                        double sl, double sr) {
    CubicSpline s;
    s.build(x, y, true, sl, sr);
    return s;
}

inline void CubicSpline::build(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                               bool clamp, double sl, double sr) {
    const int n = static_cast<int>(x.size());
    x_ = x;
    y_ = y;
    m_ = Eigen::VectorXd::Zero(n);
    if (n < 3) {
        // straight line; second derivatives stay zero
    } else {
        // Thomas solve for the tridiagonal second-derivative system.
        Eigen::VectorXd a(n), b(n), c(n), d(n);
        a.setZero(); b.setOnes(); c.setZero(); d.setZero();
        for (int i = 1; i + 1 < n; ++i) {
            const double hl = x(i) - x(i - 1);
            const double hr = x(i + 1) - x(i);
            a(i) = hl / 6.0;
            b(i) = (hl + hr) / 3.0;
            c(i) = hr / 6.0;
            d(i) = (y(i + 1) - y(i)) / hr - (y(i) - y(i - 1)) / hl;
        }
        if (clamp) {
            const double h0 = x(1) - x(0);
            b(0) = h0 / 3.0;
            c(0) = h0 / 6.0;
            d(0) = (y(1) - y(0)) / h0 - sl;
            const double hn = x(n - 1) - x(n - 2);
            a(n - 1) = hn / 6.0;
            b(n - 1) = hn / 3.0;
            d(n - 1) = sr - (y(n - 1) - y(n - 2)) / hn;
        }
        // natural ends keep b=1, d=0 rows, forcing m=0 there
        for (int i = 1; i < n; ++i) {
            const double w = a(i) / b(i - 1);
            b(i) -= w * c(i - 1);
            d(i) -= w * d(i - 1);
        }
        m_(n - 1) = d(n - 1) / b(n - 1);
        for (int i = n - 2; i >= 0; --i) m_(i) = (d(i) - c(i) * m_(i + 1)) / b(i);
    }
    // cumulative integrals knot to knot
    cumint_ = Eigen::VectorXd::Zero(n);
    for (int i = 0; i + 1 < n; ++i) {
        const double h = x_(i + 1) - x_(i);
        cumint_(i + 1) = cumint_(i) + 0.5 * h * (y_(i) + y_(i + 1)) -
                         h * h * h * (m_(i) + m_(i + 1)) / 24.0;
    }
}

inline int CubicSpline::interval(double x) const {
    const int n = static_cast<int>(x_.size());
    int lo = 0, hi = n - 1;
    if (x <= x_(0)) return 0;
    if (x >= x_(n - 1)) return n - 2;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (x_(mid) <= x) lo = mid; else hi = mid;
    }
    return lo;
}

inline double CubicSpline::operator()(double x) const {
    const int i = interval(x);
    const double h = x_(i + 1) - x_(i);
    const double A = (x_(i + 1) - x) / h;
    const double B = (x - x_(i)) / h;
    return A * y_(i) + B * y_(i + 1) +
           ((A * A * A - A) * m_(i) + (B * B * B - B) * m_(i + 1)) * h * h / 6.0;
}

inline double CubicSpline::derivative(double x) const {
    const int i = interval(x);
    const double h = x_(i + 1) - x_(i);
    const double A = (x_(i + 1) - x) / h;
    const double B = (x - x_(i)) / h;
    return (y_(i + 1) - y_(i)) / h +
           ((3.0 * B * B - 1.0) * m_(i + 1) - (3.0 * A * A - 1.0) * m_(i)) * h / 6.0;
}

inline double CubicSpline::integral(double x) const {
    const int i = interval(x);
    const double h = x_(i + 1) - x_(i);
    // On the interval, y(B) = A y_i + B y_{i+1} + ((A^3-A) m_i + (B^3-B) m_{i+1}) h^2/6
    // with A = 1-B and dx = h dB; integrate B from 0 to (x - x_i)/h.
    const double b = (x - x_(i)) / h;
    const double a = 1.0 - b;
    const double intA = b - b * b / 2.0;
    const double intB = b * b / 2.0;
    const double intA3A = a * a / 2.0 - a * a * a * a / 4.0 - 0.25;
    const double intB3B = b * b * b * b / 4.0 - b * b / 2.0;
    return cumint_(i) + h * (y_(i) * intA + y_(i + 1) * intB +
                             (m_(i) * intA3A + m_(i + 1) * intB3B) * h * h / 6.0);
}

/// Resample y (given at knots x) onto new abscissae with a natural spline.
inline Eigen::VectorXd spline_resample(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& xnew) {
    const CubicSpline s = CubicSpline::natural(x, y);
    Eigen::VectorXd out(xnew.size());
    for (int i = 0; i < xnew.size(); ++i) out(i) = s(xnew(i));
    return out;
}

} // namespace waves
