#include "waves/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "waves/errors.hpp"
#include "waves/io.hpp"
#include "waves/spline.hpp"

namespace waves {
namespace {

constexpr double kPi = 3.14159265358979323846;

struct Stencils {
    Eigen::MatrixXd hq; // central in q, exact zeros at the symmetry columns
    Eigen::MatrixXd hp; // solver-consistent: one-sided at the edges
};

/// Bottom slip of the laminar column of the discrete interior equations with
/// prescribed depth. Those equations force 1/(2 g_j^2) + Omega at the face
/// midpoint to a single constant; the depth pins the constant, and the slip
/// is read off the first nodes with the same stencil used on the wave side,
/// so both sides of the bottom-velocity window carry the same bias.
double discrete_bottom_slip(const Eigen::VectorXd& p, const VorticityModel& model,
                            double depth, const Eigen::VectorXd& wb) {
    const int Np = static_cast<int>(p.size()) - 1;
    Eigen::VectorXd dp(Np), om(Np);
    for (int jf = 0; jf < Np; ++jf) {
        dp(jf) = p(jf + 1) - p(jf);
        om(jf) = model.Omega(0.5 * (p(jf) + p(jf + 1)));
    }
    auto col_depth = [&](double C) {
        double acc = 0.0;
        for (int jf = 0; jf < Np; ++jf) acc += dp(jf) / std::sqrt(2.0 * (C - om(jf)));
        return acc;
    };
    // depth(C) decreases from +inf to 0 on (max om, inf); bracket then bisect
    const double base = om.maxCoeff();
    double span = std::max(1.0, std::abs(base));
    double lo = base + 1e-300;
    while (col_depth(base + span) > depth) span *= 2.0;
    double hi = base + span;
    for (int it = 0; it < 200 && (hi - lo) > 1e-16 * std::max(1.0, hi); ++it) {
        const double mid = lo + 0.5 * (hi - lo);
        (col_depth(mid) > depth ? lo : hi) = mid;
    }
    const double C = lo + 0.5 * (hi - lo);
    const double y1 = dp(0) / std::sqrt(2.0 * (C - om(0)));
    const double y2 = y1 + dp(1) / std::sqrt(2.0 * (C - om(1)));
    return 1.0 / (wb(1) * y1 + wb(2) * y2); // wb(0) multiplies y(0) = 0
}

Stencils differentiate(const HeightField& f) {
    const StripGrid& g = f.grid();
    const int M = g.M();
    const int Np = g.Np;
    const double dq = g.dq();
    const Eigen::VectorXd& p = g.p;

    Stencils st;
    st.hq.setZero(M + 1, Np + 1);
    st.hp.setZero(M + 1, Np + 1);

    for (int j = 0; j <= Np; ++j)
        for (int i = 1; i < M; ++i)
            st.hq(i, j) = (f.h(i + 1, j) - f.h(i - 1, j)) / (2.0 * dq);

    Eigen::VectorXd xs(3);
    xs << p(0), p(1), p(2);
    const Eigen::VectorXd wb = fd_weights(xs, p(0), 1);
    const Eigen::Vector3d wt =
        onesided_first_top(p(Np) - p(Np - 1), p(Np - 1) - p(Np - 2));
    for (int i = 0; i <= M; ++i) {
        st.hp(i, 0) = wb(0) * f.h(i, 0) + wb(1) * f.h(i, 1) + wb(2) * f.h(i, 2);
        for (int j = 1; j < Np; ++j) {
            const Eigen::Vector3d w = central_first(p(j) - p(j - 1), p(j + 1) - p(j));
            st.hp(i, j) =
                w(0) * f.h(i, j - 1) + w(1) * f.h(i, j) + w(2) * f.h(i, j + 1);
        }
        st.hp(i, Np) =
            wt(0) * f.h(i, Np) + wt(1) * f.h(i, Np - 1) + wt(2) * f.h(i, Np - 2);
    }
    return st;
}

} // namespace

WaveField reconstruct(const HeightField& field, const VorticityModel& model) {
    const StripGrid& g = field.grid();
    const int M = g.M();
    const int Np = g.Np;
    const double lam = field.lambda();

    WaveField wf;
    wf.r = field.r();
    wf.lambda = lam;
    wf.x_grid = g.q / lam;
    wf.p_levels = g.p;
    wf.y_samples.resize(M + 1, Np + 1);
    for (int i = 0; i <= M; ++i)
        for (int j = 0; j <= Np; ++j) wf.y_samples(i, j) = field.h(i, j);

    const Stencils st = differentiate(field);
    for (int i = 0; i <= M; ++i)
        for (int j = 0; j <= Np; ++j)
            if (!(st.hp(i, j) >= 1e-12))
                throw StagnationError(
                    "stagnation cell at (q,p) = (" + io::fmt17(g.q(i)) + ", " +
                    io::fmt17(g.p(j)) + "): h_p = " + io::fmt17(st.hp(i, j)));

    wf.psi_y = st.hp.cwiseInverse();
    wf.psi_x = (-lam) * st.hq.cwiseQuotient(st.hp);

    wf.eta = wf.y_samples.col(Np);
    wf.max_eta = wf.eta.maxCoeff();
    wf.min_eta = wf.eta.minCoeff();
    wf.eta_slope = lam * st.hq.col(Np);
    wf.max_slope = wf.eta_slope.cwiseAbs().maxCoeff();

    // Flow force by cumulative trapezoid up each column; the p-integrand
    // carries the Jacobian h_p of the hodograph map.
    const double Om1 = model.Omega1();
    wf.F.setZero(M + 1, Np + 1);
    for (int i = 0; i <= M; ++i) {
        double acc = 0.0;
        double prev = 0.0;
        for (int j = 0; j <= Np; ++j) {
            const double fy = 0.5 * (wf.psi_y(i, j) * wf.psi_y(i, j) -
                                     wf.psi_x(i, j) * wf.psi_x(i, j)) +
                              model.Omega(g.p(j)) - Om1 + wf.r - wf.y_samples(i, j);
            const double val = fy * st.hp(i, j);
            if (j > 0) acc += 0.5 * (prev + val) * (g.p(j) - g.p(j - 1));
            wf.F(i, j) = acc;
            prev = val;
        }
    }
    const Eigen::VectorXd Fs = wf.F.col(Np);
    double mean = 0.5 * (Fs(0) + Fs(M));
    for (int i = 1; i < M; ++i) mean += Fs(i);
    mean /= M;
    wf.flow_force = mean;
    const double spread_abs = Fs.maxCoeff() - Fs.minCoeff();
    wf.flowforce_spread = spread_abs / std::max(std::abs(mean), 1e-300);

    // The horizontal integral runs along lines of constant physical height,
    // which cut across the p-levels; each evaluation inverts the column's
    // height interpolant to find the stream level at that height.
    std::vector<CubicSpline> sp_h(M + 1), sp_px(M + 1), sp_py(M + 1);
    for (int k = 0; k <= M; ++k) {
        sp_h[k] = CubicSpline::clamped(g.p, wf.y_samples.row(k).transpose(),
                                       st.hp(k, 0), st.hp(k, Np));
        sp_px[k] = CubicSpline::natural(g.p, wf.psi_x.row(k).transpose());
        sp_py[k] = CubicSpline::natural(g.p, wf.psi_y.row(k).transpose());
    }
    auto level_at = [&](int k, double y) -> double {
        if (y <= 0.0) return 0.0;
        if (y >= wf.eta(k)) return 1.0;
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 80 && hi - lo > 1e-16; ++it) {
            const double mid = 0.5 * (lo + hi);
            (sp_h[k](mid) < y ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    auto integrand = [&](int k, double y) -> double {
        const double ps = level_at(k, y);
        const double px = sp_px[k](ps);
        const double py = sp_py[k](ps);
        return 0.5 * (px * px - py * py) - model.Omega(ps) + Om1 + wf.r - wf.eta(k);
    };
    const double dx = wf.x_grid(1) - wf.x_grid(0);
    wf.G.setZero(M + 1);
    std::vector<double> row(M + 1);
    for (int i = 1; i <= M; ++i) {
        const double y = wf.eta(i);
        for (int k = 0; k <= i; ++k) row[k] = integrand(k, y);
        double acc = 0.5 * (row[0] + row[i]);
        for (int k = 1; k < i; ++k) acc += row[k];
        wf.G(i) = acc * dx;
    }
    wf.G_trough.setZero(Np + 1);
    for (int j = 0; j <= Np; ++j) {
        const double y = wf.y_samples(M, j);
        for (int k = 0; k <= M; ++k) row[k] = integrand(k, y);
        double acc = 0.5 * (row[0] + row[M]);
        for (int k = 1; k < M; ++k) acc += row[k];
        wf.G_trough(j) = acc * dx;
    }
    return wf;
}

BernoulliRecord check_bernoulli(const WaveField& wf) {
    const int M = static_cast<int>(wf.eta.size()) - 1;
    const int Np = static_cast<int>(wf.p_levels.size()) - 1;
    BernoulliRecord rec;
    for (int i = 0; i <= M; ++i) {
        const double px = wf.psi_x(i, Np);
        const double py = wf.psi_y(i, Np);
        const double res = std::abs(0.5 * (px * px + py * py) + wf.eta(i) - wf.r);
        rec.residual = std::max(rec.residual, res);
    }
    rec.threshold = 1e-8 * wf.r;
    rec.pass = rec.residual < rec.threshold;
    return rec;
}

std::vector<BoundRecord> check_bounds(const WaveField& wf, const FlowRegime& regime,
                                      const VorticityModel& model) {
    const int M = static_cast<int>(wf.eta.size()) - 1;
    const int Np = static_cast<int>(wf.p_levels.size()) - 1;
    const double r = wf.r;
    const OmegaClass cls = model.omega_class();
    std::vector<BoundRecord> out;

    auto push = [&out](std::string name, std::string anchor, double margin,
                       bool pass) -> BoundRecord& {
        out.push_back({std::move(name), std::move(anchor), margin, pass,
                       std::numeric_limits<double>::quiet_NaN(), false});
        return out.back();
    };

    push("crest_above_conjugate",
         "crest elevation strictly above the subcritical conjugate depth",
         wf.max_eta - regime.d_plus, wf.max_eta - regime.d_plus > 0.0);

    {
        double margin = std::numeric_limits<double>::infinity();
        bool pass = true;
        for (int i = 0; i <= M; ++i)
            for (int j = 0; j <= Np; ++j) {
                const double head = 2.0 * (r - wf.y_samples(i, j));
                const double v2 = wf.psi_y(i, j) * wf.psi_y(i, j);
                margin = std::min(margin, head - v2);
                if (v2 > head * (1.0 + 1e-6)) pass = false;
            }
        push("speed_upper",
             "squared vertical velocity at most twice the head above the point",
             margin, pass);
    }

    if (cls == OmegaClass::Zero) {
        const double C2 = std::pow(2.0 * r * r * r, -3.0);
        double margin = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= M; ++i)
            for (int j = 0; j <= Np; ++j) {
                const double v2 = wf.psi_y(i, j) * wf.psi_y(i, j);
                margin = std::min(margin, v2 - C2 * (r - wf.y_samples(i, j)));
            }
        BoundRecord& rec = push(
            "speed_lower_irrotational",
            "squared vertical velocity at least a fixed fraction of the head",
            margin, margin >= -1e-12);
        rec.constant = C2;
        rec.has_constant = true;
    }

    const Eigen::VectorXd bottom = wf.psi_y.col(0);
    const double bot_min = bottom.minCoeff();
    const double bot_max = bottom.maxCoeff();

    if (cls == OmegaClass::Zero) {
        const double margin = std::min(bot_min - 1.0 / r, 4.0 / r - bot_max);
        push("bottom_speed_irrotational",
             "bottom vertical velocity inside the window (1/r, 4/r)", margin,
             margin > 0.0);
    }

    {
        Eigen::VectorXd xs(3);
        xs << wf.p_levels(0), wf.p_levels(1), wf.p_levels(2);
        const Eigen::VectorXd wb = fd_weights(xs, wf.p_levels(0), 1);
        const double s_lo = discrete_bottom_slip(wf.p_levels, model, wf.max_eta, wb);
        const double s_hi = discrete_bottom_slip(wf.p_levels, model, wf.min_eta, wb);
        const double margin = std::min(bot_min - s_lo, s_hi - bot_max);
        push("bottom_speed_window",
             "bottom vertical velocity between the slips of the streams whose "
             "depths match the extreme elevations",
             margin, margin >= -1e-8);
    }

    if (cls != OmegaClass::General) {
        const double k = 1.0 / (2.0 * std::sqrt(2.0 * r));
        const double crest_speed = std::sqrt(2.0 * (r - wf.max_eta));
        double margin = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= M; ++i) {
            const double barrier = k * (wf.max_eta - wf.eta(i)) + crest_speed;
            margin = std::min(margin, wf.psi_y(i, Np) - barrier);
        }
        BoundRecord& rec = push(
            "surface_speed_floor",
            "surface vertical velocity above the crest-anchored linear barrier",
            margin, margin >= -1e-6);
        rec.constant = k;
        rec.has_constant = true;
    }

    {
        const double C1 = std::max(0.0, -model.omega_min()) + 0.1;
        double margin = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= M; ++i)
            for (int j = i + 1; j <= M; ++j) {
                const double lhs = wf.psi_y(i, Np) - wf.psi_y(j, Np);
                margin = std::min(margin, C1 * (wf.eta(i) - wf.eta(j)) - lhs);
            }
        BoundRecord& rec = push(
            "surface_speed_coupling",
            "surface vertical velocity increments controlled by elevation "
            "increments toward the crest",
            margin, margin >= -1e-8);
        rec.constant = C1;
        rec.has_constant = true;
    }

    if (cls == OmegaClass::Zero) {
        const double margin = 0.55 - wf.max_slope;
        push("slope_half_irrotational",
             "surface slope at most one half plus tolerance", margin,
             margin >= 0.0);
    }

    return out;
}

CrestAngle crest_angle(const WaveField& wf) {
    const int M = static_cast<int>(wf.eta.size()) - 1;
    const double dx = wf.x_grid(1) - wf.x_grid(0);
    const double lo = 2.0 * dx * (1.0 - 1e-12);
    const double hi = 0.1 * wf.wavelength() * (1.0 + 1e-12);
    double sxy = 0.0, sxx = 0.0;
    int count = 0;
    for (int i = 1; i <= M; ++i) {
        const double x = wf.x_grid(i);
        if (x < lo || x > hi) continue;
        sxy += x * (wf.eta(0) - wf.eta(i));
        sxx += x * x;
        ++count;
    }
    CrestAngle a;
    if (count < 6) return a;
    const double slope = sxy / sxx;
    a.degrees = 180.0 - 2.0 * std::atan(slope) * 180.0 / kPi;
    a.defined = true;
    return a;
}

WaveDiagnostics run_diagnostics(const HeightField& field, const VorticityModel& model,
                                const FlowRegime& regime) {
    const WaveField wf = reconstruct(field, model);
    WaveDiagnostics d;
    d.bernoulli = check_bernoulli(wf);
    d.flowforce_spread = wf.flowforce_spread;
    d.g_surface_max = wf.G.cwiseAbs().maxCoeff();
    d.g_trough_max = wf.G_trough.cwiseAbs().maxCoeff();
    d.bounds = check_bounds(wf, regime, model);
    d.crest_angle = crest_angle(wf);
    d.flow_force = wf.flow_force;
    d.max_eta = wf.max_eta;
    d.min_eta = wf.min_eta;
    d.max_slope = wf.max_slope;
    d.bounds_pass = true;
    for (const BoundRecord& b : d.bounds) d.bounds_pass = d.bounds_pass && b.pass;
    d.pass = d.bounds_pass && d.bernoulli.pass;
    return d;
}

std::string diagnostics_json(const WaveDiagnostics& d) {
    std::string bounds = "[";
    for (size_t k = 0; k < d.bounds.size(); ++k) {
        const BoundRecord& b = d.bounds[k];
        io::JsonWriter w;
        w.text("name", b.name)
            .text("paper_anchor", b.paper_anchor)
            .number("margin", b.margin)
            .boolean("pass", b.pass);
        if (b.has_constant) w.number("constant", b.constant);
        bounds += (k ? "," : "") + w.str();
    }
    bounds += "]";

    io::JsonWriter w;
    w.number("bernoulli_residual", d.bernoulli.residual)
        .number("flowforce_spread", d.flowforce_spread)
        .number("G_surface_max", d.g_surface_max)
        .raw("bounds", bounds);
    if (d.crest_angle.defined)
        w.number("crest_angle", d.crest_angle.degrees);
    else
        w.null("crest_angle");
    w.number("G_trough_max", d.g_trough_max)
        .number("flow_force", d.flow_force)
        .number("max_eta", d.max_eta)
        .number("min_eta", d.min_eta)
        .number("max_slope", d.max_slope)
        .boolean("bernoulli_pass", d.bernoulli.pass)
        .boolean("pass", d.pass);
    return w.str();
}

void export_field_csv(const WaveField& wf, const std::string& path) {
    const int M = static_cast<int>(wf.eta.size()) - 1;
    const int Np = static_cast<int>(wf.p_levels.size()) - 1;
    const double dx = wf.x_grid(1) - wf.x_grid(0);
    std::string body = "x,y,psi_x,psi_y\n";
    for (int i = 0; i <= 2 * M; ++i) {
        const int c = i <= M ? i : 2 * M - i;
        const double sign = i <= M ? 1.0 : -1.0;
        const double x = i * dx;
        for (int j = 0; j <= Np; ++j) {
            body += io::fmt17(x) + "," + io::fmt17(wf.y_samples(c, j)) + "," +
                    io::fmt17(sign * wf.psi_x(c, j)) + "," +
                    io::fmt17(wf.psi_y(c, j)) + "\n";
        }
    }
    io::atomic_write(path, body);
}

void export_surface_csv(const WaveField& wf, const std::string& path) {
    const int M = static_cast<int>(wf.eta.size()) - 1;
    const double dx = wf.x_grid(1) - wf.x_grid(0);
    std::string body = "x,eta\n";
    for (int i = 0; i <= 2 * M; ++i) {
        const int c = i <= M ? i : 2 * M - i;
        body += io::fmt17(i * dx) + "," + io::fmt17(wf.eta(c)) + "\n";
    }
    io::atomic_write(path, body);
}

} // namespace waves
