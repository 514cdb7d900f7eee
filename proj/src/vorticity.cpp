#include "waves/vorticity.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "waves/errors.hpp"
#include "waves/io.hpp"
#include "waves/quadrature.hpp"
#include "waves/spline.hpp"

namespace waves {

std::string omega_class_name(OmegaClass c) {
    switch (c) {
        case OmegaClass::Zero: return "zero";
        case OmegaClass::Nonnegative: return "nonnegative";
        case OmegaClass::General: return "general";
    }
    return "general";
}

struct VorticityModel::Impl {
    std::function<double(double)> w;
    std::function<double(double)> W; // primitive with W(0)=0
    OmegaClass cls = OmegaClass::General;
    double gamma = 0.5;
    double wmin = 0.0;
    double W1 = 0.0;
    double twoWmax = 0.0;
    double twoWargmax = 0.0;
    std::string desc;
    // round-trip data for spec_json
    std::string kind;
    double param = 0.0;
    std::vector<double> tab_p, tab_w;
};

namespace {

void require_gamma(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw ParseError("holder_gamma must lie in (0,1), got " + std::to_string(gamma));
}

/// Locate the max of 2*Omega by dense sampling plus golden-section refinement
/// of the best cell. Deterministic; used for the spline kind only, the
/// analytic kinds know their extrema.
void locate_two_omega_max(const std::function<double(double)>& W, double& mx, double& argmx) {
    const int n = 4096;
    mx = -1e300;
    int best = 0;
    for (int k = 0; k <= n; ++k) {
        const double p = static_cast<double>(k) / n;
        const double v = 2.0 * W(p);
        if (v > mx) {
            mx = v;
            best = k;
        }
    }
    double a = std::max(0.0, (best - 1.0) / n);
    double b = std::min(1.0, (best + 1.0) / n);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = 2.0 * W(x1), f2 = 2.0 * W(x2);
    for (int it = 0; it < 90; ++it) {
        if (f1 < f2) {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a); f2 = 2.0 * W(x2);
        } else {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a); f1 = 2.0 * W(x1);
        }
    }
    argmx = 0.5 * (a + b);
    mx = std::max(mx, 2.0 * W(argmx));
    if (mx < 0.0) mx = 0.0; // Omega(0)=0 guarantees a nonnegative max
}

double sample_min(const std::function<double(double)>& f) {
    const int n = 4096;
    double mn = 1e300;
    for (int k = 0; k <= n; ++k) mn = std::min(mn, f(static_cast<double>(k) / n));
    return mn;
}

/// Consistency guard: the stored primitive must match direct quadrature of
/// omega on a few sample intervals. Catches integration bugs in new kinds.
void check_primitive(const VorticityModel::Impl& im) {
    const double pts[] = {0.0, 0.17, 0.5, 0.83, 1.0};
    for (int i = 0; i + 1 < 5; ++i) {
        const double a = pts[i], b = pts[i + 1];
        const double direct = quad::integrate([&](double p) { return im.w(p); }, a, b, 1e-13);
        const double stored = im.W(b) - im.W(a);
        if (std::fabs(direct - stored) > 1e-10 * (1.0 + std::fabs(stored)))
            throw SolverError("vorticity primitive inconsistent with quadrature on [" +
                              std::to_string(a) + "," + std::to_string(b) + "]");
    }
}

} // namespace

double VorticityModel::omega(double p) const { return impl_->w(p); }
double VorticityModel::Omega(double p) const { return impl_->W(p); }
OmegaClass VorticityModel::omega_class() const { return impl_->cls; }
double VorticityModel::holder_gamma() const { return impl_->gamma; }
double VorticityModel::omega_min() const { return impl_->wmin; }
double VorticityModel::Omega1() const { return impl_->W1; }
double VorticityModel::two_omega_max() const { return impl_->twoWmax; }
double VorticityModel::two_omega_argmax() const { return impl_->twoWargmax; }
const std::string& VorticityModel::describe() const { return impl_->desc; }

VorticityModel VorticityModel::zero() {
    auto im = std::make_shared<Impl>();
    im->w = [](double) { return 0.0; };
    im->W = [](double) { return 0.0; };
    im->cls = OmegaClass::Zero;
    im->gamma = 0.5;
    im->wmin = 0.0;
    im->W1 = 0.0;
    im->twoWmax = 0.0;
    im->twoWargmax = 0.0;
    im->desc = "zero";
    im->kind = "zero";
    return VorticityModel(im);
}

VorticityModel VorticityModel::constant(double b, double gamma) {
    require_gamma(gamma);
    if (!std::isfinite(b)) throw ParseError("constant vorticity value must be finite");
    if (b == 0.0) return zero();
    auto im = std::make_shared<Impl>();
    im->w = [b](double) { return b; };
    im->W = [b](double p) { return b * p; };
    im->cls = b > 0.0 ? OmegaClass::Nonnegative : OmegaClass::General;
    im->gamma = gamma;
    im->wmin = b;
    im->W1 = b;
    im->twoWmax = b > 0.0 ? 2.0 * b : 0.0;
    im->twoWargmax = b > 0.0 ? 1.0 : 0.0;
    std::ostringstream os;
    os << "constant b=" << b;
    im->desc = os.str();
    im->kind = "constant";
    im->param = b;
    return VorticityModel(im);
}

VorticityModel VorticityModel::linear(double slope, double gamma) {
    require_gamma(gamma);
    if (!std::isfinite(slope)) throw ParseError("linear vorticity slope must be finite");
    if (slope == 0.0) return zero();
    auto im = std::make_shared<Impl>();
    im->w = [slope](double p) { return slope * p; };
    im->W = [slope](double p) { return 0.5 * slope * p * p; };
    im->cls = slope > 0.0 ? OmegaClass::Nonnegative : OmegaClass::General;
    im->gamma = gamma;
    im->wmin = slope > 0.0 ? 0.0 : slope;
    im->W1 = 0.5 * slope;
    im->twoWmax = slope > 0.0 ? slope : 0.0;
    im->twoWargmax = slope > 0.0 ? 1.0 : 0.0;
    std::ostringstream os;
    os << "linear slope=" << slope;
    im->desc = os.str();
    im->kind = "linear";
    im->param = slope;
    return VorticityModel(im);
}

VorticityModel VorticityModel::tabulated(const std::vector<double>& p,
                                         const std::vector<double>& w, double gamma) {
    require_gamma(gamma);
    if (p.size() != w.size() || p.size() < 2)
        throw ParseError("tabulated vorticity needs matching p and omega arrays of size >= 2");
    for (size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p[i]) || !std::isfinite(w[i]))
            throw ParseError("tabulated vorticity samples must be finite");
        if (i > 0 && !(p[i] > p[i - 1]))
            throw ParseError("tabulated vorticity abscissae must increase strictly");
    }
    if (p.front() != 0.0 || p.back() != 1.0)
        throw ParseError("tabulated vorticity must cover p in [0,1] with endpoints 0 and 1");

    Eigen::VectorXd px = Eigen::Map<const Eigen::VectorXd>(p.data(), p.size());
    Eigen::VectorXd wx = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    // End slopes from one-sided second-order differences of the data.
    const int n = static_cast<int>(p.size());
    double sl, sr;
    if (n == 2) {
        sl = sr = (wx(1) - wx(0)) / (px(1) - px(0));
    } else {
        const double a0 = px(1) - px(0), b0 = px(2) - px(1);
        sl = -(2.0 * a0 + b0) / (a0 * (a0 + b0)) * wx(0) + (a0 + b0) / (a0 * b0) * wx(1) -
             a0 / (b0 * (a0 + b0)) * wx(2);
        const double an = px(n - 1) - px(n - 2), bn = px(n - 2) - px(n - 3);
        sr = (2.0 * an + bn) / (an * (an + bn)) * wx(n - 1) -
             (an + bn) / (an * bn) * wx(n - 2) + an / (bn * (an + bn)) * wx(n - 3);
    }
    auto spline = std::make_shared<CubicSpline>(CubicSpline::clamped(px, wx, sl, sr));

    auto im = std::make_shared<Impl>();
    im->w = [spline](double q) { return (*spline)(q); };
    im->W = [spline](double q) { return spline->integral(q); };
    im->gamma = gamma;
    im->wmin = sample_min(im->w);
    bool all_zero = true, all_nonneg = true;
    for (double v : w) {
        if (v != 0.0) all_zero = false;
        if (v < 0.0) all_nonneg = false;
    }
    if (im->wmin < -1e-12) all_nonneg = false;
    im->cls = all_zero ? OmegaClass::Zero
                       : (all_nonneg ? OmegaClass::Nonnegative : OmegaClass::General);
    im->W1 = im->W(1.0);
    locate_two_omega_max(im->W, im->twoWmax, im->twoWargmax);
    std::ostringstream os;
    os << "tabulated n=" << n;
    im->desc = os.str();
    im->kind = "tabulated";
    im->tab_p = p;
    im->tab_w = w;
    check_primitive(*im);
    return VorticityModel(im);
}

std::string VorticityModel::spec_json() const {
    io::JsonWriter j;
    j.text("kind", impl_->kind);
    j.number("gamma", impl_->gamma);
    if (impl_->kind == "constant" || impl_->kind == "linear") {
        j.number("param", impl_->param);
    } else if (impl_->kind == "tabulated") {
        j.raw("p", io::json_number_array(impl_->tab_p));
        j.raw("omega", io::json_number_array(impl_->tab_w));
    }
    return j.str();
}

VorticityModel VorticityModel::from_spec_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad vorticity spec json: ") + e.what());
    }
    if (!j.contains("kind") || !j["kind"].is_string())
        throw ParseError("vorticity spec json lacks a 'kind' string");
    const std::string kind = j["kind"].get<std::string>();
    const double gamma = j.value("gamma", 0.5);
    if (kind == "zero") return zero();
    if (kind == "constant") return constant(j.at("param").get<double>(), gamma);
    if (kind == "linear") return linear(j.at("param").get<double>(), gamma);
    if (kind == "tabulated") {
        std::vector<double> p = j.at("p").get<std::vector<double>>();
        std::vector<double> w = j.at("omega").get<std::vector<double>>();
        return tabulated(p, w, gamma);
    }
    throw ParseError("unknown vorticity kind '" + kind + "' in spec json");
}

namespace {

std::string trim_copy(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

void load_omega_table(const std::string& path, std::vector<double>& p,
                      std::vector<double>& w) {
    std::istringstream in(io::read_file(path));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim_copy(line);
        if (line.empty() || line[0] == '#') continue;
        size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected 'p,omega', got '" + line + "'");
        const std::string a = trim_copy(line.substr(0, comma));
        const std::string b = trim_copy(line.substr(comma + 1));
        if (lineno == 1 && (a == "p" || a == "\"p\"")) continue;
        p.push_back(io::parse_double(a, path + " column p"));
        w.push_back(io::parse_double(b, path + " column omega"));
    }
}

} // namespace

VorticityModel build_vorticity_model(const std::string& spec, double gamma,
                                     const std::string& base_dir) {
    const std::string text = trim_copy(spec);
    size_t space = text.find_first_of(" \t");
    const std::string kind = space == std::string::npos ? text : text.substr(0, space);
    const std::string arg =
        space == std::string::npos ? "" : trim_copy(text.substr(space + 1));

    if (kind == "zero") {
        if (!arg.empty()) throw ParseError("vorticity 'zero' takes no argument, got '" + arg + "'");
        return VorticityModel::zero();
    }
    if (kind == "constant") {
        if (arg.empty()) throw ParseError("vorticity 'constant' needs a value, e.g. 'constant 0.5'");
        return VorticityModel::constant(io::parse_double(arg, "vorticity constant"), gamma);
    }
    if (kind == "linear") {
        if (arg.empty()) throw ParseError("vorticity 'linear' needs a slope, e.g. 'linear 2'");
        return VorticityModel::linear(io::parse_double(arg, "vorticity slope"), gamma);
    }
    if (kind == "tabulated") {
        if (arg.empty()) throw ParseError("vorticity 'tabulated' needs a CSV path");
        std::string path = arg;
        if (!base_dir.empty() && path[0] != '/') path = base_dir + "/" + path;
        std::vector<double> p, w;
        load_omega_table(path, p, w);
        return VorticityModel::tabulated(p, w, gamma);
    }
    throw ParseError("unknown vorticity kind '" + kind +
                     "' (expected zero | constant B | linear A | tabulated PATH)");
}

} // namespace waves
