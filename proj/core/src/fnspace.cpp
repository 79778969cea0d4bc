#include "ctrllab/fnspace.hpp"

#include "ctrllab/errors.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

namespace ctrllab {

namespace {

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw InputError(std::string("non-finite value in ") + what);
}

double weight(std::size_t n, Space s) {
    double d = static_cast<double>(n);
    switch (s) {
    case Space::L2: return 1.0;
    case Space::H10: return d * d;
    case Space::Hm1: return 1.0 / (d * d);
    }
    return 1.0;
}

} // namespace

SineSeries::SineSeries(std::vector<double> a) : a_(std::move(a)) { check_finite(a_, "sine series"); }

SineSeries SineSeries::mode(std::size_t n, std::size_t cutoff, double amp) {
    SineSeries s(std::max(n, cutoff));
    s.at(n) = amp;
    return s;
}

SineSeries SineSeries::resized(std::size_t n) const {
    SineSeries r(n);
    for (std::size_t i = 0; i < std::min(n, a_.size()); ++i) r.a_[i] = a_[i];
    return r;
}

double SineSeries::operator()(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < a_.size(); ++i) s += a_[i] * std::sin((i + 1) * x);
    return kSqrt2OverPi * s;
}

double SineSeries::derivative_at_zero() const {
    double s = 0.0;
    for (std::size_t i = 0; i < a_.size(); ++i) s += a_[i] * (i + 1);
    return kSqrt2OverPi * s;
}

double SineSeries::norm_sq(Space sp) const {
    double s = 0.0;
    for (std::size_t i = 0; i < a_.size(); ++i) s += weight(i + 1, sp) * a_[i] * a_[i];
    return s;
}

double SineSeries::norm(Space sp) const { return std::sqrt(norm_sq(sp)); }

SineSeries SineSeries::operator+(const SineSeries& o) const {
    SineSeries r = resized(std::max(size(), o.size()));
    for (std::size_t i = 0; i < o.size(); ++i) r.a_[i] += o.a_[i];
    return r;
}

SineSeries SineSeries::operator-(const SineSeries& o) const { return *this + o * -1.0; }

SineSeries SineSeries::operator*(double s) const {
    SineSeries r = *this;
    for (double& x : r.a_) x *= s;
    return r;
}

VectorField2::VectorField2(SineSeries a, SineSeries b) : first(std::move(a)), second(std::move(b)) {
    std::size_t n = std::max(first.size(), second.size());
    first = first.resized(n);
    second = second.resized(n);
}

double VectorField2::norm(Space s) const { return std::sqrt(norm_sq(s)); }

VectorField2 VectorField2::operator+(const VectorField2& o) const {
    return {first + o.first, second + o.second};
}

VectorField2 VectorField2::operator-(const VectorField2& o) const {
    return {first - o.first, second - o.second};
}

VectorField2 VectorField2::operator*(double s) const { return {first * s, second * s}; }

double inner(const SineSeries& f, const SineSeries& g, Space sp) {
    std::size_t n = std::min(f.size(), g.size());
    double s = 0.0;
    for (std::size_t i = 1; i <= n; ++i) s += weight(i, sp) * f[i] * g[i];
    return s;
}

double inner(const VectorField2& f, const VectorField2& g, Space sp) {
    return inner(f.first, g.first, sp) + inner(f.second, g.second, sp);
}

SampledFunction::SampledFunction(std::vector<double> x, std::vector<double> f)
    : x_(std::move(x)), f_(std::move(f)) {
    if (x_.size() != f_.size()) throw InputError("sampled function: x and value lengths differ");
    if (x_.size() < 2) throw InputError("sampled function needs at least 2 points");
    check_finite(x_, "sample grid");
    check_finite(f_, "sample values");
    const std::size_t n = x_.size();
    const double h = kPi / static_cast<double>(n - 1);
    if (std::abs(x_.front()) > 1e-12 || std::abs(x_.back() - kPi) > 1e-9)
        throw InputError("sampled function grid must start at 0 and end at pi");
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(x_[i] - i * h) > 1e-9 * std::max(1.0, h * 1e3))
            throw InputError("sampled function grid must be uniform and ascending");
    if (n >= 4) {
        auto sp = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
            f_.begin(), f_.end(), 0.0, h);
        spline_ = [sp](double t) { return (*sp)(t); };
    } else {
        auto xs = x_;
        auto fs = f_;
        spline_ = [xs, fs, h](double t) {
            std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(std::max(0.0, t / h)), xs.size() - 2);
            double w = (t - xs[i]) / h;
            return (1 - w) * fs[i] + w * fs[i + 1];
        };
    }
}

SampledFunction SampledFunction::from_function(const std::function<double(double)>& f, std::size_t points) {
    if (points < 2) throw InputError("need at least 2 sample points");
    std::vector<double> x(points), v(points);
    for (std::size_t i = 0; i < points; ++i) {
        x[i] = kPi * static_cast<double>(i) / static_cast<double>(points - 1);
        v[i] = f(x[i]);
    }
    x.back() = kPi;
    return SampledFunction(std::move(x), std::move(v));
}

SampledFunction SampledFunction::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open sample file " + path);
    std::string line;
    if (!std::getline(in, line)) throw InputError(path + ": empty file");
    if (line.find("x") == std::string::npos) throw InputError(path + ": missing header 'x,value'");
    std::vector<double> x, f;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double a, b;
        if (!(ss >> a >> b)) throw InputError(path + ":" + std::to_string(lineno) + ": expected 'x,value'");
        x.push_back(a);
        f.push_back(b);
    }
    return SampledFunction(std::move(x), std::move(f));
}

void SampledFunction::write_csv(std::ostream& os) const {
    os << "x,value\n";
    os.precision(17);
    for (std::size_t i = 0; i < x_.size(); ++i) os << x_[i] << ',' << f_[i] << '\n';
}

double SampledFunction::operator()(double x) const { return spline_(std::clamp(x, 0.0, kPi)); }

double SampledFunction::sup_norm() const {
    double m = 0.0;
    for (double v : f_) m = std::max(m, std::abs(v));
    return m;
}

double gauss_composite(const std::function<double(double)>& f, double a, double b, int panels) {
    using Rule = boost::math::quadrature::gauss<double, 7>;
    const auto& xs = Rule::abscissa();
    const auto& ws = Rule::weights();
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        double c = a + (p + 0.5) * h, r = 0.5 * h;
        double s = ws[0] * f(c);
        for (std::size_t i = 1; i < xs.size(); ++i) s += ws[i] * (f(c + r * xs[i]) + f(c - r * xs[i]));
        total += r * s;
    }
    return total;
}

QuadResult quad_oscillatory(const OscillatoryIntegrand& in, const PrecisionContext& ctx) {
    ctx.validate();
    if (!std::isfinite(in.omega)) throw InputError("oscillatory quadrature: non-finite frequency");
    auto g = [&](double x) {
        double arg = in.omega * x + in.phase;
        return in.factor(x) * (in.use_cos ? std::cos(arg) : std::sin(arg));
    };
    const double periods = 0.5 * (std::abs(in.omega) + in.factor_bandwidth);
    int panels = ctx.quad_panels_per_period * std::max(1, static_cast<int>(std::ceil(periods)));
    constexpr int kPanelCap = 1 << 18;
    QuadResult r;
    double coarse = gauss_composite(g, 0.0, kPi, panels);
    for (;;) {
        double fine = gauss_composite(g, 0.0, kPi, 2 * panels);
        r.value = fine;
        r.error = std::abs(fine - coarse);
        r.panels = 2 * panels;
        if (r.error <= ctx.tail_tolerance) break;
        if (2 * panels >= kPanelCap) {
            r.warning = true;
            break;
        }
        panels *= 2;
        coarse = fine;
    }
    return r;
}

SineSeries project(const std::function<double(double)>& f, std::size_t n, const PrecisionContext& ctx,
                   double bandwidth) {
    ctx.validate();
    SineSeries s(n);
    // one shared set of panels: all modes up to n oscillate at most n/2 times
    const double periods = 0.5 * (static_cast<double>(n) + bandwidth);
    const int panels = 2 * ctx.quad_panels_per_period * std::max(1, static_cast<int>(std::ceil(periods)));
    using Rule = boost::math::quadrature::gauss<double, 7>;
    const auto& xs = Rule::abscissa();
    const auto& ws = Rule::weights();
    const double h = kPi / panels;
    std::vector<double> nodes, wts;
    for (int p = 0; p < panels; ++p) {
        double c = (p + 0.5) * h, r = 0.5 * h;
        nodes.push_back(c);
        wts.push_back(r * ws[0]);
        for (std::size_t i = 1; i < xs.size(); ++i) {
            nodes.push_back(c + r * xs[i]);
            wts.push_back(r * ws[i]);
            nodes.push_back(c - r * xs[i]);
            wts.push_back(r * ws[i]);
        }
    }
    std::vector<double> fv(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        fv[i] = f(nodes[i]);
        if (!std::isfinite(fv[i])) throw InputError("projection: non-finite function value");
    }
    for (std::size_t k = 1; k <= n; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) acc += wts[i] * fv[i] * std::sin(k * nodes[i]);
        s.at(k) = kSqrt2OverPi * acc;
    }
    return s;
}

SineSeries project(const SampledFunction& f, std::size_t n, const PrecisionContext& ctx) {
    // the spline is piecewise cubic: align panels with sample intervals when feasible
    PrecisionContext c = ctx;
    const double intervals = static_cast<double>(f.x().size() - 1);
    const double per_period = intervals / std::max(1.0, 0.5 * n);
    c.quad_panels_per_period = std::max(ctx.quad_panels_per_period, static_cast<int>(std::ceil(per_period / 2)));
    return project([&f](double x) { return f(x); }, n, c);
}

} // namespace ctrllab
