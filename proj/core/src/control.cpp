#include "ctrllab/control.hpp"

#include "ctrllab/errors.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ctrllab {

std::vector<double> uniform_grid(double T, int points) {
    if (points < 2) throw InputError("control grid needs at least two points");
    std::vector<double> t(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) t[static_cast<std::size_t>(i)] = T * double(i) / double(points - 1);
    return t;
}

double trapezoid_l2_norm(const std::vector<double>& u, double T) {
    if (u.size() < 2) return 0.0;
    const double h = T / double(u.size() - 1);
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double w = (i == 0 || i + 1 == u.size()) ? 0.5 : 1.0;
        s += w * u[i] * u[i];
    }
    return std::sqrt(h * s);
}

ControlSignal ControlSignal::zero(double T, int points) {
    return from_samples(T, std::vector<double>(static_cast<std::size_t>(std::max(points, 2)), 0.0));
}

ControlSignal ControlSignal::from_samples(double T, std::vector<double> u) {
    if (!(T > 0.0)) throw InputError("control horizon must be positive");
    ControlSignal c;
    c.T = T;
    c.t = uniform_grid(T, static_cast<int>(u.size()));
    c.u = std::move(u);
    c.finalize();
    return c;
}

void ControlSignal::finalize() {
    if (u.size() != t.size() || u.size() < 2) throw InputError("control samples do not match the time grid");
    for (double v : u)
        if (!std::isfinite(v)) throw InputError("control has non-finite samples");
    norm_l2 = trapezoid_l2_norm(u, T);
    if (u.size() >= 5 && !piecewise_linear) {
        // fourth-order one-sided endpoint slopes keep the spline O(h^4) up to the boundary
        const double h = step();
        const std::size_t n = u.size() - 1;
        const double d0 = (-25 * u[0] + 48 * u[1] - 36 * u[2] + 16 * u[3] - 3 * u[4]) / (12 * h);
        const double d1 = (25 * u[n] - 48 * u[n - 1] + 36 * u[n - 2] - 16 * u[n - 3] + 3 * u[n - 4]) / (12 * h);
        auto sp = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(u.begin(), u.end(),
                                                                                                0.0, h, d0, d1);
        spline_ = std::make_shared<const std::function<double(double)>>([sp](double x) { return (*sp)(x); });
    } else {
        spline_.reset();
    }
}

double ControlSignal::operator()(double time) const {
    if (u.empty()) return 0.0;
    const double h = step();
    const double x = std::clamp(time, 0.0, T) / h;
    const double r = std::round(x);
    if (std::abs(x - r) < 1e-9) return u[static_cast<std::size_t>(r)];
    if (spline_) return (*spline_)(std::clamp(time, 0.0, T));
    const auto i = static_cast<std::size_t>(std::floor(x));
    const double f = x - double(i);
    return (1.0 - f) * u[i] + f * u[std::min(i + 1, u.size() - 1)];
}

void ControlSignal::write_csv(std::ostream& os) const {
    os << "t,u\n";
    os.precision(17);
    for (std::size_t i = 0; i < t.size(); ++i) os << t[i] << ',' << u[i] << '\n';
}

ControlSignal ControlSignal::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open control file " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,u", 0) != 0) throw InputError(path + ":1: expected header 't,u'");
    std::vector<double> ts, us;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double a, b;
        if (!(ss >> a >> b)) throw InputError(path + ":" + std::to_string(lineno) + ": expected 't,u'");
        ts.push_back(a);
        us.push_back(b);
    }
    if (ts.size() < 2 || ts.front() != 0.0) throw InputError(path + ": control grid must start at t = 0");
    const double T = ts.back();
    const double h = T / double(ts.size() - 1);
    for (std::size_t i = 0; i < ts.size(); ++i)
        if (std::abs(ts[i] - h * double(i)) > 1e-9 * std::max(1.0, T))
            throw InputError(path + ":" + std::to_string(i + 2) + ": control grid is not uniform");
    return from_samples(T, std::move(us));
}

} // namespace ctrllab
