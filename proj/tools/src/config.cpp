#include "ctrllab_cli/config.hpp"

#include "ctrllab/condensation.hpp"
#include "ctrllab/errors.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <random>
#include <set>
#include <sstream>

namespace ctrllab::cli {

using nlohmann::json;

namespace {

// Forward iterator over the text that counts consumed newlines.
struct LineIterator {
    using iterator_category = std::forward_iterator_tag;
    using value_type = char;
    using difference_type = std::ptrdiff_t;
    using pointer = const char*;
    using reference = const char&;

    const char* p = nullptr;
    int* line = nullptr;

    reference operator*() const { return *p; }
    LineIterator& operator++() {
        if (*p == '\n') ++*line;
        ++p;
        return *this;
    }
    LineIterator operator++(int) {
        LineIterator t = *this;
        ++*this;
        return t;
    }
    bool operator==(const LineIterator& o) const { return p == o.p; }
    bool operator!=(const LineIterator& o) const { return p != o.p; }
};

std::string escape_token(const std::string& k) {
    std::string r;
    for (char c : k) {
        if (c == '~')
            r += "~0";
        else if (c == '/')
            r += "~1";
        else
            r += c;
    }
    return r;
}

class LineSax : public nlohmann::detail::json_sax_dom_parser<json> {
public:
    using Base = nlohmann::detail::json_sax_dom_parser<json>;
    LineSax(json& root, const int* line, std::map<std::string, int>& lines) : Base(root), line_(line), lines_(lines) {}

    bool null() { return value(), Base::null(); }
    bool boolean(bool v) { return value(), Base::boolean(v); }
    bool number_integer(number_integer_t v) { return value(), Base::number_integer(v); }
    bool number_unsigned(number_unsigned_t v) { return value(), Base::number_unsigned(v); }
    bool number_float(number_float_t v, const string_t& s) { return value(), Base::number_float(v, s); }
    bool string(string_t& v) { return value(), Base::string(v); }
    bool binary(binary_t& v) { return value(), Base::binary(v); }
    bool start_object(std::size_t n) {
        value();
        stack_.push_back({false, {}, -1});
        return Base::start_object(n);
    }
    bool key(string_t& k) {
        stack_.back().key = k;
        lines_[pointer()] = *line_;
        return Base::key(k);
    }
    bool end_object() {
        stack_.pop_back();
        return Base::end_object();
    }
    bool start_array(std::size_t n) {
        value();
        stack_.push_back({true, {}, -1});
        return Base::start_array(n);
    }
    bool end_array() {
        stack_.pop_back();
        return Base::end_array();
    }

private:
    struct Frame {
        bool array;
        std::string key;
        int index;
    };
    const int* line_;
    std::map<std::string, int>& lines_;
    std::vector<Frame> stack_;

    void value() {
        if (!stack_.empty() && stack_.back().array) {
            ++stack_.back().index;
            lines_[pointer()] = *line_;
        }
    }
    std::string pointer() const {
        std::string r;
        for (const auto& f : stack_) r += "/" + (f.array ? std::to_string(f.index) : escape_token(f.key));
        return r;
    }
};

std::string type_name(const json& j) { return j.type_name(); }

class Reader {
public:
    Reader(const ConfigSource& s) : s_(s) {}

    const json* find(const json& obj, const std::string& key) const {
        auto it = obj.find(key);
        return it == obj.end() ? nullptr : &*it;
    }
    void only_keys(const json& obj, const std::string& ptr, std::set<std::string> allowed) const {
        if (!obj.is_object()) s_.fail(ptr, "expected an object, found " + type_name(obj));
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!allowed.count(it.key())) {
                std::string list;
                for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
                s_.fail(ptr + "/" + escape_token(it.key()), "unknown key '" + it.key() + "' (allowed: " + list + ")");
            }
    }
    double number(const json& j, const std::string& ptr) const {
        if (!j.is_number()) s_.fail(ptr, "expected a number, found " + type_name(j));
        const double v = j.get<double>();
        if (!std::isfinite(v)) s_.fail(ptr, "expected a finite number");
        return v;
    }
    double positive(const json& j, const std::string& ptr) const {
        const double v = number(j, ptr);
        if (!(v > 0)) s_.fail(ptr, "expected a positive number, found " + j.dump());
        return v;
    }
    long long integer(const json& j, const std::string& ptr, long long lo, long long hi) const {
        if (!j.is_number_integer()) s_.fail(ptr, "expected an integer, found " + j.dump());
        const long long v = j.get<long long>();
        if (v < lo || v > hi)
            s_.fail(ptr, "value " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return v;
    }
    std::string string(const json& j, const std::string& ptr) const {
        if (!j.is_string()) s_.fail(ptr, "expected a string, found " + type_name(j));
        return j.get<std::string>();
    }
    std::vector<double> numbers(const json& j, const std::string& ptr) const {
        if (!j.is_array()) s_.fail(ptr, "expected an array of numbers, found " + type_name(j));
        std::vector<double> r;
        for (std::size_t i = 0; i < j.size(); ++i) r.push_back(number(j[i], ptr + "/" + std::to_string(i)));
        return r;
    }
    const ConfigSource& src() const { return s_; }

private:
    const ConfigSource& s_;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open configuration file", 0);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

ConfigSource ConfigSource::parse(const std::string& text, const std::string& path) {
    ConfigSource s;
    s.path = path;
    int line = 1;
    LineSax sax(s.doc, &line, s.lines);
    LineIterator first{text.data(), &line}, last{text.data() + text.size(), &line};
    try {
        json::sax_parse(first, last, &sax);
    } catch (const json::parse_error& e) {
        // nlohmann reports "at line L, column C"
        throw ConfigError(path + ": invalid JSON: " + e.what(), line);
    }
    return s;
}

ConfigSource ConfigSource::load(const std::string& path) { return parse(read_file(path), path); }

int ConfigSource::line_of(const std::string& pointer) const {
    std::string p = pointer;
    for (;;) {
        auto it = lines.find(p);
        if (it != lines.end()) return it->second;
        const auto cut = p.rfind('/');
        if (cut == std::string::npos || p.empty()) return 1;
        p = p.substr(0, cut);
    }
}

void ConfigSource::fail(const std::string& pointer, const std::string& message) const {
    const int l = line_of(pointer);
    throw ConfigError(path + ":" + std::to_string(l) + ": " + (pointer.empty() ? "/" : pointer) + ": " + message, l);
}

std::string config_hash(const json& j) {
    const std::string s = j.dump();
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(s.data(), s.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("config hash: SHA-256 failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

RunConfig RunConfig::from_source(const ConfigSource& src) {
    Reader r(src);
    const json& d = src.doc;
    r.only_keys(d, "", {"nu", "q", "K", "N_sim", "T", "precision_bits", "quad_panels", "method", "epsilon",
                        "output_dir", "steps", "grid_points", "y0", "control_file", "observability", "gram_window"});
    RunConfig c;
    c.source_path = src.path;
    c.hash = config_hash(d);

    const json* nu = r.find(d, "nu");
    if (!nu) src.fail("", "missing required key 'nu'");
    r.only_keys(*nu, "/nu", {"rational", "real", "liouville"});
    if (nu->size() != 1) src.fail("/nu", "expected exactly one of rational, real, liouville");
    if (auto* v = r.find(*nu, "rational")) {
        if (!v->is_array() || v->size() != 2) src.fail("/nu/rational", "expected [i0, j0]");
        c.nu.kind = NuConfig::Kind::Rational;
        c.nu.i0 = static_cast<int>(r.integer((*v)[0], "/nu/rational/0", 1, 1000));
        c.nu.j0 = static_cast<int>(r.integer((*v)[1], "/nu/rational/1", 1, 1000));
    } else if (auto* v = r.find(*nu, "real")) {
        c.nu.kind = NuConfig::Kind::Real;
        c.nu.real = r.string(*v, "/nu/real");
        try {
            std::size_t used = 0;
            const double x = std::stod(c.nu.real, &used);
            if (used != c.nu.real.size() || !(x > 0)) throw std::invalid_argument("bad");
        } catch (const std::exception&) {
            src.fail("/nu/real", "expected a positive decimal string, found '" + c.nu.real + "'");
        }
    } else if (auto* v = r.find(*nu, "liouville")) {
        c.nu.kind = NuConfig::Kind::Liouville;
        r.only_keys(*v, "/nu/liouville", {"sigma", "P", "parity"});
        if (auto* s = r.find(*v, "sigma")) c.nu.sigma = r.positive(*s, "/nu/liouville/sigma");
        if (auto* s = r.find(*v, "P")) c.nu.P = static_cast<int>(r.integer(*s, "/nu/liouville/P", 1, 6));
        if (auto* s = r.find(*v, "parity")) {
            c.nu.parity = r.string(*s, "/nu/liouville/parity");
            if (c.nu.parity != "even" && c.nu.parity != "odd")
                src.fail("/nu/liouville/parity", "expected \"even\" or \"odd\"");
        }
    }

    if (const json* q = r.find(d, "q")) {
        r.only_keys(*q, "/q", {"sine_series", "trig_series", "constant", "file", "synthetic"});
        if (q->size() != 1) src.fail("/q", "expected exactly one of sine_series, trig_series, constant, file, synthetic");
        if (auto* v = r.find(*q, "sine_series")) {
            c.q.kind = QConfig::Kind::SineSeries;
            c.q.sine = r.numbers(*v, "/q/sine_series");
        } else if (auto* v = r.find(*q, "trig_series")) {
            c.q.kind = QConfig::Kind::TrigSeries;
            r.only_keys(*v, "/q/trig_series", {"c0", "sin", "cos"});
            c.q.sine.clear();
            if (auto* s = r.find(*v, "c0")) c.q.c0 = r.number(*s, "/q/trig_series/c0");
            if (auto* s = r.find(*v, "sin")) c.q.sine = r.numbers(*s, "/q/trig_series/sin");
            if (auto* s = r.find(*v, "cos")) c.q.cosine = r.numbers(*s, "/q/trig_series/cos");
        } else if (auto* v = r.find(*q, "constant")) {
            c.q.kind = QConfig::Kind::Constant;
            c.q.c0 = r.number(*v, "/q/constant");
        } else if (auto* v = r.find(*q, "file")) {
            c.q.kind = QConfig::Kind::File;
            c.q.file = r.string(*v, "/q/file");
        } else if (auto* v = r.find(*q, "synthetic")) {
            c.q.kind = QConfig::Kind::Synthetic;
            r.only_keys(*v, "/q/synthetic", {"tau", "L"});
            if (auto* s = r.find(*v, "tau")) c.q.tau = r.positive(*s, "/q/synthetic/tau");
            if (auto* s = r.find(*v, "L")) c.q.L = static_cast<int>(r.integer(*s, "/q/synthetic/L", 1, 200));
            if (c.nu.kind != NuConfig::Kind::Rational) src.fail("/q/synthetic", "synthetic coupling needs a rational nu");
        }
    }

    if (auto* v = r.find(d, "K")) c.K = static_cast<int>(r.integer(*v, "/K", 1, 400));
    if (auto* v = r.find(d, "N_sim")) c.N_sim = static_cast<int>(r.integer(*v, "/N_sim", 1, 1024));
    if (auto* v = r.find(d, "T")) c.T = r.positive(*v, "/T");
    if (auto* v = r.find(d, "precision_bits"))
        c.precision_bits = static_cast<int>(r.integer(*v, "/precision_bits", 53, 1 << 16));
    if (auto* v = r.find(d, "quad_panels")) c.quad_panels = static_cast<int>(r.integer(*v, "/quad_panels", 1, 4096));
    if (auto* v = r.find(d, "method")) {
        c.method = r.string(*v, "/method");
        if (c.method != "gram" && c.method != "blaschke" && c.method != "hum")
            src.fail("/method", "expected \"gram\", \"blaschke\" or \"hum\", found \"" + c.method + "\"");
    }
    if (auto* v = r.find(d, "epsilon")) c.epsilon = r.positive(*v, "/epsilon");
    if (auto* v = r.find(d, "output_dir")) c.output_dir = r.string(*v, "/output_dir");
    if (auto* v = r.find(d, "steps")) c.steps = static_cast<int>(r.integer(*v, "/steps", 2, 1 << 20));
    if (auto* v = r.find(d, "grid_points")) c.grid_points = static_cast<int>(r.integer(*v, "/grid_points", 3, 1 << 22));
    if (auto* v = r.find(d, "gram_window")) c.gram_window = static_cast<int>(r.integer(*v, "/gram_window", 1, 4096));
    if (auto* v = r.find(d, "control_file")) c.control_file = r.string(*v, "/control_file");
    if (auto* v = r.find(d, "y0")) {
        r.only_keys(*v, "/y0", {"first", "second", "random"});
        if (auto* s = r.find(*v, "first")) c.y0.first = r.numbers(*s, "/y0/first");
        if (auto* s = r.find(*v, "second")) c.y0.second = r.numbers(*s, "/y0/second");
        if (auto* s = r.find(*v, "random")) {
            if (v->contains("first") || v->contains("second"))
                src.fail("/y0/random", "random data excludes explicit coefficients");
            r.only_keys(*s, "/y0/random", {"modes", "seed"});
            c.y0.random = true;
            if (auto* m = r.find(*s, "modes")) c.y0.modes = static_cast<int>(r.integer(*m, "/y0/random/modes", 1, 1024));
            if (auto* m = r.find(*s, "seed"))
                c.y0.seed = static_cast<unsigned long long>(r.integer(*m, "/y0/random/seed", 0, (1LL << 62)));
        }
    } else {
        c.y0.random = true;
    }
    if (auto* v = r.find(d, "observability")) {
        r.only_keys(*v, "/observability", {"witness", "indices"});
        if (auto* s = r.find(*v, "witness")) {
            c.observability.witness = r.string(*s, "/observability/witness");
            if (c.observability.witness != "fast" && c.observability.witness != "pair" &&
                c.observability.witness != "rational_chain")
                src.fail("/observability/witness", "expected \"fast\", \"pair\" or \"rational_chain\"");
        }
        if (auto* s = r.find(*v, "indices")) {
            if (!s->is_array()) src.fail("/observability/indices", "expected an array of positive integers");
            for (std::size_t i = 0; i < s->size(); ++i)
                c.observability.indices.push_back(static_cast<int>(
                    r.integer((*s)[i], "/observability/indices/" + std::to_string(i), 1, 1 << 20)));
        }
    }
    if (c.N_sim > 0 && c.N_sim < c.K) src.fail("/N_sim", "N_sim must be at least K");
    return c;
}

RunConfig RunConfig::load(const std::string& path) { return from_source(ConfigSource::load(path)); }

ProblemData RunConfig::problem() const {
    ProblemData p;
    p.K = K;
    p.ctx.working_bits = precision_bits;
    p.ctx.quad_panels_per_period = quad_panels;
    switch (nu.kind) {
    case NuConfig::Kind::Rational: p.nu = NuValue::rational(nu.i0, nu.j0, precision_bits); break;
    case NuConfig::Kind::Real: p.nu = NuValue::real(nu.real, precision_bits); break;
    case NuConfig::Kind::Liouville:
        p.nu = liouville_nu(nu.sigma, nu.P, nu.parity == "even" ? Parity::Even : Parity::Odd,
                            std::max(precision_bits, 256))
                   .second;
        break;
    }
    switch (q.kind) {
    case QConfig::Kind::SineSeries: p.q = Coupling::sine_series(q.sine); break;
    case QConfig::Kind::TrigSeries: p.q = Coupling::trig_series(q.c0, q.sine, q.cosine); break;
    case QConfig::Kind::Constant: p.q = Coupling::constant(q.c0); break;
    case QConfig::Kind::File: p.q = Coupling::sampled(SampledFunction::read_csv(q.file)); break;
    case QConfig::Kind::Synthetic:
        p.q = Coupling::synthetic_rational(nu.i0, nu.j0, q.tau, q.L, std::max(precision_bits, 256));
        break;
    }
    return p;
}

VectorField2 RunConfig::initial_state() const {
    const std::size_t n = static_cast<std::size_t>(std::max(n_sim(), 2 * K));
    if (y0.random) {
        std::mt19937_64 rng(y0.seed);
        std::normal_distribution<double> nd;
        SineSeries a(n), b(n);
        for (int m = 1; m <= std::min<int>(y0.modes, static_cast<int>(n)); ++m) {
            a.at(static_cast<std::size_t>(m)) = nd(rng) / m;
            b.at(static_cast<std::size_t>(m)) = nd(rng) / m;
        }
        return VectorField2(a, b);
    }
    SineSeries a(std::vector<double>(y0.first)), b(std::vector<double>(y0.second));
    const std::size_t m = std::max({n, a.size(), b.size()});
    return VectorField2(a.resized(m), b.resized(m));
}

} // namespace ctrllab::cli
