#pragma once

#include "ctrllab/fnspace.hpp"
#include "ctrllab/spectral.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctrllab::cli {

// Schema violation in a configuration file; the message starts with "<file>:<line>:".
struct ConfigError : std::runtime_error {
    ConfigError(const std::string& what, int line) : std::runtime_error(what), line(line) {}
    int line;
};

// Parsed JSON together with the source line of every object key (JSON pointer -> line).
struct ConfigSource {
    std::string path;
    nlohmann::json doc;
    std::map<std::string, int> lines;

    static ConfigSource parse(const std::string& text, const std::string& path = "<config>");
    static ConfigSource load(const std::string& path);
    // line of the pointer, or of its nearest recorded ancestor
    int line_of(const std::string& pointer) const;
    [[noreturn]] void fail(const std::string& pointer, const std::string& message) const;
};

struct NuConfig {
    enum class Kind { Rational, Real, Liouville } kind = Kind::Real;
    int i0 = 1, j0 = 1;
    std::string real = "2";
    double sigma = 1.0;
    int P = 3;
    std::string parity = "even";
};

struct QConfig {
    enum class Kind { SineSeries, TrigSeries, Constant, File, Synthetic } kind = Kind::SineSeries;
    std::vector<double> sine{1.0};
    std::vector<double> cosine;
    double c0 = 0.0;
    std::string file;
    double tau = 1.0;
    int L = 30;
};

struct Y0Config {
    std::vector<double> first, second;
    bool random = false;
    int modes = 6;
    unsigned long long seed = 1;
};

struct ObservabilityConfig {
    std::string witness = "rational_chain"; // fast, pair, rational_chain
    std::vector<int> indices;
};

struct RunConfig {
    NuConfig nu;
    QConfig q;
    int K = 8;
    int N_sim = 0; // 0: 2K
    double T = 1.0;
    int precision_bits = 128;
    int quad_panels = 8;
    std::string method = "gram";
    double epsilon = 1e-6;
    std::string output_dir = ".";
    int steps = 2048;
    int grid_points = 2049;
    Y0Config y0;
    std::optional<std::string> control_file;
    ObservabilityConfig observability;
    int gram_window = 64;

    std::string hash; // SHA-256 of the canonical JSON form
    std::string source_path;

    static RunConfig from_source(const ConfigSource& src);
    static RunConfig load(const std::string& path);

    int n_sim() const { return N_sim > 0 ? N_sim : 2 * K; }
    ProblemData problem() const;
    VectorField2 initial_state() const;
};

// SHA-256 hex digest of json.dump() (sorted keys, no whitespace).
std::string config_hash(const nlohmann::json& j);

} // namespace ctrllab::cli
