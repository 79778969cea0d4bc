#include "ctrllab_cli/commands.hpp"

#include "ctrllab/condensation.hpp"
#include "ctrllab/errors.hpp"
#include "ctrllab/moment.hpp"
#include "ctrllab/simulate.hpp"

#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace ctrllab::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string out_dir(const RunConfig& c, const CommandOptions& o) {
    const std::string d = o.out_dir.empty() ? c.output_dir : o.out_dir;
    fs::create_directories(d);
    return d;
}

json finite(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return nullptr;
    return x > 0 ? "inf" : "-inf";
}

json base_sidecar(const std::string& command, const std::string& file, const RunConfig& c, const CommandOptions& o,
                  int bits) {
    return json{{"command", command},
                {"file", file},
                {"config", c.source_path},
                {"config_hash", c.hash},
                {"precision_bits", bits},
                {"threads", o.threads}};
}

void emit(CommandResult& r, const std::string& dir, const std::string& stem, const std::string& csv, json sidecar) {
    const std::string csv_path = (fs::path(dir) / (stem + ".csv")).string();
    const std::string json_path = (fs::path(dir) / (stem + ".json")).string();
    write_atomic(csv_path, csv);
    write_atomic(json_path, sidecar.dump(2) + "\n");
    r.files.push_back(csv_path);
    r.files.push_back(json_path);
}

json report_json(const NullControlReport& v) {
    return json{{"relative_residual", v.relative_residual}, {"norm_y0_Hm1", v.norm_y0},
                {"norm_yT_Hm1", v.norm_yT},                 {"controlled_residual", v.controlled_residual},
                {"tail_residual", v.tail_residual},         {"tail_decay", v.tail_decay},
                {"eigen_residual", v.eigen_residual},       {"K", v.K},
                {"N_sim", v.N_sim}};
}

json estimate_json(const TimeEstimate& t) {
    json comps = json::object();
    for (const auto& [k, v] : t.components) comps[k] = finite(v);
    return json{{"kind", to_string(t.kind)},
                {"K", t.K},
                {"estimate", finite(t.estimate_at_K)},
                {"infinite", t.infinite},
                {"components", comps},
                {"skipped", t.skipped}};
}

} // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> n{"spectrum", "minimal-time", "gram-scan", "control", "simulate",
                                            "observability"};
    return n;
}

void write_atomic(const std::string& path, const std::string& content) {
    const fs::path target(path);
    const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw InputError("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

json control_to_json(const ControlSignal& u) {
    json terms = json::array();
    for (const auto& e : u.exp_sum)
        terms.push_back({{"coeff", e.coeff}, {"lambda", e.lambda}, {"power", e.power}, {"coeff_exact", e.coeff_exact}});
    json groups = json::array();
    for (const auto& [g, n] : u.group_norms) groups.push_back({{"group", g}, {"norm_L2", n}});
    json diag = json::object();
    for (const auto& [k, v] : u.diagnostics) diag[k] = finite(v);
    return json{{"method", u.method},
                {"K", u.K},
                {"T", u.T},
                {"points", u.t.size()},
                {"interpolation", u.piecewise_linear ? "linear" : "cubic_spline"},
                {"norm_L2", u.norm_l2},
                {"moment_residual", u.moment_residual},
                {"regularization", u.regularization},
                {"bits_used", u.bits_used},
                {"group_norms", groups},
                {"series_U", u.series_U},
                {"series_V", u.series_V},
                {"diagnostics", diag},
                {"exp_sum", terms}};
}

ControlSignal load_control(const std::string& csv_path) {
    ControlSignal u = ControlSignal::read_csv(csv_path);
    fs::path side = fs::path(csv_path).replace_extension(".json");
    if (!fs::exists(side)) return u;
    std::ifstream in(side);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(side.string() + ": " + e.what());
    }
    const json& m = j.contains("control") ? j["control"] : j;
    if (m.contains("T") && std::abs(m["T"].get<double>() - u.T) > 1e-12 * u.T)
        throw InputError(side.string() + ": horizon T disagrees with " + csv_path);
    u.method = m.value("method", u.method);
    u.K = m.value("K", u.K);
    u.bits_used = m.value("bits_used", u.bits_used);
    if (m.value("interpolation", std::string("cubic_spline")) == "linear") {
        u.piecewise_linear = true;
        u.finalize();
    }
    if (m.contains("exp_sum") && !m["exp_sum"].empty()) {
        for (const auto& t : m["exp_sum"])
            u.exp_sum.push_back({t.at("coeff").get<double>(), t.at("lambda").get<double>(), t.at("power").get<int>(),
                                 t.value("coeff_exact", std::string())});
        u.has_exp_sum = true;
    }
    return u;
}

CommandResult cmd_spectrum(const RunConfig& c, const CommandOptions& o) {
    const ProblemData p = c.problem();
    const SpectrumTable tab = spectrum(p);
    const ControllabilityReport rep = approx_controllability_check(p);
    std::ostringstream csv;
    tab.write_csv(csv);
    double obs_err = 0.0;
    for (const auto& e : tab.entries) obs_err = std::max(obs_err, e.observation_error);
    json side = base_sidecar("spectrum", "spectrum.csv", c, o, p.ctx.working_bits);
    side["nu"] = p.nu.describe();
    side["regime"] = to_string(tab.regime);
    side["entries"] = tab.entries.size();
    side["certificates"] = {{"complete_below", tab.complete_below}, {"max_observation_error", obs_err}};
    side["approximate_controllability"] = {{"controllable", rep.controllable},
                                           {"failing_lambdas", rep.failing_lambdas},
                                           {"statement", rep.statement}};
    CommandResult r;
    emit(r, out_dir(c, o), "spectrum", csv.str(), side);
    r.summary = {{"entries", tab.entries.size()}, {"controllable", rep.controllable}};
    return r;
}

CommandResult cmd_minimal_time(const RunConfig& c, const CommandOptions& o) {
    const ProblemData p = c.problem();
    const TimeEstimate t = p.nu.is_rational() ? estimate_T0_rational(p, c.K) : estimate_T0_irrational(p, c.K);
    std::ostringstream csv;
    t.write_csv(csv);
    json side = base_sidecar("minimal-time", "minimal_time.csv", c, o, p.ctx.working_bits);
    side["estimate"] = estimate_json(t);
    json tail = json::array();
    for (const auto& [k, v] : t.running_sup_tail) tail.push_back({{"K_prime", k}, {"sup", finite(v)}});
    side["certificates"] = {{"running_sup_tail", tail}};
    CommandResult r;
    emit(r, out_dir(c, o), "minimal_time", csv.str(), side);
    r.summary = estimate_json(t);
    return r;
}

CommandResult cmd_gram_scan(const RunConfig& c, const CommandOptions& o) {
    if (c.nu.kind != NuConfig::Kind::Liouville) throw InputError("gram-scan needs a Liouville nu ({\"liouville\": {...}})");
    const int bits = std::max(c.precision_bits, 256);
    auto [spec, nu] = liouville_nu(c.nu.sigma, c.nu.P, c.nu.parity == "even" ? Parity::Even : Parity::Odd, bits);
    const auto recs = riesz_degeneracy_scan(spec, c.gram_window);
    std::ostringstream csv;
    write_gram_csv(csv, recs);
    json side = base_sidecar("gram-scan", "gram_scan.csv", c, o, bits);
    json conv = json::array();
    for (int i = 0; i < spec.size(); ++i)
        conv.push_back({{"k", spec.convergents[static_cast<std::size_t>(i)].first.str()},
                        {"j", spec.convergents[static_cast<std::size_t>(i)].second.str()},
                        {"verified", bool(spec.verified[static_cast<std::size_t>(i)])}});
    side["nu"] = nu.describe();
    side["convergents"] = conv;
    side["records"] = recs.size();
    side["certificates"] = {{"required_bits_direct", spec.required_bits_direct},
                            {"required_bits_construction", spec.required_bits_construction}};
    CommandResult r;
    emit(r, out_dir(c, o), "gram_scan", csv.str(), side);
    r.summary = {{"records", recs.size()}};
    return r;
}

CommandResult cmd_control(const RunConfig& c, const CommandOptions& o) {
    const ProblemData p = c.problem();
    const VectorField2 y0 = c.initial_state();
    MomentOptions mo;
    mo.grid_points = c.grid_points;
    mo.bits = std::max(c.precision_bits, 256);
    ControlSignal u;
    json extra = json::object();
    if (c.method == "hum") {
        HumOptions ho;
        ho.steps = c.grid_points - 1;
        HumReport h = hum_control(y0, c.T, c.epsilon, GalerkinModel::build(p, c.n_sim()), ho);
        u = h.u;
        u.K = c.K;
        extra = {{"epsilon", c.epsilon},
                 {"terminal_Hm1", h.terminal_hm1},
                 {"relative_gradient", h.relative_gradient},
                 {"iterations", h.iterations},
                 {"bound_constant", h.bound_constant}};
    } else if (c.method == "gram") {
        const MomentSystem ms = moments_from_initial(y0, spectrum(p), c.T);
        u = control_series(ms, ControlMethod::Gram, p, mo);
    } else {
        const MomentSystem ms = moments_grouped(y0, p, c.K, c.T);
        u = control_series(ms, ControlMethod::Blaschke, p, mo);
    }
    const NullControlReport v = verify_null_control(y0, u, p, c.T, c.n_sim(), c.steps);
    std::ostringstream csv;
    u.write_csv(csv);
    json side = base_sidecar("control", "control.csv", c, o, u.bits_used);
    side["control"] = control_to_json(u);
    side["method_details"] = extra;
    side["verify"] = report_json(v);
    side["certificates"] = {{"moment_residual", u.moment_residual}, {"N_sim", c.n_sim()}, {"steps", c.steps}};
    CommandResult r;
    emit(r, out_dir(c, o), "control", csv.str(), side);
    r.summary = {{"norm_L2", u.norm_l2}, {"verify", report_json(v)}};
    return r;
}

CommandResult cmd_simulate(const RunConfig& c, const CommandOptions& o) {
    const ProblemData p = c.problem();
    const std::string dir = out_dir(c, o);
    ControlSignal u = c.control_file ? load_control(*c.control_file)
                                     : (fs::exists(fs::path(dir) / "control.csv")
                                            ? load_control((fs::path(dir) / "control.csv").string())
                                            : ControlSignal::zero(c.T, c.grid_points));
    if (std::abs(u.T - c.T) > 1e-12 * c.T) throw InputError("simulate: control horizon differs from the configured T");
    const VectorField2 y0 = c.initial_state();
    const Trajectory tr = forward(y0, u, p, c.n_sim(), c.steps);
    const NullControlReport v = verify_null_control(y0, u, p, c.T, c.n_sim(), c.steps);
    std::ostringstream csv;
    tr.write_csv(csv, true);
    json side = base_sidecar("simulate", "trajectory.csv", c, o, u.bits_used);
    side["control_method"] = u.method;
    side["exact_exp_sum"] = u.has_exp_sum;
    side["verify"] = report_json(v);
    side["certificates"] = {{"N_sim", c.n_sim()}, {"steps", c.steps}, {"tail_decay", v.tail_decay}};
    CommandResult r;
    emit(r, dir, "trajectory", csv.str(), side);
    r.summary = {{"verify", report_json(v)}};
    return r;
}

CommandResult cmd_observability(const RunConfig& c, const CommandOptions& o) {
    const ProblemData p = c.problem();
    WitnessSequence seq;
    const std::string& w = c.observability.witness;
    seq.kind = w == "fast" ? Witness::Fast : w == "pair" ? Witness::PairDifference : Witness::RationalChain;
    seq.indices = c.observability.indices;
    if (seq.indices.empty())
        for (int k = 1; k <= c.K; ++k) seq.indices.push_back(k);
    const auto reps = blowup_experiment(p, c.T, seq);
    std::ostringstream csv;
    csv.precision(17);
    csv << "index,theta0,numerator,denominator,ratio,log10_ratio,infinite\n";
    json rows = json::array();
    for (const auto& r : reps) {
        csv << r.index << ',' << r.theta0 << ',' << r.numerator << ',' << r.denominator << ',' << r.ratio << ','
            << r.log10_ratio << ',' << (r.infinite ? 1 : 0) << '\n';
        rows.push_back({{"index", r.index},
                        {"theta0", r.theta0},
                        {"numerator", finite(r.numerator)},
                        {"denominator", finite(r.denominator)},
                        {"ratio", finite(r.ratio)},
                        {"log10_ratio", finite(r.log10_ratio)},
                        {"infinite", r.infinite},
                        {"closed_form", r.closed_form}});
    }
    json side = base_sidecar("observability", "observability.csv", c, o, std::max(c.precision_bits, 256));
    side["witness"] = to_string(seq.kind);
    side["T"] = c.T;
    side["reports"] = rows;
    CommandResult r;
    emit(r, out_dir(c, o), "observability", csv.str(), side);
    r.summary = {{"reports", rows.size()}};
    return r;
}

CommandResult run_command(const std::string& name, const RunConfig& c, const CommandOptions& o) {
    if (o.threads < 1) throw InputError("--threads must be at least 1");
    if (name == "spectrum") return cmd_spectrum(c, o);
    if (name == "minimal-time") return cmd_minimal_time(c, o);
    if (name == "gram-scan") return cmd_gram_scan(c, o);
    if (name == "control") return cmd_control(c, o);
    if (name == "simulate") return cmd_simulate(c, o);
    if (name == "observability") return cmd_observability(c, o);
    throw InputError("unknown command '" + name + "'");
}

int report_error(std::ostream& err, const std::exception& e) {
    if (auto* x = dynamic_cast<const ConfigError*>(&e)) {
        err << "error: " << x->what() << '\n';
        return 2;
    }
    if (auto* x = dynamic_cast<const InputError*>(&e)) {
        err << "error: invalid input: " << x->what() << '\n';
        return 2;
    }
    if (auto* x = dynamic_cast<const PrecisionEscalation*>(&e)) {
        err << "error: " << x->what() << "; rerun with \"precision_bits\": " << x->required_bits << '\n';
        return 3;
    }
    if (auto* x = dynamic_cast<const ControllabilityError*>(&e)) {
        err << "error: not approximately controllable: " << x->what() << '\n';
        return 4;
    }
    if (auto* x = dynamic_cast<const AssemblyError*>(&e)) {
        err << "error: " << x->what() << "\nhint: use \"method\": \"gram\"\n";
        return 5;
    }
    if (auto* x = dynamic_cast<const ConvergenceError*>(&e)) {
        err << "error: " << x->what() << '\n';
        return 6;
    }
    err << "error: " << e.what() << '\n';
    return 1;
}

} // namespace ctrllab::cli
