#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"
#include "pistlab/analysis.hpp"
#include "pistlab/dynamics.hpp"
#include "pistlab/geometry.hpp"
#include "pistlab/io.hpp"

namespace pistlab {

using json = nlohmann::json;

struct ExperimentConfig {
    std::vector<std::vector<double>> I_grid;
    std::vector<double> z;
    std::vector<double> phi0;
    std::vector<double> eps_list;
    std::uint64_t seed = 0;
    int n_samples = 10000;
    std::vector<std::vector<double>> omega;  ///< explicit frequencies for `sieve`
    int check_samples = 100;
};

struct OutputConfig {
    std::string directory = "out";
    std::set<std::string> formats{"csv", "json"};
};

/// Fully validated run configuration.
struct RunConfig {
    json source;  ///< the parsed config document, used for the run id
    ChartSpec chart;
    ModelSpec model;
    IntegratorConfig integrator;
    DiophantineSpec diophantine;
    std::vector<double> gamma_list;
    ExperimentConfig experiment;
    OutputConfig output;
};

namespace detail {

inline std::string join_key(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

/// Object reader that tracks consumed keys so leftovers can be rejected.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw SchemaError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& get(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) throw SchemaError(join_key(path_, key), "missing required key");
        return j_.at(key);
    }

    const json* find(const std::string& key) {
        used_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string key(const std::string& k) const { return join_key(path_, k); }

    void reject_unknown() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.contains(it.key())) throw SchemaError(join_key(path_, it.key()), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

inline double as_number(const json& j, const std::string& key) {
    if (!j.is_number()) throw SchemaError(key, "expected a number");
    return j.get<double>();
}

inline long long as_integer(const json& j, const std::string& key) {
    if (!j.is_number_integer()) throw SchemaError(key, "expected an integer");
    return j.get<long long>();
}

inline std::vector<double> as_vector(const json& j, const std::string& key, std::optional<std::size_t> len = {}) {
    if (!j.is_array()) throw SchemaError(key, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], key + "[" + std::to_string(i) + "]"));
    if (len && out.size() != *len) throw SchemaError(key, "expected " + std::to_string(*len) + " entries");
    return out;
}

inline std::vector<std::vector<double>> as_matrix(const json& j, const std::string& key, std::optional<std::size_t> cols) {
    if (!j.is_array()) throw SchemaError(key, "expected an array of arrays");
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_vector(j[i], key + "[" + std::to_string(i) + "]", cols));
    return out;
}

inline std::vector<Interval> as_intervals(const json& j, const std::string& key, std::size_t n) {
    const auto rows = as_matrix(j, key, 2);
    if (rows.size() != n) throw SchemaError(key, "expected " + std::to_string(n) + " intervals");
    std::vector<Interval> out;
    for (const auto& r : rows) out.push_back({r[0], r[1]});
    return out;
}

// Expression text (or a bare number) parsed against the chart. Parse errors
// keep their code and gain the config location.
inline Expr as_expr(const json& j, const std::string& key, const ChartSpec& chart, const std::string& file) {
    if (j.is_number()) return Expr::constant(j.get<double>());
    if (!j.is_string()) throw SchemaError(key, "expected an expression string");
    try {
        return parse(j.get<std::string>(), chart);
    } catch (const Error& e) {
        throw Error(e.code(), file + ": " + key + ": " + e.what());
    }
}

inline std::vector<std::vector<Expr>> as_expr_matrix(const json& j, const std::string& key, std::size_t rows,
                                                     std::size_t cols, const ChartSpec& chart, const std::string& file) {
    if (!j.is_array() || j.size() != rows) throw SchemaError(key, "expected " + std::to_string(rows) + " rows");
    std::vector<std::vector<Expr>> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::string rk = key + "[" + std::to_string(r) + "]";
        if (!j[r].is_array() || j[r].size() != cols) throw SchemaError(rk, "expected " + std::to_string(cols) + " columns");
        for (std::size_t c = 0; c < cols; ++c) out[r].push_back(as_expr(j[r][c], rk + "[" + std::to_string(c) + "]", chart, file));
    }
    return out;
}

}  // namespace detail

/// Validates a config document. `origin` names the document in error
/// messages (normally the file path).
inline RunConfig parse_config(const json& doc, const std::string& origin = "<config>") {
    using namespace detail;
    Section root(doc, "");

    // chart
    Section cs(root.get("chart"), "chart");
    const long long k = as_integer(cs.get("k"), "chart.k");
    const long long m = as_integer(cs.get("m"), "chart.m");
    if (k < 1) throw SchemaError("chart.k", "must be >= 1");
    if (m < 0) throw SchemaError("chart.m", "must be >= 0");
    if (k > 16 || m > 64) throw SchemaError("chart", "dimension too large");
    const auto V = as_intervals(cs.get("V"), "chart.V", static_cast<std::size_t>(k));
    std::vector<Interval> W;
    if (m > 0 || cs.has("W")) W = as_intervals(cs.get("W"), "chart.W", static_cast<std::size_t>(m));
    cs.reject_unknown();
    ChartSpec chart(static_cast<std::size_t>(k), static_cast<std::size_t>(m), V, W);

    // model
    Section ms(root.get("model"), "model");
    Expr H = as_expr(ms.get("H"), "model.H", chart, origin);
    Expr H1 = Expr::constant(0.0);
    if (const auto* j = ms.find("H1")) H1 = as_expr(*j, "model.H1", chart, origin);
    double eps = 0.0;
    if (const auto* j = ms.find("eps")) eps = as_number(*j, "model.eps");
    std::vector<Expr> integrals;
    if (const auto* j = ms.find("integrals")) {
        if (!j->is_array()) throw SchemaError("model.integrals", "expected an array of expressions");
        for (std::size_t i = 0; i < j->size(); ++i)
            integrals.push_back(as_expr((*j)[i], "model.integrals[" + std::to_string(i) + "]", chart, origin));
    }
    std::optional<SymplecticCoeffs> sc;
    const auto* jab = ms.find("omega_AB");
    const auto* jia = ms.find("omega_iA");
    if (jab || jia) {
        sc = SymplecticCoeffs::zero(chart);
        if (jab) sc->omega_AB = as_expr_matrix(*jab, "model.omega_AB", chart.m(), chart.m(), chart, origin);
        if (jia) sc->omega_iA = as_expr_matrix(*jia, "model.omega_iA", chart.k(), chart.m(), chart, origin);
    }
    ms.reject_unknown();
    ModelSpec model(chart, H, H1, eps, integrals, sc);

    // integrator
    IntegratorConfig ic;
    if (const auto* j = root.find("integrator")) {
        Section is(*j, "integrator");
        if (const auto* v = is.find("method")) {
            const std::string name = v->is_string() ? v->get<std::string>() : "";
            if (name == "rk4") {
                ic.method = Method::rk4;
            } else if (name == "implicit_midpoint") {
                ic.method = Method::implicit_midpoint;
            } else {
                throw SchemaError("integrator.method", "expected \"rk4\" or \"implicit_midpoint\"");
            }
        }
        if (const auto* v = is.find("h")) ic.h = as_number(*v, "integrator.h");
        if (const auto* v = is.find("T")) ic.T = as_number(*v, "integrator.T");
        if (const auto* v = is.find("record_every")) ic.record_every = static_cast<int>(as_integer(*v, "integrator.record_every"));
        if (const auto* v = is.find("fixed_point_tol")) ic.fixed_point_tol = as_number(*v, "integrator.fixed_point_tol");
        if (const auto* v = is.find("fixed_point_max_iter"))
            ic.fixed_point_max_iter = static_cast<int>(as_integer(*v, "integrator.fixed_point_max_iter"));
        is.reject_unknown();
    }
    ic.validate();

    // diophantine
    DiophantineSpec ds = DiophantineSpec::with_default_tau(chart.k(), 0.1);
    std::vector<double> gamma_list;
    if (const auto* j = root.find("diophantine")) {
        Section dsec(*j, "diophantine");
        if (const auto* v = dsec.find("gamma")) ds.gamma = as_number(*v, "diophantine.gamma");
        if (const auto* v = dsec.find("tau")) ds.tau = as_number(*v, "diophantine.tau");
        if (const auto* v = dsec.find("a_max")) ds.a_max = static_cast<int>(as_integer(*v, "diophantine.a_max"));
        if (const auto* v = dsec.find("gamma_list")) gamma_list = as_vector(*v, "diophantine.gamma_list");
        dsec.reject_unknown();
    }
    ds.validate(chart.k());
    if (gamma_list.empty()) gamma_list.push_back(ds.gamma);
    for (double g : gamma_list)
        if (!(g > 0.0)) throw SchemaError("diophantine.gamma_list", "entries must be > 0");

    // experiment
    ExperimentConfig ex;
    {
        std::vector<double> centerI;
        for (const auto& iv : chart.V()) centerI.push_back(iv.center());
        ex.I_grid = {centerI};
        for (const auto& iv : chart.W()) ex.z.push_back(iv.center());
        ex.phi0.assign(chart.k(), 0.0);
        ex.eps_list = {eps};
    }
    if (const auto* j = root.find("experiment")) {
        Section es(*j, "experiment");
        if (const auto* v = es.find("I_grid")) {
            ex.I_grid = as_matrix(*v, "experiment.I_grid", chart.k());
            if (ex.I_grid.empty()) throw SchemaError("experiment.I_grid", "must not be empty");
        }
        if (const auto* v = es.find("z")) ex.z = as_vector(*v, "experiment.z", chart.m());
        if (const auto* v = es.find("phi0")) ex.phi0 = as_vector(*v, "experiment.phi0", chart.k());
        if (const auto* v = es.find("eps_list")) {
            ex.eps_list = as_vector(*v, "experiment.eps_list");
            if (ex.eps_list.empty()) throw SchemaError("experiment.eps_list", "must not be empty");
            for (double e : ex.eps_list)
                if (!(e >= 0.0)) throw SchemaError("experiment.eps_list", "entries must be >= 0");
        }
        if (const auto* v = es.find("seed")) {
            if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
                throw SchemaError("experiment.seed", "expected a non-negative integer");
            ex.seed = v->get<std::uint64_t>();
        }
        if (const auto* v = es.find("n_samples")) {
            ex.n_samples = static_cast<int>(as_integer(*v, "experiment.n_samples"));
            if (ex.n_samples < 100) throw SchemaError("experiment.n_samples", "must be >= 100");
        }
        if (const auto* v = es.find("omega")) ex.omega = as_matrix(*v, "experiment.omega", chart.k());
        if (const auto* v = es.find("check_samples")) {
            ex.check_samples = static_cast<int>(as_integer(*v, "experiment.check_samples"));
            if (ex.check_samples < 1) throw SchemaError("experiment.check_samples", "must be >= 1");
        }
        es.reject_unknown();
    }

    // output
    OutputConfig oc;
    if (const auto* j = root.find("output")) {
        Section os(*j, "output");
        if (const auto* v = os.find("directory")) {
            if (!v->is_string()) throw SchemaError("output.directory", "expected a string");
            oc.directory = v->get<std::string>();
        }
        if (const auto* v = os.find("formats")) {
            if (!v->is_array()) throw SchemaError("output.formats", "expected an array");
            oc.formats.clear();
            for (const auto& f : *v) {
                if (!f.is_string() || (f != "csv" && f != "json"))
                    throw SchemaError("output.formats", "entries must be \"csv\" or \"json\"");
                oc.formats.insert(f.get<std::string>());
            }
        }
        os.reject_unknown();
    }
    root.reject_unknown();

    return RunConfig{doc, chart, model, ic, ds, gamma_list, ex, oc};
}

/// Reads and validates a JSON config file.
inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string(), std::string("invalid JSON: ") + e.what());
    }
    return parse_config(doc, path.string());
}

// ---------------------------------------------------------------------------
// Outputs

/// Hex SHA-256 of a byte string.
inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

/// Run id: prefix of the hash of the canonical config text and the seed.
inline std::string run_id(const RunConfig& cfg) {
    return sha256_hex(cfg.source.dump() + "\nseed=" + std::to_string(cfg.experiment.seed)).substr(0, 16);
}

struct Artifact {
    std::string file_name;
    std::string content;
};

struct ManifestEntry {
    std::string file_name;
    std::string sha256;
    std::size_t bytes = 0;
};

namespace detail {
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.close();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError("cannot write '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move '" + tmp.string() + "' into place");
    }
}
}  // namespace detail

/// Writes artifacts (temp file + rename each) and a manifest listing them
/// with content hashes. Returns the manifest entries, manifest excluded.
inline std::vector<ManifestEntry> write_outputs(const std::vector<Artifact>& artifacts,
                                                const std::filesystem::path& directory,
                                                const std::string& manifest_name) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec || !std::filesystem::is_directory(directory))
        throw IoError("cannot create output directory '" + directory.string() + "'");
    std::vector<ManifestEntry> entries;
    json files = json::array();
    for (const auto& a : artifacts) {
        detail::write_atomic(directory / a.file_name, a.content);
        entries.push_back({a.file_name, sha256_hex(a.content), a.content.size()});
        files.push_back({{"file", a.file_name}, {"sha256", entries.back().sha256}, {"bytes", a.content.size()}});
    }
    detail::write_atomic(directory / manifest_name, json{{"files", files}}.dump(2) + "\n");
    return entries;
}

// ---------------------------------------------------------------------------
// Commands

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"check", "integrate", "freqmap", "sieve", "measure", "persist"};
    return names;
}

namespace detail {

inline json to_json(const SieveResult& r) {
    return {{"passed", r.passed}, {"worst_a", r.worst_a}, {"worst_margin", r.worst_margin}};
}

inline json to_json(const RankResult& r) {
    return {{"rank", r.rank}, {"nondegenerate", r.nondegenerate}, {"singular_values", r.singular_values}};
}

inline std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline json check_summary(const RunConfig& cfg) {
    const auto& chart = cfg.chart;
    const auto& model = cfg.model;
    const auto& ex = cfg.experiment;

    std::vector<Expr> fs = model.integrals();
    fs.push_back(model.H());
    const auto inv = involution_check(fs, chart, ex.check_samples, ex.seed);
    json pairs = json::array();
    for (const auto& p : inv.pairs) pairs.push_back({{"i", p.i}, {"j", p.j}, {"max_abs", p.max_abs}});

    const auto jac = jacobi_check(chart, ex.check_samples, ex.seed);

    bool casimir = true;
    for (std::size_t a = 0; a < chart.m(); ++a)
        casimir = casimir && simplify_fold(poisson_bracket(Expr::variable(ChartSpec::param_name(a)),
                                                           model.perturbed_hamiltonian(), chart))
                                 .is_constant(0.0);

    const auto& I = ex.I_grid.front();
    const auto rank = nondegeneracy_rank(model, I, ex.z);

    json out{{"involution", {{"functions", fs.size()}, {"pairs", pairs}, {"max_abs", inv.max_abs},
                             {"tolerance", inv.tolerance}, {"passed", inv.passed}}},
             {"jacobi", {{"samples", jac.samples}, {"max_abs", jac.max_abs}, {"tolerance", jac.tolerance},
                         {"passed", jac.passed}}},
             {"casimir", {{"passed", casimir}}},
             {"rank", {{"I", I}, {"z", ex.z}, {"result", to_json(rank)}}}};

    if (model.symplectic()) {
        const State s{I, ex.z, ex.phi0};
        const auto x = s.flat();
        const auto xi = hamiltonian_vf_symplectic_at(model.perturbed_hamiltonian(), *model.symplectic(), chart, x);
        const auto vf = hamiltonian_vf_poisson(model.perturbed_hamiltonian(), chart);
        const VarBinding b = binding_from_point(chart, x);
        std::vector<double> poisson;
        for (const auto& c : vf.flat()) poisson.push_back(eval(c, b));
        std::vector<double> zs(xi.data() + chart.k(), xi.data() + chart.k() + chart.m());
        std::vector<double> zp(poisson.begin() + static_cast<std::ptrdiff_t>(chart.k()),
                               poisson.begin() + static_cast<std::ptrdiff_t>(chart.k() + chart.m()));
        double zmax = 0.0;
        for (double v : zs) zmax = std::max(zmax, std::abs(v));
        out["symplectic_demo"] = {{"point", x},
                                  {"symplectic_field", vec(xi)},
                                  {"poisson_field", poisson},
                                  {"symplectic_dz", zs},
                                  {"poisson_dz", zp},
                                  {"symplectic_dz_max_abs", zmax}};
    }
    return out;
}

}  // namespace detail

struct DispatchResult {
    int exit_code = 0;
    std::vector<ManifestEntry> files;
    std::string manifest;
};

/// Runs one command and writes its outputs to `out_dir`
/// (<command>_<run id>.csv/.json plus <command>_<run id>.manifest.json).
/// Returns exit code 0; library errors propagate to the caller.
inline DispatchResult dispatch(const std::string& command, const RunConfig& cfg, const std::filesystem::path& out_dir) {
    const auto& chart = cfg.chart;
    const auto& model = cfg.model;
    const auto& ex = cfg.experiment;
    const std::string id = run_id(cfg);
    const std::string stem = command + "_" + id;

    json summary{{"command", command}, {"run_id", id}, {"seed", ex.seed}};
    std::optional<std::string> csv;

    if (command == "check") {
        summary["check"] = detail::check_summary(cfg);
    } else if (command == "integrate") {
        const State s0{ex.I_grid.front(), ex.z, ex.phi0};
        const Trajectory traj = integrate_perturbed(model, s0, cfg.integrator);
        const auto drift = energy_drift(traj, model);
        csv = trajectory_csv(traj, chart);
        const State& last = traj.states.back();
        summary["integrate"] = {{"method", to_string(cfg.integrator.method)},
                                {"h", cfg.integrator.h},
                                {"T", cfg.integrator.T},
                                {"eps", model.eps()},
                                {"records", traj.times.size()},
                                {"max_abs_energy_drift", drift.max_abs_drift},
                                {"max_action_excursion", traj.max_action_excursion},
                                {"left_domain", traj.left_domain},
                                {"final", {{"t", traj.times.back()}, {"I", last.I}, {"z", last.z}, {"phi", last.phi}}}};
    } else if (command == "freqmap") {
        const FrequencyMap freq(model);
        std::string table;
        for (std::size_t i = 0; i < chart.k(); ++i) table += ChartSpec::action_name(i) + ",";
        for (std::size_t a = 0; a < chart.m(); ++a) table += ChartSpec::param_name(a) + ",";
        for (std::size_t i = 0; i < chart.k(); ++i) table += "omega" + std::to_string(i + 1) + ",";
        table += "rank,nondegenerate\n";
        int degenerate = 0;
        for (const auto& I : ex.I_grid) {
            const auto w = freq(I, ex.z);
            const auto r = nondegeneracy_rank(model, I, ex.z);
            if (!r.nondegenerate) ++degenerate;
            for (double v : I) table += format_double(v) + ",";
            for (double v : ex.z) table += format_double(v) + ",";
            for (double v : w.omega) table += format_double(v) + ",";
            table += std::to_string(r.rank) + (r.nondegenerate ? ",true\n" : ",false\n");
        }
        csv = std::move(table);
        summary["freqmap"] = {{"points", ex.I_grid.size()}, {"degenerate_points", degenerate}};
    } else if (command == "sieve") {
        const DiophantineSieve sieve(chart.k(), cfg.diophantine);
        json entries = json::array();
        auto add = [&](const std::vector<double>& omega, const json& source) {
            json e = detail::to_json(sieve.test(omega));
            e["omega"] = omega;
            if (!source.is_null()) e["I"] = source;
            entries.push_back(e);
        };
        if (!ex.omega.empty()) {
            for (const auto& w : ex.omega) add(w, nullptr);
        } else {
            const FrequencyMap freq(model);
            for (const auto& I : ex.I_grid) add(freq(I, ex.z).omega, I);
        }
        summary["sieve"] = {{"gamma", cfg.diophantine.gamma},
                            {"tau", cfg.diophantine.tau},
                            {"a_max", cfg.diophantine.a_max},
                            {"entries", entries}};
    } else if (command == "measure") {
        json entries = json::array();
        for (double g : cfg.gamma_list) {
            DiophantineSpec spec = cfg.diophantine;
            spec.gamma = g;
            const auto est = resonance_measure_mc(model, spec, ex.n_samples, ex.seed);
            entries.push_back({{"gamma", g}, {"resonant_fraction", est.resonant_fraction}, {"stderr", est.standard_error}});
        }
        summary["measure"] = {{"tau", cfg.diophantine.tau},
                              {"a_max", cfg.diophantine.a_max},
                              {"n_samples", ex.n_samples},
                              {"entries", entries}};
    } else if (command == "persist") {
        const auto run = persistence_experiment(model, ex.I_grid, ex.z, ex.phi0, ex.eps_list, cfg.integrator,
                                                cfg.diophantine);
        csv = persistence_csv(run.reports, chart.k());
        json counts{{"persistent", 0}, {"resonant", 0}, {"escaped", 0}};
        json errors = json::array();
        for (std::size_t j = 0; j < run.reports.size(); ++j) {
            const auto& r = run.reports[j];
            counts[to_string(r.classification)] = counts[to_string(r.classification)].get<int>() + 1;
            if (r.error) errors.push_back({{"entry", j}, {"error", *r.error}});
        }
        summary["persist"] = {{"entries", run.reports.size()},
                              {"counts", counts},
                              {"center_I", run.center_I},
                              {"center_rank", detail::to_json(run.center_rank)},
                              {"warning", run.warning ? json(*run.warning) : json(nullptr)},
                              {"errors", errors}};
    } else {
        throw SchemaError("command", "unknown command '" + command + "'");
    }

    std::vector<Artifact> artifacts;
    if (csv && cfg.output.formats.contains("csv")) artifacts.push_back({stem + ".csv", *csv});
    if (cfg.output.formats.contains("json")) artifacts.push_back({stem + ".json", summary.dump(2) + "\n"});
    DispatchResult result;
    result.manifest = stem + ".manifest.json";
    result.files = write_outputs(artifacts, out_dir, result.manifest);
    return result;
}

/// Structural check of an emitted summary document; returns the first
/// violation, or an empty string when the document conforms.
inline std::string validate_summary(const json& s) {
    if (!s.is_object()) return "summary is not an object";
    for (const char* key : {"command", "run_id", "seed"})
        if (!s.contains(key)) return std::string("missing ") + key;
    if (!s["command"].is_string() || !s["run_id"].is_string() || !s["seed"].is_number_unsigned())
        return "bad header types";
    const std::string cmd = s["command"];
    if (!s.contains(cmd) || !s[cmd].is_object()) return "missing section " + cmd;
    const json& b = s[cmd];
    auto need = [&](std::initializer_list<const char*> keys) -> std::string {
        for (const char* k : keys)
            if (!b.contains(k)) return cmd + "." + k + " missing";
        return {};
    };
    if (cmd == "check") return need({"involution", "jacobi", "casimir", "rank"});
    if (cmd == "integrate")
        return need({"method", "h", "T", "eps", "records", "max_abs_energy_drift", "max_action_excursion",
                     "left_domain", "final"});
    if (cmd == "freqmap") return need({"points", "degenerate_points"});
    if (cmd == "sieve") {
        if (auto e = need({"gamma", "tau", "a_max", "entries"}); !e.empty()) return e;
        for (const auto& e : b["entries"])
            if (!e.contains("passed") || !e.contains("worst_a") || !e.contains("worst_margin") || !e.contains("omega"))
                return "sieve entry incomplete";
        return {};
    }
    if (cmd == "measure") {
        if (auto e = need({"tau", "a_max", "n_samples", "entries"}); !e.empty()) return e;
        for (const auto& e : b["entries"])
            if (!e.contains("gamma") || !e.contains("resonant_fraction") || !e.contains("stderr"))
                return "measure entry incomplete";
        return {};
    }
    if (cmd == "persist") return need({"entries", "counts", "center_I", "center_rank", "warning", "errors"});
    return "unknown command " + cmd;
}

/// Exit status for an error: 1 for invalid input, 2 for runtime failures.
inline int exit_code_for(const Error& e) {
    const auto& c = e.code();
    return (c == "SchemaError" || c == "SyntaxError" || c == "UnknownVariable") ? 1 : 2;
}

}  // namespace pistlab
