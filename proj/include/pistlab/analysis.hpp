#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pistlab/dynamics.hpp"
#include "pistlab/expr.hpp"
#include "pistlab/parallel.hpp"

namespace pistlab {

struct FrequencyVector {
    std::vector<double> omega;
};

/// Parameters of the non-resonance condition
///   |omega . a| >= gamma * (sum_j |a_j|)^(-tau)   for all a in Z^k \ 0,
/// checked for sum_j |a_j| <= a_max.
struct DiophantineSpec {
    double gamma = 0.1;
    double tau = 0.0;
    int a_max = 30;

    /// Spec with the default exponent tau = k + 1.
    static DiophantineSpec with_default_tau(std::size_t k, double gamma, int a_max = 30) {
        return {gamma, static_cast<double>(k) + 1.0, a_max};
    }

    void validate(std::size_t k) const {
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw SchemaError("diophantine.gamma", "must be > 0");
        if (!(tau >= static_cast<double>(k) - 1.0) || !std::isfinite(tau))
            throw SchemaError("diophantine.tau", "must be >= k - 1");
        if (a_max < 1) throw SchemaError("diophantine.a_max", "must be >= 1");
    }
};

struct SieveResult {
    bool passed = true;
    std::vector<int> worst_a;
    double worst_margin = std::numeric_limits<double>::infinity();
};

/// Nonzero integer vectors with 1 <= sum |a_j| <= a_max, one per +-a pair
/// (the first nonzero component is positive). Ordered by L1 norm, then
/// lexicographically.
inline std::vector<std::vector<int>> lattice_representatives(std::size_t k, int a_max) {
    std::vector<std::vector<int>> out;
    std::vector<int> a(k, 0);
    // fill components from position j with remaining L1 budget exactly `rest`
    auto rec = [&](auto&& self, std::size_t j, int rest, bool leading) -> void {
        if (j + 1 == k) {
            for (int v : {-rest, rest}) {
                if (leading && v < 0) continue;
                a[j] = v;
                out.push_back(a);
                if (rest == 0) break;
            }
            return;
        }
        for (int v = -rest; v <= rest; ++v) {
            if (leading && v < 0) continue;
            a[j] = v;
            self(self, j + 1, rest - std::abs(v), leading && v == 0);
        }
    };
    for (int n = 1; n <= a_max; ++n) rec(rec, 0, n, true);
    return out;
}

/// Exhaustive sieve over a precomputed lattice, reusable across many
/// frequency vectors of the same dimension.
class DiophantineSieve {
public:
    DiophantineSieve(std::size_t k, const DiophantineSpec& spec) : k_(k), spec_(spec) {
        spec_.validate(k);
        lattice_ = lattice_representatives(k, spec.a_max);
        bounds_.reserve(lattice_.size());
        for (const auto& a : lattice_) {
            int l1 = 0;
            for (int v : a) l1 += std::abs(v);
            bounds_.push_back(spec.gamma * std::pow(static_cast<double>(l1), -spec.tau));
        }
    }

    const DiophantineSpec& spec() const noexcept { return spec_; }
    std::size_t lattice_size() const noexcept { return lattice_.size(); }

    SieveResult test(std::span<const double> omega) const {
        if (omega.size() != k_) throw SchemaError("omega", "expected " + std::to_string(k_) + " components");
        SieveResult r;
        std::size_t worst = 0;
        for (std::size_t p = 0; p < lattice_.size(); ++p) {
            double dot = 0.0;
            for (std::size_t i = 0; i < k_; ++i) dot += omega[i] * lattice_[p][i];
            const double margin = std::abs(dot) - bounds_[p];
            if (margin < r.worst_margin) {
                r.worst_margin = margin;
                worst = p;
            }
        }
        r.worst_a = lattice_[worst];
        r.passed = r.worst_margin >= 0.0;
        return r;
    }

private:
    std::size_t k_;
    DiophantineSpec spec_;
    std::vector<std::vector<int>> lattice_;
    std::vector<double> bounds_;
};

inline SieveResult diophantine_test(const FrequencyVector& omega, const DiophantineSpec& spec) {
    return DiophantineSieve(omega.omega.size(), spec).test(omega.omega);
}

// ---------------------------------------------------------------------------
// Frequency map

namespace detail {
inline std::vector<double> point_of(const ChartSpec& chart, const std::vector<double>& I, const std::vector<double>& z) {
    if (I.size() != chart.k()) throw SchemaError("I", "expected " + std::to_string(chart.k()) + " actions");
    if (z.size() != chart.m()) throw SchemaError("z", "expected " + std::to_string(chart.m()) + " parameters");
    std::vector<double> x(I);
    x.insert(x.end(), z.begin(), z.end());
    x.resize(chart.dim(), 0.0);
    return x;
}
}  // namespace detail

/// Compiled omega(I, z) = dH/dI for repeated evaluation.
class FrequencyMap {
public:
    explicit FrequencyMap(const ModelSpec& model) : chart_(model.chart()) {
        for (std::size_t i = 0; i < chart_.k(); ++i)
            components_.emplace_back(diff(model.H(), ChartSpec::action_name(i)), chart_);
    }

    FrequencyVector operator()(const std::vector<double>& I, const std::vector<double>& z) const {
        return at(detail::point_of(chart_, I, z));
    }

    /// At a flat chart point (angles ignored).
    FrequencyVector at(std::span<const double> x) const {
        FrequencyVector w;
        w.omega.reserve(components_.size());
        for (const auto& c : components_) w.omega.push_back(c(x));
        return w;
    }

private:
    ChartSpec chart_;
    std::vector<CompiledExpr> components_;
};

inline FrequencyVector frequency_map_at(const ModelSpec& model, const std::vector<double>& I,
                                        const std::vector<double>& z) {
    return FrequencyMap(model)(I, z);
}

struct RankResult {
    int rank = 0;
    bool nondegenerate = false;
    std::vector<double> singular_values;
};

/// Rank of the k x (k+m) Jacobian of the frequency map with respect to
/// (I, z); singular values below tol * (largest) count as zero.
inline RankResult nondegeneracy_rank(const ModelSpec& model, const std::vector<double>& I,
                                     const std::vector<double>& z, double tol = 1e-9) {
    const auto& chart = model.chart();
    const auto k = chart.k();
    const auto cols = k + chart.m();
    const VarBinding b = binding_from_point(chart, detail::point_of(chart, I, z));
    Eigen::MatrixXd J(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < k; ++i) {
        const Expr wi = diff(model.H(), ChartSpec::action_name(i));
        for (std::size_t v = 0; v < cols; ++v)
            J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v)) = eval(diff(wi, chart.symbol_name(v)), b);
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    const Eigen::VectorXd s = svd.singularValues();
    RankResult r;
    r.singular_values.assign(s.data(), s.data() + s.size());
    const double smax = s.size() > 0 ? s.maxCoeff() : 0.0;
    if (smax > 0.0)
        for (double v : r.singular_values)
            if (v > tol * smax) ++r.rank;
    r.nondegenerate = r.rank == static_cast<int>(k);
    return r;
}

// ---------------------------------------------------------------------------
// Measure of the resonant set

struct MeasureEstimate {
    double resonant_fraction = 0.0;
    double standard_error = 0.0;
    int n_samples = 0;
};

/// Monte Carlo estimate of the fraction of V x W whose frequency fails the
/// sieve, with its binomial standard error. Samples depend only on
/// (seed, n_samples), so calls with equal seeds share their sample set.
inline MeasureEstimate resonance_measure_mc(const ModelSpec& model, const DiophantineSpec& spec, int n_samples,
                                            std::uint64_t seed) {
    if (n_samples < 100) throw SchemaError("experiment.n_samples", "must be >= 100");
    const auto& chart = model.chart();
    const DiophantineSieve sieve(chart.k(), spec);
    const FrequencyMap freq(model);
    Rng rng(seed, 0x3ea5);
    int failed = 0;
    for (int s = 0; s < n_samples; ++s) {
        const auto x = chart.sample_point(rng);
        if (!sieve.test(freq.at(x).omega).passed) ++failed;
    }
    MeasureEstimate out;
    out.n_samples = n_samples;
    out.resonant_fraction = static_cast<double>(failed) / n_samples;
    out.standard_error = std::sqrt(out.resonant_fraction * (1.0 - out.resonant_fraction) / n_samples);
    return out;
}

// ---------------------------------------------------------------------------
// Rotation vectors

inline constexpr std::size_t min_rotation_samples = 1000;

/// Rotation vector of a trajectory from its cumulative angles.
///
/// Starts from the least-squares slope of phiu_i against t, then adds the
/// bump-weighted mean of the residual's finite-difference derivative. The
/// weight exp(-1/(s(1-s))) vanishes to all orders at both ends, which makes
/// the correction converge much faster than the plain slope on
/// quasi-periodic motion.
inline FrequencyVector extract_rotation_vector(const Trajectory& traj) {
    const std::size_t n = traj.times.size();
    if (n < min_rotation_samples) throw TooShort(n, min_rotation_samples);
    const std::size_t k = traj.unwrapped_phi.front().size();

    double tmean = 0.0;
    for (double t : traj.times) tmean += t;
    tmean /= static_cast<double>(n);
    double stt = 0.0;
    for (double t : traj.times) stt += (t - tmean) * (t - tmean);

    std::vector<double> weights(n - 1);
    double wsum = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double s = (static_cast<double>(j) + 0.5) / static_cast<double>(n - 1);
        weights[j] = std::exp(-1.0 / (s * (1.0 - s)));
        wsum += weights[j];
    }

    FrequencyVector out;
    for (std::size_t i = 0; i < k; ++i) {
        double pmean = 0.0;
        for (const auto& p : traj.unwrapped_phi) pmean += p[i];
        pmean /= static_cast<double>(n);
        double stp = 0.0;
        for (std::size_t j = 0; j < n; ++j) stp += (traj.times[j] - tmean) * (traj.unwrapped_phi[j][i] - pmean);
        const double slope = stp / stt;

        double correction = 0.0;
        for (std::size_t j = 0; j + 1 < n; ++j) {
            const double dt = traj.times[j + 1] - traj.times[j];
            const double rate = (traj.unwrapped_phi[j + 1][i] - traj.unwrapped_phi[j][i]) / dt;
            correction += weights[j] * (rate - slope);
        }
        out.omega.push_back(slope + correction / wsum);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence experiment

enum class TorusClass { persistent, resonant, escaped };

inline std::string to_string(TorusClass c) {
    switch (c) {
        case TorusClass::persistent: return "persistent";
        case TorusClass::resonant: return "resonant";
        case TorusClass::escaped: return "escaped";
    }
    return "unknown";
}

/// Sieve cutoff defining a low-order resonance in the classification.
inline constexpr int low_order_cutoff = 10;

/// Action-drift threshold separating persistent from destroyed tori.
inline double drift_threshold(double eps) { return 5.0 * std::sqrt(eps); }

struct PersistenceReport {
    std::vector<double> I0;
    double eps = 0.0;
    double action_drift = 0.0;
    FrequencyVector omega0;         ///< unperturbed omega(I0, z)
    FrequencyVector extracted_omega;  ///< NaN components when extraction failed
    SieveResult sieve;              ///< full-cutoff sieve of omega0
    bool low_order_resonant = false;
    TorusClass classification = TorusClass::persistent;
    std::optional<std::string> error;
};

struct PersistenceRun {
    std::vector<PersistenceReport> reports;  ///< I-major, eps-minor
    RankResult center_rank;
    std::vector<double> center_I;
    std::optional<std::string> warning;
};

/// Classification rule for one run. Unperturbed runs (eps = 0) are exact
/// tori and always persistent.
inline TorusClass classify(bool left_domain, bool low_order_resonant, double action_drift, double eps) {
    if (left_domain) return TorusClass::escaped;
    if (eps == 0.0) return TorusClass::persistent;
    if (low_order_resonant) return TorusClass::resonant;
    return action_drift <= drift_threshold(eps) ? TorusClass::persistent : TorusClass::resonant;
}

/// Integrates every (I0, eps) pair from (I0, z, phi0) and classifies the
/// torus. Integrator failures are recorded in the entry (and count as
/// leaving the domain) instead of aborting the sweep.
inline PersistenceRun persistence_experiment(const ModelSpec& model, const std::vector<std::vector<double>>& I_grid,
                                             const std::vector<double>& z, const std::vector<double>& phi0,
                                             const std::vector<double>& eps_list, const IntegratorConfig& cfg,
                                             const DiophantineSpec& spec, unsigned max_threads = 0) {
    const auto& chart = model.chart();
    cfg.validate();
    spec.validate(chart.k());
    if (I_grid.empty()) throw SchemaError("experiment.I_grid", "must not be empty");
    if (eps_list.empty()) throw SchemaError("experiment.eps_list", "must not be empty");
    if (phi0.size() != chart.k()) throw SchemaError("experiment.phi0", "expected k angles");

    PersistenceRun run;
    run.center_I.assign(chart.k(), 0.0);
    for (const auto& I : I_grid) {
        if (I.size() != chart.k()) throw SchemaError("experiment.I_grid", "expected k actions per point");
        for (std::size_t i = 0; i < chart.k(); ++i) run.center_I[i] += I[i] / static_cast<double>(I_grid.size());
    }
    run.center_rank = nondegeneracy_rank(model, run.center_I, z);
    if (!run.center_rank.nondegenerate)
        run.warning = "frequency map is degenerate at the experiment center (rank " +
                      std::to_string(run.center_rank.rank) + " < " + std::to_string(chart.k()) + ")";

    const DiophantineSieve full(chart.k(), spec);
    DiophantineSpec low_spec = spec;
    low_spec.a_max = std::min(spec.a_max, low_order_cutoff);
    const DiophantineSieve low(chart.k(), low_spec);
    const FrequencyMap freq(model);

    std::vector<ModelSpec> models;
    models.reserve(eps_list.size());
    for (double eps : eps_list) models.push_back(model.with_eps(eps));

    const std::size_t n_jobs = I_grid.size() * eps_list.size();
    run.reports.resize(n_jobs);
    parallel_for_index(
        n_jobs,
        [&](std::size_t job) {
            const std::size_t gi = job / eps_list.size();
            const std::size_t ei = job % eps_list.size();
            PersistenceReport& r = run.reports[job];
            r.I0 = I_grid[gi];
            r.eps = eps_list[ei];
            r.omega0 = freq(r.I0, z);
            r.sieve = full.test(r.omega0.omega);
            r.low_order_resonant = !low.test(r.omega0.omega).passed;
            r.extracted_omega.omega.assign(chart.k(), std::numeric_limits<double>::quiet_NaN());
            bool left = false;
            try {
                const Trajectory traj = integrate_perturbed(models[ei], State{r.I0, z, phi0}, cfg);
                left = traj.left_domain;
                r.action_drift = traj.max_action_excursion;
                try {
                    r.extracted_omega = extract_rotation_vector(traj);
                } catch (const TooShort& e) {
                    r.error = e.code() + ": " + e.what();
                }
            } catch (const Error& e) {
                r.error = e.code() + ": " + e.what();
                r.action_drift = std::numeric_limits<double>::infinity();
                left = true;
            }
            r.classification = classify(left, r.low_order_resonant, r.action_drift, r.eps);
        },
        max_threads);
    return run;
}

}  // namespace pistlab
