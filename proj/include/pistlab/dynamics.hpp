#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pistlab/chart.hpp"
#include "pistlab/errors.hpp"
#include "pistlab/expr.hpp"
#include "pistlab/geometry.hpp"

namespace pistlab {

/// Maps x to [0, 2pi).
inline double wrap_angle(double x) {
    double r = std::fmod(x, two_pi);
    if (r < 0.0) r += two_pi;
    if (r >= two_pi) r = 0.0;
    return r;
}

/// A point (I, z, phi) of the chart.
struct State {
    std::vector<double> I;
    std::vector<double> z;
    std::vector<double> phi;

    /// Flat vector in chart order (I, z, phi).
    std::vector<double> flat() const {
        std::vector<double> x(I);
        x.insert(x.end(), z.begin(), z.end());
        x.insert(x.end(), phi.begin(), phi.end());
        return x;
    }

    bool operator==(const State&) const = default;
};

/// Perturbed model H' = H + eps * H1 on a chart, with k integrals of motion
/// and optional coefficients of the full symplectic form.
///
/// The constructor enforces that H and every integral are independent of
/// the angles (fold, then 100-point sampling) and throws SchemaError with
/// the offending key otherwise.
class ModelSpec {
public:
    ModelSpec(ChartSpec chart, Expr H, Expr H1, double eps, std::vector<Expr> integrals = {},
              std::optional<SymplecticCoeffs> sc = std::nullopt)
        : chart_(std::move(chart)),
          H_(std::move(H)),
          H1_(std::move(H1)),
          eps_(eps),
          integrals_(std::move(integrals)),
          sc_(std::move(sc)) {
        if (!(eps_ >= 0.0) || !std::isfinite(eps_)) throw SchemaError("model.eps", "must be finite and >= 0");
        check_symbols(H_, "model.H");
        check_symbols(H1_, "model.H1");
        if (!is_angle_independent(H_, chart_)) throw SchemaError("model.H", "angle-dependent");
        if (integrals_.empty()) {
            for (std::size_t i = 0; i < chart_.k(); ++i) integrals_.push_back(Expr::variable(ChartSpec::action_name(i)));
        }
        if (integrals_.size() != chart_.k())
            throw SchemaError("model.integrals", "expected " + std::to_string(chart_.k()) + " integrals");
        for (std::size_t i = 0; i < integrals_.size(); ++i) {
            const std::string key = "model.integrals[" + std::to_string(i) + "]";
            check_symbols(integrals_[i], key);
            if (!is_angle_independent(integrals_[i], chart_)) throw SchemaError(key, "angle-dependent");
        }
        if (sc_) validate_symplectic_coeffs(*sc_, chart_);
        Hp_ = simplify_fold(H_ + Expr::constant(eps_) * H1_);
    }

    const ChartSpec& chart() const noexcept { return chart_; }
    const Expr& H() const noexcept { return H_; }
    const Expr& H1() const noexcept { return H1_; }
    double eps() const noexcept { return eps_; }
    const std::vector<Expr>& integrals() const noexcept { return integrals_; }
    const std::optional<SymplecticCoeffs>& symplectic() const noexcept { return sc_; }
    /// H + eps * H1, folded.
    const Expr& perturbed_hamiltonian() const noexcept { return Hp_; }

    /// Same model with a different perturbation scale.
    ModelSpec with_eps(double eps) const {
        return ModelSpec(chart_, H_, H1_, eps, integrals_, sc_);
    }

private:
    void check_symbols(const Expr& e, const std::string& key) const {
        for (const auto& name : free_vars(e))
            if (!chart_.symbol_index(name)) throw SchemaError(key, "unknown variable '" + name + "'");
    }

    ChartSpec chart_;
    Expr H_;
    Expr H1_;
    double eps_;
    std::vector<Expr> integrals_;
    std::optional<SymplecticCoeffs> sc_;
    Expr Hp_;
};

enum class Method { rk4, implicit_midpoint };

inline std::string to_string(Method m) { return m == Method::rk4 ? "rk4" : "implicit_midpoint"; }

struct IntegratorConfig {
    Method method = Method::rk4;
    double h = 1e-3;
    double T = 100.0;
    int record_every = 1;
    double fixed_point_tol = 1e-12;
    int fixed_point_max_iter = 50;

    void validate() const {
        if (!(h > 0.0) || !std::isfinite(h)) throw SchemaError("integrator.h", "must be > 0");
        if (!(T > 0.0) || !std::isfinite(T)) throw SchemaError("integrator.T", "must be > 0");
        if (h > T) throw SchemaError("integrator.h", "step exceeds horizon T");
        if (record_every < 1) throw SchemaError("integrator.record_every", "must be >= 1");
        if (!(fixed_point_tol > 0.0)) throw SchemaError("integrator.fixed_point_tol", "must be > 0");
        if (fixed_point_max_iter < 1) throw SchemaError("integrator.fixed_point_max_iter", "must be >= 1");
    }

    /// Number of steps of size h covering [0, T]; T is rounded to a whole
    /// number of steps.
    long long steps() const { return std::max<long long>(1, std::llround(T / h)); }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<State> states;                     ///< angles wrapped to [0, 2pi)
    std::vector<std::vector<double>> unwrapped_phi;  ///< cumulative angles
    bool left_domain = false;                      ///< I left the V box at some step
    std::optional<long long> left_domain_step;
    /// sup over every integration step (not only recorded ones) of |I(t) - I(0)|_inf.
    double max_action_excursion = 0.0;
};

/// Exact solution of the unperturbed equation: actions and parameters
/// frozen, angles rotating with omega = dH/dI.
inline State exact_unperturbed_flow(const ModelSpec& model, const State& s0, double t) {
    const auto& chart = model.chart();
    const VarBinding b = binding_from_point(chart, s0.flat());
    State s = s0;
    for (std::size_t i = 0; i < chart.k(); ++i) {
        const double omega = eval(diff(model.H(), ChartSpec::action_name(i)), b);
        s.phi[i] = wrap_angle(s0.phi[i] + t * omega);
    }
    return s;
}

/// One-step map of the perturbed equation for fixed z.
///
/// The integrated variable is y = (I_1..I_k, phi_1..phi_k) with cumulative
/// angles; z never enters y, so it cannot change.
class Stepper {
public:
    Stepper(const ModelSpec& model, std::vector<double> z, Method method, double fixed_point_tol = 1e-12,
            int fixed_point_max_iter = 50)
        : k_(model.chart().k()),
          m_(model.chart().m()),
          method_(method),
          tol_(fixed_point_tol),
          max_iter_(fixed_point_max_iter),
          x_(model.chart().dim()) {
        const VectorFieldSpec vf = hamiltonian_vf_poisson(model.perturbed_hamiltonian(), model.chart());
        for (std::size_t i = 0; i < k_; ++i) rhs_.emplace_back(vf.dI[i], model.chart());
        for (std::size_t i = 0; i < k_; ++i) rhs_.emplace_back(vf.dphi[i], model.chart());
        std::copy(z.begin(), z.end(), x_.begin() + static_cast<std::ptrdiff_t>(k_));
        for (auto* buf : {&k1_, &k2_, &k3_, &k4_, &tmp_, &next_}) buf->resize(2 * k_);
    }

    std::size_t size() const noexcept { return 2 * k_; }

    /// Right-hand side at y.
    void rhs(std::span<const double> y, std::span<double> out) {
        std::copy(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(k_), x_.begin());
        std::copy(y.begin() + static_cast<std::ptrdiff_t>(k_), y.end(),
                  x_.begin() + static_cast<std::ptrdiff_t>(k_ + m_));
        for (std::size_t j = 0; j < rhs_.size(); ++j) out[j] = rhs_[j](x_);
    }

    /// Advances y in place by signed step h. `step` labels errors.
    void step(std::vector<double>& y, double h, long long step) {
        if (method_ == Method::rk4) {
            rk4(y, h);
        } else {
            midpoint(y, h, step);
        }
        for (double v : y)
            if (!std::isfinite(v)) throw NonFiniteState(step);
    }

private:
    void rk4(std::vector<double>& y, double h) {
        const std::size_t n = y.size();
        rhs(y, k1_);
        for (std::size_t j = 0; j < n; ++j) tmp_[j] = y[j] + 0.5 * h * k1_[j];
        rhs(tmp_, k2_);
        for (std::size_t j = 0; j < n; ++j) tmp_[j] = y[j] + 0.5 * h * k2_[j];
        rhs(tmp_, k3_);
        for (std::size_t j = 0; j < n; ++j) tmp_[j] = y[j] + h * k3_[j];
        rhs(tmp_, k4_);
        for (std::size_t j = 0; j < n; ++j) y[j] += h / 6.0 * (k1_[j] + 2.0 * k2_[j] + 2.0 * k3_[j] + k4_[j]);
    }

    // y1 = y0 + h f((y0 + y1)/2) by fixed-point iteration from an Euler guess.
    void midpoint(std::vector<double>& y, double h, long long step) {
        const std::size_t n = y.size();
        rhs(y, k1_);
        for (std::size_t j = 0; j < n; ++j) next_[j] = y[j] + h * k1_[j];
        for (int it = 0; it < max_iter_; ++it) {
            for (std::size_t j = 0; j < n; ++j) tmp_[j] = 0.5 * (y[j] + next_[j]);
            rhs(tmp_, k1_);
            double delta = 0.0;
            double scale = 1.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double v = y[j] + h * k1_[j];
                if (!std::isfinite(v)) throw FixedPointDivergence(step);
                delta = std::max(delta, std::abs(v - next_[j]));
                scale = std::max(scale, std::abs(v));
                next_[j] = v;
            }
            if (delta <= tol_ * scale) {
                y.swap(next_);
                return;
            }
        }
        throw FixedPointDivergence(step);
    }

    std::size_t k_;
    std::size_t m_;
    Method method_;
    double tol_;
    int max_iter_;
    std::vector<CompiledExpr> rhs_;
    std::vector<double> x_;
    std::vector<double> k1_, k2_, k3_, k4_, tmp_, next_;
};

/// Integrates the perturbed equation dI = -dH'/dphi, dz = 0,
/// dphi = dH'/dI from s0 over [0, cfg.T], recording every
/// cfg.record_every steps (and t = 0). z is copied into every recorded
/// state, never integrated. Leaving the V box sets `left_domain` but does
/// not stop the run.
inline Trajectory integrate_perturbed(const ModelSpec& model, const State& s0, const IntegratorConfig& cfg) {
    cfg.validate();
    const auto& chart = model.chart();
    const std::size_t k = chart.k();
    if (s0.I.size() != k || s0.phi.size() != k || s0.z.size() != chart.m())
        throw SchemaError("state", "dimensions do not match chart");

    Stepper stepper(model, s0.z, cfg.method, cfg.fixed_point_tol, cfg.fixed_point_max_iter);
    std::vector<double> y(s0.I);
    y.insert(y.end(), s0.phi.begin(), s0.phi.end());

    Trajectory traj;
    const long long n_steps = cfg.steps();
    const auto n_records = static_cast<std::size_t>(n_steps / cfg.record_every + 1);
    traj.times.reserve(n_records);
    traj.states.reserve(n_records);
    traj.unwrapped_phi.reserve(n_records);

    auto record = [&](long long n) {
        State s;
        s.I.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(k));
        s.z = s0.z;
        std::vector<double> phiu(y.begin() + static_cast<std::ptrdiff_t>(k), y.end());
        s.phi.resize(k);
        std::transform(phiu.begin(), phiu.end(), s.phi.begin(), wrap_angle);
        traj.times.push_back(static_cast<double>(n) * cfg.h);
        traj.states.push_back(std::move(s));
        traj.unwrapped_phi.push_back(std::move(phiu));
    };

    record(0);
    if (!chart.in_action_box(s0.I)) {
        traj.left_domain = true;
        traj.left_domain_step = 0;
    }
    for (long long n = 1; n <= n_steps; ++n) {
        stepper.step(y, cfg.h, n);
        for (std::size_t i = 0; i < k; ++i) {
            traj.max_action_excursion = std::max(traj.max_action_excursion, std::abs(y[i] - s0.I[i]));
            if (!traj.left_domain && !chart.V()[i].contains(y[i])) {
                traj.left_domain = true;
                traj.left_domain_step = n;
            }
        }
        if (n % cfg.record_every == 0) record(n);
    }
    return traj;
}

struct EnergyDrift {
    double max_abs_drift = 0.0;
    std::vector<double> series;
};

/// H'(state_j) - H'(state_0) along the recorded states (cumulative angles).
inline EnergyDrift energy_drift(const Trajectory& traj, const ModelSpec& model) {
    EnergyDrift out;
    if (traj.states.empty()) return out;
    const CompiledExpr Hp(model.perturbed_hamiltonian(), model.chart());
    auto value = [&](std::size_t j) {
        State s = traj.states[j];
        s.phi = traj.unwrapped_phi[j];
        return Hp(s.flat());
    };
    const double h0 = value(0);
    out.series.reserve(traj.states.size());
    for (std::size_t j = 0; j < traj.states.size(); ++j) {
        const double d = value(j) - h0;
        out.series.push_back(d);
        out.max_abs_drift = std::max(out.max_abs_drift, std::abs(d));
    }
    return out;
}

}  // namespace pistlab
