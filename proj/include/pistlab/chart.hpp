#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pistlab/errors.hpp"
#include "pistlab/random.hpp"

namespace pistlab {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x) const noexcept { return x >= lo && x <= hi; }
    double center() const noexcept { return 0.5 * (lo + hi); }
};

/// Toroidal chart U = V x W x T^k in partial action-angle coordinates.
///
/// Coordinates are laid out in a fixed order everywhere in the library:
/// (I1..Ik, z1..zm, phi1..phik). A point of U is therefore a flat vector of
/// length 2k + m, and matrices over U use the same row/column order.
class ChartSpec {
public:
    ChartSpec(std::size_t k, std::size_t m, std::vector<Interval> V, std::vector<Interval> W)
        : k_(k), m_(m), V_(std::move(V)), W_(std::move(W)) {
        if (k_ < 1) throw SchemaError("chart.k", "must be >= 1");
        if (V_.size() != k_) throw SchemaError("chart.V", "expected " + std::to_string(k_) + " intervals");
        if (W_.size() != m_) throw SchemaError("chart.W", "expected " + std::to_string(m_) + " intervals");
        auto check = [](const std::vector<Interval>& box, const char* key) {
            for (const auto& iv : box) {
                if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi))
                    throw SchemaError(key, "interval endpoints must be finite");
                if (iv.lo > iv.hi) throw SchemaError(key, "empty interval");
            }
        };
        check(V_, "chart.V");
        check(W_, "chart.W");
    }

    /// Chart with unit boxes, convenient in tests.
    static ChartSpec unit(std::size_t k, std::size_t m) {
        return ChartSpec(k, m, std::vector<Interval>(k, {0.0, 1.0}), std::vector<Interval>(m, {0.0, 1.0}));
    }

    std::size_t k() const noexcept { return k_; }
    std::size_t m() const noexcept { return m_; }
    /// Length of a flat coordinate vector, 2k + m.
    std::size_t dim() const noexcept { return 2 * k_ + m_; }

    const std::vector<Interval>& V() const noexcept { return V_; }
    const std::vector<Interval>& W() const noexcept { return W_; }

    std::size_t action_index(std::size_t i) const noexcept { return i; }
    std::size_t param_index(std::size_t a) const noexcept { return k_ + a; }
    std::size_t angle_index(std::size_t i) const noexcept { return k_ + m_ + i; }

    static std::string action_name(std::size_t i) { return "I" + std::to_string(i + 1); }
    static std::string param_name(std::size_t a) { return "z" + std::to_string(a + 1); }
    static std::string angle_name(std::size_t i) { return "phi" + std::to_string(i + 1); }

    /// Flat index of a symbol, or nullopt when the name is not in the chart.
    std::optional<std::size_t> symbol_index(std::string_view name) const {
        auto numbered = [](std::string_view rest) -> std::optional<std::size_t> {
            if (rest.empty() || rest.front() == '0') return std::nullopt;
            std::size_t value = 0;
            for (char c : rest) {
                if (c < '0' || c > '9') return std::nullopt;
                value = value * 10 + static_cast<std::size_t>(c - '0');
                if (value > 1'000'000) return std::nullopt;
            }
            return value;
        };
        if (name.starts_with("phi")) {
            if (auto i = numbered(name.substr(3)); i && *i <= k_) return angle_index(*i - 1);
        } else if (name.starts_with("I")) {
            if (auto i = numbered(name.substr(1)); i && *i <= k_) return action_index(*i - 1);
        } else if (name.starts_with("z")) {
            if (auto a = numbered(name.substr(1)); a && *a <= m_) return param_index(*a - 1);
        }
        return std::nullopt;
    }

    std::string symbol_name(std::size_t index) const {
        if (index < k_) return action_name(index);
        if (index < k_ + m_) return param_name(index - k_);
        return angle_name(index - k_ - m_);
    }

    std::vector<std::string> symbols() const {
        std::vector<std::string> out;
        out.reserve(dim());
        for (std::size_t j = 0; j < dim(); ++j) out.push_back(symbol_name(j));
        return out;
    }

    bool in_action_box(const std::vector<double>& I) const noexcept {
        for (std::size_t i = 0; i < k_; ++i)
            if (!(V_[i].contains(I[i]))) return false;
        return true;
    }

    /// Uniform point of V x W x [0, 2pi)^k as a flat coordinate vector.
    std::vector<double> sample_point(Rng& rng) const {
        std::vector<double> x(dim());
        for (std::size_t i = 0; i < k_; ++i) x[action_index(i)] = rng.uniform(V_[i].lo, V_[i].hi);
        for (std::size_t a = 0; a < m_; ++a) x[param_index(a)] = rng.uniform(W_[a].lo, W_[a].hi);
        for (std::size_t i = 0; i < k_; ++i) x[angle_index(i)] = rng.uniform(0.0, two_pi);
        return x;
    }

    bool operator==(const ChartSpec& other) const noexcept {
        auto same = [](const std::vector<Interval>& a, const std::vector<Interval>& b) {
            if (a.size() != b.size()) return false;
            for (std::size_t i = 0; i < a.size(); ++i)
                if (a[i].lo != b[i].lo || a[i].hi != b[i].hi) return false;
            return true;
        };
        return k_ == other.k_ && m_ == other.m_ && same(V_, other.V_) && same(W_, other.W_);
    }

private:
    std::size_t k_;
    std::size_t m_;
    std::vector<Interval> V_;
    std::vector<Interval> W_;
};

}  // namespace pistlab
