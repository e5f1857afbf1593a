#pragma once

// Synthetic methanol-synthesis reactor: a ground-truth oracle whose outlet
// states satisfy the atomic and enthalpy balances exactly, plus the matching
// constraint specs.
//
// Reactions (extents xi1, xi2):
//   CO  + 2 H2 -> CH3OH
//   CO2 + 3 H2 -> CH3OH + H2O
// CH4 and N2 are inert. Atomic balances hold by stoichiometry; the outlet
// temperature is the root of the enthalpy balance
//   sum n_in h(T_in) - sum n_out h(T_out) - n_c dH_ev = 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hardproj/constraints.hpp"
#include "hardproj/errors.hpp"
#include "hardproj/linalg.hpp"
#include "hardproj/thermo.hpp"

namespace hardproj::reactor {

inline constexpr const char* constraint_id = "reactor-v1";
inline constexpr const char* generator_version = "reactor-v1";

inline constexpr std::size_t n_species = 7;
inline constexpr std::size_t n_inputs = 10;
inline constexpr std::size_t n_outputs = 10;

// input layout
inline constexpr std::size_t in_T = 0;
inline constexpr std::size_t in_P = 1;
inline constexpr std::size_t in_flow0 = 2;
inline constexpr std::size_t in_coolant = 9;
// output layout
inline constexpr std::size_t out_T = 0;
inline constexpr std::size_t out_P = 1;
inline constexpr std::size_t out_flow0 = 2;
inline constexpr std::size_t out_hotspot = 9;

inline constexpr std::size_t n_balances = 5;  // C, H, O, N, enthalpy
inline constexpr std::size_t enthalpy_row = 4;

/// Operating window for generated outlet temperatures.
inline constexpr double t_operating_min = 450.0;
inline constexpr double t_operating_max = 800.0;

inline std::vector<std::string> input_columns() {
    return {"T_in",        "P_in",       "n_CO_in",  "n_CO2_in", "n_H2_in",
            "n_H2O_in",    "n_CH3OH_in", "n_CH4_in", "n_N2_in",  "n_c"};
}

inline std::vector<std::string> output_columns() {
    return {"T_out",        "P_out",       "n_CO_out",  "n_CO2_out", "n_H2_out",
            "n_H2O_out",    "n_CH3OH_out", "n_CH4_out", "n_N2_out",  "T_hotspot"};
}

/// Box from which inputs are sampled, one [lo, hi] per input column.
struct Bounds {
    std::array<double, n_inputs> lo;
    std::array<double, n_inputs> hi;

    void validate() const {
        for (std::size_t j = 0; j < n_inputs; ++j) {
            if (!(std::isfinite(lo[j]) && std::isfinite(hi[j]) && lo[j] < hi[j]))
                throw ConfigError("bounds: empty or invalid interval for " + input_columns()[j]);
            if (j != in_T && lo[j] < 0.0) throw ConfigError("bounds: negative lower bound for " + input_columns()[j]);
        }
        if (lo[in_T] < 350.0 || hi[in_T] > 900.0) throw ConfigError("bounds: T_in outside [350, 900] K");
    }

    bool contains(std::span<const double> x) const {
        for (std::size_t j = 0; j < n_inputs; ++j)
            if (x[j] < lo[j] || x[j] > hi[j]) return false;
        return true;
    }
};

inline Bounds default_bounds() {
    //          T_in   P_in  CO   CO2  H2   H2O   CH3OH CH4  N2   coolant
    return {{{493.0, 50.0, 0.6, 0.3, 5.0, 0.01, 0.02, 0.4, 0.4, 0.05}},
            {{543.0, 90.0, 1.4, 0.8, 8.0, 0.08, 0.08, 1.2, 1.0, 0.40}}};
}

struct Extents {
    double xi1 = 0.0;  // CO + 2 H2 -> CH3OH
    double xi2 = 0.0;  // CO2 + 3 H2 -> CH3OH + H2O
    bool clipped = false;
};

/// Smooth, bounded reaction progress as a function of the inlet state.
inline Extents reaction_extents(std::span<const double> x) {
    const double t = x[in_T], p = x[in_P];
    const double n_co = x[in_flow0 + 0], n_co2 = x[in_flow0 + 1], n_h2 = x[in_flow0 + 2], n_h2o = x[in_flow0 + 3];
    double total = 0.0;
    for (std::size_t i = 0; i < n_species; ++i) total += x[in_flow0 + i];
    const double y_h2 = total > 0.0 ? n_h2 / total : 0.0;

    const double activity = 1.0 / (1.0 + std::exp(-(t - 505.0) / 15.0));
    const double drive = activity * std::pow(p / 70.0, 0.8) * (0.4 + y_h2);
    Extents e;
    e.xi1 = 0.40 * std::tanh(1.2 * drive) * n_co;
    e.xi2 = 0.25 * std::tanh(0.9 * drive) / (1.0 + 5.0 * n_h2o) * n_co2;

    const double h2_demand = 2.0 * e.xi1 + 3.0 * e.xi2;
    if (h2_demand > 0.95 * n_h2) {
        const double f = 0.95 * n_h2 / h2_demand;
        e.xi1 *= f;
        e.xi2 *= f;
        e.clipped = true;
    }
    return e;
}

inline double coolant_duty(const Thermo& th, std::span<const double> x) {
    return x[in_coolant] * th.coolant_latent_heat;
}

/// Σ n_in h(T_in)
inline double inlet_enthalpy_flow(const Thermo& th, std::span<const double> x) {
    double h = 0.0;
    for (std::size_t i = 0; i < n_species; ++i) h += x[in_flow0 + i] * enthalpy_unchecked(th.species[i], x[in_T]);
    return h;
}

/// Outlet temperature closing the enthalpy balance for fixed outlet flows.
/// Newton iteration safeguarded by bisection on [t_min, t_max]; once |f| <= tol
/// the root is polished while Newton keeps reducing |f|.
inline double solve_outlet_temperature(const Thermo& th, std::span<const double> flows_out, double target,
                                       double start, double tol) {
    auto f = [&](double t) {
        double h = 0.0;
        for (std::size_t i = 0; i < n_species; ++i) h += flows_out[i] * enthalpy_unchecked(th.species[i], t);
        return h - target;
    };
    auto df = [&](double t) {
        double c = 0.0;
        for (std::size_t i = 0; i < n_species; ++i) c += flows_out[i] * heat_capacity(th.species[i], t);
        return c;
    };
    double lo = th.t_min, hi = th.t_max;
    const double f_lo = f(lo), f_hi = f(hi);
    if (f_lo > 0.0 || f_hi < 0.0)
        throw NumericalError("outlet temperature not bracketed in [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "] K: f(lo)=" + std::to_string(f_lo) +
                             ", f(hi)=" + std::to_string(f_hi));
    double t = std::clamp(start, lo, hi);
    for (int it = 0; it < 200; ++it) {
        const double ft = f(t);
        if (std::abs(ft) <= tol) {
            // a few extra Newton steps push the residual down to rounding level
            double best = std::abs(ft);
            for (int polish = 0; polish < 4 && best > 0.0; ++polish) {
                const double cand = t - f(t) / df(t);
                const double fc = std::abs(f(cand));
                if (!(fc < best)) break;
                t = cand;
                best = fc;
            }
            return t;
        }
        if (ft < 0.0)
            lo = t;
        else
            hi = t;
        const double d = df(t);
        double next = d > 0.0 ? t - ft / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == t) return t;
        t = next;
    }
    throw NumericalError("outlet temperature did not converge within bracket [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "] K");
}

/// Outlet state for given extents: stoichiometric flows, T_out from the
/// enthalpy balance, smooth pressure drop and hotspot offset.
inline Vec outlet_state(const Thermo& th, std::span<const double> x, const Extents& e) {
    if (x.size() != n_inputs) throw ShapeError("outlet_state: expected 10 inputs");
    static constexpr std::array<std::array<double, 2>, n_species> nu{{
        {-1.0, 0.0},   // CO
        {0.0, -1.0},   // CO2
        {-2.0, -3.0},  // H2
        {0.0, 1.0},    // H2O
        {1.0, 1.0},    // CH3OH
        {0.0, 0.0},    // CH4
        {0.0, 0.0},    // N2
    }};
    Vec y(n_outputs, 0.0);
    double total_in = 0.0;
    for (std::size_t i = 0; i < n_species; ++i) {
        const double n_in = x[in_flow0 + i];
        total_in += n_in;
        const double n_out = n_in + nu[i][0] * e.xi1 + nu[i][1] * e.xi2;
        if (n_out < 0.0) throw NumericalError("outlet flow of " + th.species[i].name + " would be negative");
        y[out_flow0 + i] = n_out;
    }
    const double h_in = inlet_enthalpy_flow(th, x);
    const double target = h_in - coolant_duty(th, x);
    const double tol = 1e-10 * std::max(std::abs(h_in), 1.0);
    const double t_out = solve_outlet_temperature(th, std::span<const double>(y).subspan(out_flow0, n_species),
                                                  target, x[in_T], tol);
    y[out_T] = t_out;

    const double dp = 0.6 + 0.015 * total_in * total_in * (x[in_T] / 500.0) * (70.0 / x[in_P]);
    y[out_P] = x[in_P] - dp;
    const double progress = e.xi1 + e.xi2;
    y[out_hotspot] = t_out + 4.0 + 35.0 * progress / (progress + 0.25) / (1.0 + 2.0 * x[in_coolant]);
    return y;
}

struct SimResult {
    Vec y;
    bool clipped = false;
};

inline SimResult simulate(const Thermo& th, std::span<const double> x) {
    if (x.size() != n_inputs) throw ShapeError("simulate: expected 10 inputs");
    for (std::size_t j = 0; j < n_inputs; ++j)
        if (!std::isfinite(x[j]) || (j != in_T && x[j] < 0.0))
            throw NumericalError("simulate: invalid input " + input_columns()[j]);
    const Extents e = reaction_extents(x);
    return {outlet_state(th, x, e), e.clipped};
}

inline Mat composition_matrix(const Thermo& th) {
    Mat c(n_atoms, th.size());
    for (std::size_t a = 0; a < n_atoms; ++a)
        for (std::size_t i = 0; i < th.size(); ++i) c(a, i) = th.species[i].atoms[a];
    return c;
}

inline Labels balance_labels() { return {"C", "H", "O", "N", "enthalpy"}; }

/// Atomic and enthalpy balances in separable form:
///   rows C,H,O,N:  Σ_i a_i n_out,i - Σ_i a_i n_in,i
///   enthalpy row:  -Σ_i h_i(T_out) n_out,i - (Q - Σ_i n_in,i h_i(T_in))
/// Frozen outputs: T_out, P_out, T_hotspot. Unfrozen: the seven outlet flows.
inline SeparableSpec build_reactor_spec(const Thermo& thermo) {
    if (thermo.size() != n_species) throw ConfigError("reactor spec: thermo table must list 7 species");
    auto th = std::make_shared<const Thermo>(thermo);
    const Mat comp = composition_matrix(*th);

    SeparableSpec spec;
    spec.id = constraint_id;
    spec.n_inputs = n_inputs;
    spec.B = Mat(n_balances, n_outputs);
    for (std::size_t a = 0; a < n_atoms; ++a)
        for (std::size_t i = 0; i < n_species; ++i) spec.B(a, out_flow0 + i) = comp(a, i);
    spec.frozen = {out_T, out_P, out_hotspot};
    for (std::size_t i = 0; i < n_species; ++i) spec.unfrozen.push_back(out_flow0 + i);
    spec.labels = balance_labels();

    spec.v_fn = [th, comp](std::span<const double> x, std::span<double> v) {
        for (std::size_t a = 0; a < n_atoms; ++a) {
            double s = 0.0;
            for (std::size_t i = 0; i < n_species; ++i) s += comp(a, i) * x[in_flow0 + i];
            v[a] = s;
        }
        v[enthalpy_row] = coolant_duty(*th, x) - inlet_enthalpy_flow(*th, x);
    };
    spec.F_fn = [th](std::span<const double> y_frozen, std::span<double> f) {
        std::fill(f.begin(), f.end(), 0.0);
        const double t_out = y_frozen[0];
        for (std::size_t i = 0; i < n_species; ++i)
            f[enthalpy_row * n_species + i] = -enthalpy_unchecked(th->species[i], t_out);
    };
    spec.F_jacobian = [th](std::span<const double> y_frozen, std::span<double> jac) {
        std::fill(jac.begin(), jac.end(), 0.0);
        const double t_out = y_frozen[0];
        // only the first frozen component (T_out) enters F
        for (std::size_t i = 0; i < n_species; ++i)
            jac[enthalpy_row * n_species + i] = -heat_capacity(th->species[i], t_out);
    };
    spec.reference_fn = [th, comp](std::span<const double> x, std::span<double> ref) {
        for (std::size_t a = 0; a < n_atoms; ++a) {
            double s = 0.0;
            for (std::size_t i = 0; i < n_species; ++i) s += comp(a, i) * x[in_flow0 + i];
            ref[a] = s;
        }
        ref[enthalpy_row] = std::abs(inlet_enthalpy_flow(*th, x));
    };
    return register_separable(std::move(spec));
}

/// The four atomic balances as A x + B y = b, for the linear-only KKT layer.
inline LinearSpec build_reactor_linear_spec(const Thermo& th) {
    const Mat comp = composition_matrix(th);
    Mat a(n_atoms, n_inputs), b(n_atoms, n_outputs);
    for (std::size_t k = 0; k < n_atoms; ++k)
        for (std::size_t i = 0; i < n_species; ++i) {
            a(k, in_flow0 + i) = -comp(k, i);
            b(k, out_flow0 + i) = comp(k, i);
        }
    return make_linear_spec(std::move(a), std::move(b), Vec(n_atoms, 0.0), {"C", "H", "O", "N"},
                            std::string(constraint_id) + "/atoms");
}

}  // namespace hardproj::reactor
