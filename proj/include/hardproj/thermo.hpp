#pragma once

// Ideal-gas thermodynamics for the methanol-synthesis species set.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "hardproj/errors.hpp"

namespace hardproj::reactor {

inline constexpr double t_ref = 298.15;  // K

enum class Atom : std::size_t { C = 0, H = 1, O = 2, N = 3 };
inline constexpr std::size_t n_atoms = 4;
inline constexpr std::array<const char*, n_atoms> atom_names{"C", "H", "O", "N"};

struct SpeciesData {
    std::string name;
    std::array<int, n_atoms> atoms;  // C, H, O, N counts
    double h_formation;              // J/mol at 298.15 K
    std::array<double, 4> cp;        // cp(T) = a + bT + cT² + dT³  [J/mol/K]
};

/// Species table plus the coolant's latent heat. Users may build their own
/// tables; default_thermo() is the one the reactor task uses.
struct Thermo {
    std::string version;
    std::vector<SpeciesData> species;
    double coolant_temperature = 0.0;  // K
    double coolant_latent_heat = 0.0;  // J/mol at coolant_temperature
    double t_min = 350.0;              // validity range of enthalpy()
    double t_max = 900.0;

    std::size_t size() const { return species.size(); }
};

/// Gas-phase formation enthalpies and Reid–Prausnitz–Poling cubic cp fits;
/// coolant is boiling water at 523.15 K.
inline Thermo default_thermo() {
    Thermo th;
    th.version = "thermo-v1";
    th.species = {
        {"CO", {1, 0, 1, 0}, -110530.0, {30.87, -1.285e-2, 2.789e-5, -1.272e-8}},
        {"CO2", {1, 0, 2, 0}, -393510.0, {19.80, 7.344e-2, -5.602e-5, 1.715e-8}},
        {"H2", {0, 2, 0, 0}, 0.0, {27.14, 9.274e-3, -1.381e-5, 7.645e-9}},
        {"H2O", {0, 2, 1, 0}, -241826.0, {32.24, 1.924e-3, 1.055e-5, -3.596e-9}},
        {"CH3OH", {1, 4, 1, 0}, -200940.0, {21.15, 7.092e-2, 2.587e-5, -2.852e-8}},
        {"CH4", {1, 4, 0, 0}, -74870.0, {19.25, 5.213e-2, 1.197e-5, -1.132e-8}},
        {"N2", {0, 0, 0, 2}, 0.0, {31.15, -1.357e-2, 2.680e-5, -1.168e-8}},
    };
    th.coolant_temperature = 523.15;
    th.coolant_latent_heat = 30900.0;
    return th;
}

inline double heat_capacity(const SpeciesData& s, double t) {
    const auto& c = s.cp;
    return c[0] + t * (c[1] + t * (c[2] + t * c[3]));
}

/// Δh_f + ∫_{298.15}^{T} cp dτ with no range check; used inside the network
/// layers where predictions may wander outside the tabulated range.
inline double enthalpy_unchecked(const SpeciesData& s, double t) {
    const auto& c = s.cp;
    const double t0 = t_ref;
    const double d1 = t - t0;
    const double d2 = t * t - t0 * t0;
    const double d3 = t * t * t - t0 * t0 * t0;
    const double d4 = t * t * t * t - t0 * t0 * t0 * t0;
    return s.h_formation + c[0] * d1 + c[1] / 2.0 * d2 + c[2] / 3.0 * d3 + c[3] / 4.0 * d4;
}

/// Molar enthalpy [J/mol]; throws outside [t_min, t_max].
inline double enthalpy(const Thermo& th, std::size_t species, double t) {
    if (species >= th.size()) throw ConfigError("enthalpy: unknown species index " + std::to_string(species));
    if (!(t >= th.t_min && t <= th.t_max))
        throw NumericalError("enthalpy: T=" + std::to_string(t) + " K outside [" + std::to_string(th.t_min) + ", " +
                             std::to_string(th.t_max) + "]");
    return enthalpy_unchecked(th.species[species], t);
}

inline std::size_t species_index(const Thermo& th, const std::string& name) {
    for (std::size_t i = 0; i < th.size(); ++i)
        if (th.species[i].name == name) return i;
    throw ConfigError("unknown species " + name);
}

}  // namespace hardproj::reactor
