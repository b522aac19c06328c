#pragma once

namespace heliofield::constants {

// CODATA 2018 values.
inline constexpr double kMu0 = 1.25663706212e-6;      // vacuum permeability, N A^-2
inline constexpr double kProtonMassKg = 1.67262192369e-27;
inline constexpr double kBoltzmannJperK = 1.380649e-23;
inline constexpr double kElectronVoltJ = 1.602176634e-19;
inline constexpr double kEvPerKelvin = 8.617333262e-5;  // k_B in eV/K

// IAU 2012 / IAU 2015 nominal values.
inline constexpr double kAstronomicalUnitM = 1.495978707e11;
inline constexpr double kSolarRadiusM = 6.957e8;

inline constexpr double kSecondsPerDay = 86400.0;
inline constexpr double kSecondsPerMinute = 60.0;

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace heliofield::constants
