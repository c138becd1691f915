// types.hpp
//
// Common Eigen aliases and physical constants used throughout wtqkd.

#ifndef WTQKD_TYPES_HPP
#define WTQKD_TYPES_HPP

#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace wtqkd {

using cdouble = std::complex<double>;

using ArrayXd = Eigen::ArrayXd;
using ArrayXcd = Eigen::ArrayXcd;
using ArrayXXd = Eigen::ArrayXXd;
using VectorXd = Eigen::VectorXd;

template <typename Scalar>
using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

namespace constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double speed_of_light = 299792458.0;     // m/s
inline constexpr double planck = 6.62607015e-34;          // J s
inline constexpr double elementary_charge = 1.602176634e-19; // C

}  // namespace constants

// Unit helpers. Internally the laser model runs in SI.
inline constexpr double ps = 1e-12;
inline constexpr double ns = 1e-9;
inline constexpr double nm = 1e-9;
inline constexpr double mA = 1e-3;
inline constexpr double uW = 1e-6;
inline constexpr double GHz = 1e9;

inline double photon_energy(double wavelength_m) {
    return constants::planck * constants::speed_of_light / wavelength_m;
}

/// Power ratio expressed in dB.
template <typename Scalar>
Scalar to_db(Scalar ratio) {
    using std::log10;
    return Scalar(10) * log10(ratio);
}

template <typename Scalar>
Scalar from_db(Scalar db) {
    using std::pow;
    return pow(Scalar(10), db / Scalar(10));
}

}  // namespace wtqkd

#endif  // WTQKD_TYPES_HPP
