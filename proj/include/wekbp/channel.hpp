#pragma once

// Narrowband multipath mmWave channel, ULA steering vectors, oversampled
// codebook, achievable rate and the rate-optimal beam.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "wekbp/error.hpp"
#include "wekbp/taxonomy.hpp"

namespace wekbp {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

inline constexpr double kSpeedOfLight = 299'792'458.0;

struct ArrayConfig {
  int n_t = 16;
  double spacing_m = 0.0;
  double carrier_hz = 60e9;
  int n_beams = 64;

  double wavelength() const { return kSpeedOfLight / carrier_hz; }

  static ArrayConfig half_wavelength(int n_t = 16, double carrier_hz = 60e9, int n_beams = 64) {
    ArrayConfig c;
    c.n_t = n_t;
    c.carrier_hz = carrier_hz;
    c.n_beams = n_beams;
    c.spacing_m = c.wavelength() / 2.0;
    return c;
  }

  void validate() const {
    if (n_t < 1) throw DomainError("array needs at least one antenna");
    if (!(spacing_m > 0.0)) throw DomainError("antenna spacing must be positive");
    if (!(carrier_hz > 0.0)) throw DomainError("carrier frequency must be positive");
    if (n_beams < 1) throw DomainError("codebook needs at least one beam");
  }
};

struct Path {
  double gain = 0.0;        // linear amplitude
  double phase_rad = 0.0;   // φ_l, includes the propagation phase
  double delay_s = 0.0;
  double doppler_hz = 0.0;
  double az_rad = 0.0;      // departure azimuth from array broadside
  double el_rad = 0.0;
  bool los = true;
  MaterialId bounce_material = MaterialId::NONE;  // meaningful only when !los
  double length_m = 0.0;
};

struct Channel {
  std::vector<Path> paths;
  int n_samples = 1;
  double sample_period_s = 1e-4;
  bool los_blocked = false;
};

// a(az, el)[m] = exp(j·m·(2π d/λ)·sin(az)·cos(el)) / n_t
inline CVec steering_vector(const ArrayConfig& cfg, double az, double el) {
  const double kd = 2.0 * std::numbers::pi * cfg.spacing_m / cfg.wavelength();
  const double u = std::sin(az) * std::cos(el);
  CVec a(static_cast<std::size_t>(cfg.n_t));
  const double amp = 1.0 / cfg.n_t;
  for (int m = 0; m < cfg.n_t; ++m) a[static_cast<std::size_t>(m)] = std::polar(amp, m * kd * u);
  return a;
}

struct Codebook {
  std::vector<CVec> beams;
  std::vector<double> sin_angles;  // steering direction of each beam, sin(θ_n)

  std::size_t size() const noexcept { return beams.size(); }
};

// sin(θ_n) = -1 + (2n + 1)/N: uniform over [-1, 1), broadside when N = 1.
// Beam weights are conjugate to the steering vector so h^T f peaks when the
// path direction equals θ_n.
inline Codebook codebook_gen(const ArrayConfig& cfg) {
  cfg.validate();
  const double kd = 2.0 * std::numbers::pi * cfg.spacing_m / cfg.wavelength();
  Codebook cb;
  cb.beams.reserve(static_cast<std::size_t>(cfg.n_beams));
  for (int n = 0; n < cfg.n_beams; ++n) {
    const double s = -1.0 + (2.0 * n + 1.0) / cfg.n_beams;
    CVec f(static_cast<std::size_t>(cfg.n_t));
    for (int m = 0; m < cfg.n_t; ++m) f[static_cast<std::size_t>(m)] = std::polar(1.0 / cfg.n_t, -m * kd * s);
    cb.beams.push_back(std::move(f));
    cb.sin_angles.push_back(s);
  }
  return cb;
}

// h[k] = Σ_l a_l·exp(j(2π f_D,l·k·Δt + φ_l))·a(az_l, el_l)
inline CVec channel_response(const Channel& ch, const ArrayConfig& cfg, int k) {
  if (k < 0 || k >= ch.n_samples) throw DomainError("sample index out of range: " + std::to_string(k));
  CVec h(static_cast<std::size_t>(cfg.n_t), cplx{0.0, 0.0});
  for (const auto& p : ch.paths) {
    const cplx coeff = std::polar(p.gain, 2.0 * std::numbers::pi * p.doppler_hz * k * ch.sample_period_s + p.phase_rad);
    const auto a = steering_vector(cfg, p.az_rad, p.el_rad);
    for (std::size_t m = 0; m < h.size(); ++m) h[m] += coeff * a[m];
  }
  return h;
}

// h^T f (no conjugation).
inline cplx beam_response(std::span<const cplx> h, std::span<const cplx> f) {
  if (h.size() != f.size()) throw ShapeError("beam length does not match the array size");
  cplx acc{0.0, 0.0};
  for (std::size_t m = 0; m < h.size(); ++m) acc += h[m] * f[m];
  return acc;
}

namespace detail {
inline double rate_term(double snr, cplx y) {
  return std::log1p(snr * std::norm(y)) / std::numbers::ln2;
}
inline std::vector<CVec> all_responses(const Channel& ch, const ArrayConfig& cfg) {
  std::vector<CVec> hs;
  hs.reserve(static_cast<std::size_t>(ch.n_samples));
  for (int k = 0; k < ch.n_samples; ++k) hs.push_back(channel_response(ch, cfg, k));
  return hs;
}
inline void check_power(double power, double noise) {
  if (!(power > 0.0)) throw DomainError("transmit power must be positive");
  if (!(noise > 0.0)) throw DomainError("noise power must be positive");
}
}  // namespace detail

// (1/K)·Σ_k log2(1 + (P/σ²)·|h[k]^T f|²) in bits/s/Hz.
inline double achievable_rate(const Channel& ch, const ArrayConfig& cfg, std::span<const cplx> f, double power,
                              double noise) {
  detail::check_power(power, noise);
  if (ch.n_samples < 1) throw DomainError("channel has no samples");
  const double snr = power / noise;
  double sum = 0.0;
  for (int k = 0; k < ch.n_samples; ++k) sum += detail::rate_term(snr, beam_response(channel_response(ch, cfg, k), f));
  return sum / ch.n_samples;
}

inline std::vector<double> beam_rates(const Channel& ch, const ArrayConfig& cfg, const Codebook& cb, double power,
                                      double noise) {
  detail::check_power(power, noise);
  if (ch.n_samples < 1) throw DomainError("channel has no samples");
  const double snr = power / noise;
  const auto hs = detail::all_responses(ch, cfg);
  std::vector<double> rates;
  rates.reserve(cb.size());
  for (const auto& f : cb.beams) {
    double sum = 0.0;
    for (const auto& h : hs) sum += detail::rate_term(snr, beam_response(h, f));
    rates.push_back(sum / ch.n_samples);
  }
  return rates;
}

// First index of the maximum.
inline int argmax(std::span<const double> v) {
  if (v.empty()) throw DomainError("argmax of an empty sequence");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<int>(best);
}

inline int optimal_beam(const Channel& ch, const ArrayConfig& cfg, const Codebook& cb, double power, double noise) {
  if (cb.size() == 0) throw DomainError("empty codebook");
  const auto rates = beam_rates(ch, cfg, cb, power, noise);
  return argmax(rates);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace wekbp
