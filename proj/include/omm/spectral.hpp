#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "omm/dataset.hpp"

namespace omm {

// A maximal run of commanded power > 0, rows [start_index, end_index).
struct PulseSegment {
  Eigen::Index start_index = 0;
  Eigen::Index end_index = 0;
  double length_s = 0.0;
  double power_level = 0.0;  // mean commanded power over the run

  Eigen::Index samples() const { return end_index - start_index; }
};

std::vector<PulseSegment> segment_pulses(std::span<const double> power, double sample_rate_hz);

// |X_k| for k = 0..N-1 of the mean-removed signal, unnormalized. Parseval:
// sum |X_k|^2 / N equals the mean-removed energy.
std::vector<double> magnitude_spectrum(std::span<const double> x);

// One-sided amplitude spectrum of the mean-removed signal (N/2 + 1 bins):
// |X_k| / N, doubled for bins that have a mirror image.
std::vector<double> amplitude_spectrum(std::span<const double> x);

struct PulseSpectrum {
  Eigen::Index samples = 0;
  double length_s = 0.0;
  std::vector<double> frequency_hz;  // k * fs / samples
  std::vector<double> amplitude;     // averaged over `count` pulses
  int count = 0;
};

struct PulseSpectra {
  double sample_rate_hz = 0.0;
  std::map<Eigen::Index, PulseSpectrum> by_samples;  // bucketed by exact pulse sample count
  size_t skipped = 0;                                // segments shorter than min_samples
};

inline constexpr Eigen::Index kMinPulseSamples = 4;

PulseSpectra pulse_spectra(std::span<const double> observable, double sample_rate_hz,
                           std::span<const PulseSegment> segments, Eigen::Index min_samples = kMinPulseSamples);
PulseSpectra pulse_spectra(const TimeSeriesDataset& ds, std::string_view observable,
                           std::span<const PulseSegment> segments, Eigen::Index min_samples = kMinPulseSamples);
// Accumulates another experiment's buckets into `into` (weighted by count).
void merge_spectra(PulseSpectra& into, const PulseSpectra& other);

struct Spectrogram {
  std::vector<double> pulse_length_axis;  // s
  std::vector<double> frequency_axis;     // Hz
  Eigen::MatrixXd intensity;              // pulse lengths x frequencies, max 1
  double nyquist_hz = 0.0;
  double display_cap_hz = 0.0;
  double peak_before_normalization = 0.0;
};

struct SpectrogramGrid {
  Eigen::Index pulse_lengths = 100;
  Eigen::Index frequencies = 100;
  double cap_hz = 1.0;
};

// Bilinear interpolation of the ragged bucket spectra onto a grid spanning
// [shortest, longest] pulse x [0, min(cap, Nyquist)] Hz, then scaled so the
// global maximum is 1.
Spectrogram build_spectrogram(const PulseSpectra& spectra, const SpectrogramGrid& grid = {});

// Scales so the maximum is 1; all-zero input is left as is.
void normalize_intensity(Eigen::MatrixXd& intensity);

// Zero-lag normalized cross-correlation <a, b> / (|a| |b|) of the intensity
// matrices; 0 when either is all zero. Throws GridMismatch.
double compare_spectrograms(const Spectrogram& a, const Spectrogram& b);

nlohmann::json to_json(const Spectrogram& s);

}  // namespace omm
