#include "omm/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <unsupported/Eigen/FFT>

#include "omm/error.hpp"

namespace omm {

using Eigen::Index;
using Eigen::MatrixXd;

std::vector<PulseSegment> segment_pulses(std::span<const double> power, double sample_rate_hz) {
  std::vector<PulseSegment> out;
  const auto n = static_cast<Index>(power.size());
  Index i = 0;
  while (i < n) {
    if (!(power[static_cast<size_t>(i)] > 0.0)) {
      ++i;
      continue;
    }
    Index end = i;
    double sum = 0.0;
    while (end < n && power[static_cast<size_t>(end)] > 0.0) sum += power[static_cast<size_t>(end++)];
    PulseSegment s;
    s.start_index = i;
    s.end_index = end;
    s.length_s = static_cast<double>(end - i) / sample_rate_hz;
    s.power_level = sum / static_cast<double>(end - i);
    out.push_back(s);
    i = end;
  }
  return out;
}

namespace {

std::vector<std::complex<double>> centred_fft(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  std::vector<double> centred(x.size());
  for (size_t i = 0; i < x.size(); ++i) centred[i] = x[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, centred);
  return freq;
}

}  // namespace

std::vector<double> magnitude_spectrum(std::span<const double> x) {
  if (x.empty()) return {};
  const auto freq = centred_fft(x);
  std::vector<double> out(freq.size());
  for (size_t k = 0; k < freq.size(); ++k) out[k] = std::abs(freq[k]);
  return out;
}

std::vector<double> amplitude_spectrum(std::span<const double> x) {
  if (x.empty()) return {};
  const size_t n = x.size();
  const auto freq = centred_fft(x);
  std::vector<double> out(n / 2 + 1);
  for (size_t k = 0; k < out.size(); ++k) {
    const bool mirrored = k != 0 && 2 * k != n;
    out[k] = std::abs(freq[k]) / static_cast<double>(n) * (mirrored ? 2.0 : 1.0);
  }
  return out;
}

PulseSpectra pulse_spectra(std::span<const double> observable, double sample_rate_hz,
                           std::span<const PulseSegment> segments, Index min_samples) {
  PulseSpectra out;
  out.sample_rate_hz = sample_rate_hz;
  std::vector<std::vector<double>> amps(segments.size());
  const auto n = static_cast<long>(segments.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto& s = segments[static_cast<size_t>(i)];
    if (s.samples() < min_samples || s.end_index > static_cast<Index>(observable.size())) continue;
    amps[static_cast<size_t>(i)] =
        amplitude_spectrum(observable.subspan(static_cast<size_t>(s.start_index), static_cast<size_t>(s.samples())));
  }
  for (size_t i = 0; i < segments.size(); ++i) {
    if (amps[i].empty()) {
      ++out.skipped;
      continue;
    }
    const Index len = segments[i].samples();
    auto& bucket = out.by_samples[len];
    if (bucket.count == 0) {
      bucket.samples = len;
      bucket.length_s = static_cast<double>(len) / sample_rate_hz;
      bucket.amplitude.assign(amps[i].size(), 0.0);
      bucket.frequency_hz.resize(amps[i].size());
      for (size_t k = 0; k < amps[i].size(); ++k)
        bucket.frequency_hz[k] = static_cast<double>(k) * sample_rate_hz / static_cast<double>(len);
    }
    for (size_t k = 0; k < amps[i].size(); ++k) bucket.amplitude[k] += amps[i][k];
    ++bucket.count;
  }
  for (auto& [len, bucket] : out.by_samples)
    for (double& a : bucket.amplitude) a /= static_cast<double>(bucket.count);
  return out;
}

PulseSpectra pulse_spectra(const TimeSeriesDataset& ds, std::string_view observable,
                           std::span<const PulseSegment> segments, Index min_samples) {
  const Eigen::VectorXd col = ds.column(observable);
  return pulse_spectra(std::span<const double>(col.data(), static_cast<size_t>(col.size())), ds.sample_rate_hz,
                       segments, min_samples);
}

void merge_spectra(PulseSpectra& into, const PulseSpectra& other) {
  if (into.by_samples.empty() && into.sample_rate_hz == 0.0) into.sample_rate_hz = other.sample_rate_hz;
  if (other.sample_rate_hz != into.sample_rate_hz)
    throw Error(ErrorCode::SchemaMismatch, "cannot merge spectra taken at different sample rates");
  into.skipped += other.skipped;
  for (const auto& [len, b] : other.by_samples) {
    auto it = into.by_samples.find(len);
    if (it == into.by_samples.end()) {
      into.by_samples.emplace(len, b);
      continue;
    }
    auto& a = it->second;
    const double wa = a.count;
    const double wb = b.count;
    for (size_t k = 0; k < a.amplitude.size(); ++k)
      a.amplitude[k] = (a.amplitude[k] * wa + b.amplitude[k] * wb) / (wa + wb);
    a.count += b.count;
  }
}

namespace {

// Linear interpolation of (xs, ys) at x; clamps outside the sampled range.
double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto hi = static_cast<size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
  const size_t lo = hi - 1;
  const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + w * (ys[hi] - ys[lo]);
}

std::vector<double> linspace(double lo, double hi, Index n) {
  std::vector<double> out(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i)
    out[static_cast<size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

}  // namespace

void normalize_intensity(MatrixXd& intensity) {
  if (intensity.size() == 0) return;
  const double peak = intensity.maxCoeff();
  if (peak > 0.0) intensity /= peak;
}

Spectrogram build_spectrogram(const PulseSpectra& spectra, const SpectrogramGrid& grid) {
  if (spectra.by_samples.size() < 2) {
    throw Error(ErrorCode::InsufficientPulseLengthDiversity,
                std::to_string(spectra.by_samples.size()) + " distinct pulse length(s); need at least 2");
  }
  if (grid.pulse_lengths < 2 || grid.frequencies < 2 || !(grid.cap_hz > 0.0))
    throw Error(ErrorCode::InvalidConfig, "spectrogram grid needs >= 2 points per axis and a positive cap");

  Spectrogram s;
  s.nyquist_hz = spectra.sample_rate_hz / 2.0;
  s.display_cap_hz = std::min(grid.cap_hz, s.nyquist_hz);
  const double shortest = spectra.by_samples.begin()->second.length_s;
  const double longest = spectra.by_samples.rbegin()->second.length_s;
  s.pulse_length_axis = linspace(shortest, longest, grid.pulse_lengths);
  s.frequency_axis = linspace(0.0, s.display_cap_hz, grid.frequencies);

  // Frequency interpolation per bucket, then along pulse length.
  std::vector<double> lengths;
  std::vector<std::vector<double>> rows;
  for (const auto& [len, b] : spectra.by_samples) {
    lengths.push_back(b.length_s);
    std::vector<double> row;
    for (double f : s.frequency_axis) row.push_back(interp(b.frequency_hz, b.amplitude, f));
    rows.push_back(std::move(row));
  }

  s.intensity.resize(grid.pulse_lengths, grid.frequencies);
  std::vector<double> column(rows.size());
  for (Index j = 0; j < grid.frequencies; ++j) {
    for (size_t r = 0; r < rows.size(); ++r) column[r] = rows[r][static_cast<size_t>(j)];
    for (Index i = 0; i < grid.pulse_lengths; ++i)
      s.intensity(i, j) = interp(lengths, column, s.pulse_length_axis[static_cast<size_t>(i)]);
  }
  s.peak_before_normalization = s.intensity.maxCoeff();
  normalize_intensity(s.intensity);
  return s;
}

double compare_spectrograms(const Spectrogram& a, const Spectrogram& b) {
  auto same_axis = [](const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) return false;
    for (size_t i = 0; i < x.size(); ++i)
      if (std::abs(x[i] - y[i]) > 1e-12 * std::max(1.0, std::abs(x[i]))) return false;
    return true;
  };
  if (!same_axis(a.pulse_length_axis, b.pulse_length_axis) || !same_axis(a.frequency_axis, b.frequency_axis))
    throw Error(ErrorCode::GridMismatch, "spectrograms are on different grids");
  const double na = a.intensity.norm();
  const double nb = b.intensity.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.intensity.cwiseProduct(b.intensity).sum() / (na * nb), 0.0, 1.0);
}

nlohmann::json to_json(const Spectrogram& s) {
  return {{"pulse_length_axis_s", s.pulse_length_axis},
          {"frequency_axis_hz", s.frequency_axis},
          {"nyquist_hz", s.nyquist_hz},
          {"display_cap_hz", s.display_cap_hz},
          {"normalization", "global max scaled to 1"},
          {"peak_before_normalization", s.peak_before_normalization},
          {"spectrum", "one-sided amplitude |X_k|/N of the mean-removed pulse"},
          {"shape", {s.intensity.rows(), s.intensity.cols()}}};
}

}  // namespace omm
