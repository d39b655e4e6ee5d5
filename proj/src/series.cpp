#include "trex/series.hpp"

#include <cmath>

#include "trex/error.hpp"

namespace trex {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::NegativeInput: return "NegativeInput";
    case Errc::DegenerateSeries: return "DegenerateSeries";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::CropTooShort: return "CropTooShort";
    case Errc::InvalidParamSet: return "InvalidParamSet";
    case Errc::SeedCollision: return "SeedCollision";
    case Errc::SeriesTooShort: return "SeriesTooShort";
    case Errc::SegmentTooShort: return "SegmentTooShort";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::WidthTooLarge: return "WidthTooLarge";
    case Errc::NoPositives: return "NoPositives";
    case Errc::NoNegatives: return "NoNegatives";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::NotScalar: return "NotScalar";
    case Errc::TapeConsumed: return "TapeConsumed";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    case Errc::MissingCheckpoint: return "MissingCheckpoint";
    case Errc::SampleSetMismatch: return "SampleSetMismatch";
  }
  return "Unknown";
}

std::string_view to_string(MetricKind kind) noexcept {
  return kind == MetricKind::Discrete ? "discrete" : "continuous";
}

MetricKind metric_kind_from_string(std::string_view s) {
  if (s == "discrete") return MetricKind::Discrete;
  if (s == "continuous") return MetricKind::Continuous;
  throw Error(Errc::ConfigError, "unknown metric kind '" + std::string(s) + "'");
}

Timeseries preprocess(const Timeseries& raw) {
  const std::size_t n = raw.values.size();
  if (n < 2) throw Error(Errc::DegenerateSeries, "series '" + raw.metric_id + "' has fewer than 2 points");

  Timeseries out{std::vector<double>(n), raw.metric_id, raw.kind};
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = raw.values[i];
    if (!(v >= 0.0)) throw Error(Errc::NegativeInput, "series '" + raw.metric_id + "' has a negative or NaN value");
    out.values[i] = std::log1p(v);
    sum += out.values[i];
  }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double& v : out.values) {
    v -= mean;
    ss += v * v;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (!(sd > 1e-12)) throw Error(Errc::DegenerateSeries, "series '" + raw.metric_id + "' is constant after log");
  // Second pass removes the residual mean left by rounding in the first.
  double resid = 0.0;
  for (double& v : out.values) {
    v /= sd;
    resid += v;
  }
  resid /= static_cast<double>(n);
  for (double& v : out.values) v -= resid;
  return out;
}

WindowPair slice_window_pair(std::span<const double> series, std::size_t t, std::size_t half_window) {
  if (half_window == 0 || t < half_window || t + half_window > series.size()) {
    throw Error(Errc::OutOfRange, "window pair at t=" + std::to_string(t) + " with W=" +
                                      std::to_string(half_window) + " does not fit a series of length " +
                                      std::to_string(series.size()));
  }
  return WindowPair{series.subspan(t - half_window, half_window), series.subspan(t, half_window), t, half_window};
}

void validate(const Timeseries& series, bool raw) {
  if (series.values.empty()) throw Error(Errc::SeriesTooShort, "series '" + series.metric_id + "' is empty");
  for (double v : series.values) {
    if (!std::isfinite(v)) throw Error(Errc::NonFiniteValue, "series '" + series.metric_id + "' has non-finite values");
    if (raw && series.kind == MetricKind::Discrete && (v < 0.0 || v != std::floor(v))) {
      throw Error(Errc::NegativeInput, "discrete series '" + series.metric_id + "' must hold non-negative integers");
    }
  }
}

nlohmann::json to_json(const Timeseries& series) {
  return nlohmann::json{{"metric_id", series.metric_id}, {"kind", to_string(series.kind)}, {"values", series.values}};
}

Timeseries timeseries_from_json(const nlohmann::json& j) {
  try {
    Timeseries ts;
    ts.metric_id = j.at("metric_id").get<std::string>();
    ts.kind = metric_kind_from_string(j.at("kind").get<std::string>());
    ts.values = j.at("values").get<std::vector<double>>();
    return ts;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::IoError, std::string("malformed timeseries record: ") + e.what());
  }
}

}  // namespace trex
