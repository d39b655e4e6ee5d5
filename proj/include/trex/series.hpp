#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace trex {

enum class MetricKind { Discrete, Continuous };

std::string_view to_string(MetricKind kind) noexcept;
MetricKind metric_kind_from_string(std::string_view s);

/// An hourly-sampled univariate metric recording.
struct Timeseries {
  std::vector<double> values;
  std::string metric_id;
  MetricKind kind = MetricKind::Continuous;

  std::size_t size() const noexcept { return values.size(); }
  std::span<const double> view() const noexcept { return values; }
};

/// Backward-looking window [t-W, t) and forward-looking window [t, t+W).
struct WindowPair {
  std::span<const double> left;
  std::span<const double> right;
  std::size_t center = 0;
  std::size_t half_window = 0;
};

/// log(1+v), then z-scored with the population mean and standard deviation
/// of the transformed series.
///
/// Throws NegativeInput for any raw value < 0, DegenerateSeries when the
/// transformed series is constant (or has fewer than 2 points).
Timeseries preprocess(const Timeseries& raw);

WindowPair slice_window_pair(std::span<const double> series, std::size_t t, std::size_t half_window);

/// Throws unless values are non-empty and finite, and discrete raw values
/// are non-negative integers. `raw` selects the discrete-kind check.
void validate(const Timeseries& series, bool raw);

// NDJSON record: {"metric_id": ..., "kind": "discrete"|"continuous", "values": [...]}
nlohmann::json to_json(const Timeseries& series);
Timeseries timeseries_from_json(const nlohmann::json& j);

}  // namespace trex
