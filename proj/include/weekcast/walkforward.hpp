#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weekcast/data.hpp"
#include "weekcast/model.hpp"

namespace weekcast {

enum class RetrainPolicy { None, Weekly };

std::string retrain_policy_name(RetrainPolicy policy);
RetrainPolicy retrain_policy_from_name(const std::string& name);

struct ForecastMatrix {
  std::vector<std::array<double, 5>> predictions;
  std::vector<std::array<double, 5>> actuals;
  std::vector<Date> week_start;

  std::size_t weeks() const { return predictions.size(); }
};

double rmse(std::span<const double> pred, std::span<const double> actual);
double rmse(const ForecastMatrix& m);

// Column-wise over the horizon; day d is the d-th position of each 5-block.
std::array<double, 5> per_day_rmse(const ForecastMatrix& m);

double ratio_to_mean(double overall_rmse, const Series& test);
double ratio_to_mean(double overall_rmse, const std::vector<WeekBlock>& test_weeks);

struct EvalOptions {
  ModelOverrides overrides;
  ScalerMode scaler = ScalerMode::None;
  std::size_t stride = 1;
  RetrainPolicy retrain = RetrainPolicy::None;
  // Defaults to the kind's preset; the round seed always overrides the
  // config's seed so one seed drives init and shuffling alike.
  std::optional<TrainConfig> train;
};

struct WalkForwardResult {
  ForecastMatrix matrix;
  double seconds = 0.0;
};

// Trains on the initial series, then walks the test weeks in order:
// forecast 5 days from the trailing history, record, append that week's
// actual opens. Under RetrainPolicy::Weekly the model is rebuilt from the
// same seed and retrained on the grown history after every append (the
// scaler is refit along with it); under None parameters stay fixed.
WalkForwardResult walk_forward_evaluate(ModelKind kind, const Series& train,
                                        const std::vector<WeekBlock>& test_weeks,
                                        std::uint64_t seed, const EvalOptions& options = {});

// Every day of week w = last actual open before week w.
ForecastMatrix persistence_baseline(const std::vector<WeekBlock>& test_weeks,
                                    const Series& history);

struct RoundRow {
  std::size_t round = 0;  // 1-based
  std::uint64_t seed = 0;
  double rmse = 0.0;
  std::array<double, 5> per_day{};
  double seconds = 0.0;
  bool failed = false;
  std::string error;
};

struct ColumnStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1); 0 when n < 2
};

ColumnStats column_stats(std::span<const double> values);

struct EvalReport {
  std::string model;
  ModelOverrides overrides;
  ScalerMode scaler = ScalerMode::None;
  RetrainPolicy retrain = RetrainPolicy::None;
  std::size_t stride = 1;
  std::uint64_t base_seed = 0;
  std::size_t test_week_count = 0;
  double mean_test_open = 0.0;
  std::vector<RoundRow> rows;
  bool partial = false;  // set when any round failed

  // Aggregates over the successful rows only.
  ColumnStats rmse_stats() const;
  ColumnStats day_stats(std::size_t day) const;
  ColumnStats time_stats() const;
  double ratio() const;  // mean round RMSE / mean test open
};

// Seeds base_seed .. base_seed + n_rounds - 1. A failed round is recorded in
// its row and marks the report partial. `jobs` > 1 runs rounds in parallel;
// results are identical to the serial order.
EvalReport run_rounds(ModelKind kind, const Series& train,
                      const std::vector<WeekBlock>& test_weeks, std::size_t n_rounds,
                      std::uint64_t base_seed, const EvalOptions& options = {},
                      std::size_t jobs = 1);

enum class ReportFormat { Text, Csv, Json, Svg };

ReportFormat report_format_from_name(const std::string& name);
std::string report_format_name(ReportFormat format);

// text/csv carry the full table incl. per-round wall-clock; json omits
// timing entirely so equal configurations serialize byte-identically
// (timing goes to render_timing_json); svg draws the per-day RMSE chart.
std::string render_report(const EvalReport& report, ReportFormat format);
std::string render_timing_json(const EvalReport& report);

EvalReport report_from_json(const std::string& text);
// Restores per-round seconds from a render_timing_json document.
void merge_timing_json(EvalReport& report, const std::string& text);

}  // namespace weekcast
