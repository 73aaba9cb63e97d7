#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "weekcast/model.hpp"
#include "weekcast/synth.hpp"
#include "weekcast/walkforward.hpp"

namespace weekcast {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// One run's settings. Everything is validated before any file is created,
// and the effective values are snapshotted to config.json in the run
// directory so the run can be reproduced exactly.
struct RunConfig {
  std::string data;      // CSV path; a relative path that does not exist is
                         // also tried under data_dir
  std::string data_dir;  // empty -> $WEEKCAST_DATA_DIR if set
  std::string train_end = "2018-12-28";
  std::string test_start = "2018-12-31";
  std::string model = "cnn1";
  std::size_t rounds = 10;
  std::uint64_t seed = 1;
  std::size_t stride = 1;
  std::string retrain = "none";
  std::string scaler = "none";
  std::size_t jobs = 1;
  std::string outdir;  // empty -> runs/<model>-<utc timestamp>
  std::vector<std::string> formats = {"text", "csv", "json", "svg"};
  ModelOverrides overrides;
  std::optional<std::size_t> epochs;      // default: the kind's preset
  std::optional<std::size_t> batch_size;  // default: the kind's preset
};

// Returns `data` if it exists, otherwise tries it under data_dir (or
// $WEEKCAST_DATA_DIR). The result may still name a missing file; loading
// reports that as a data error.
std::string resolve_data_path(const std::string& data, const std::string& data_dir);

// Walk-forward evaluation over `rounds` seeds; writes config.json, the
// requested report formats, per_day_rmse.svg, and timing.json into the run
// directory and prints the aggregate row. A failed round still produces a
// report (marked partial) but the command exits nonzero.
int cmd_evaluate(const RunConfig& config, std::ostream& out, std::ostream& err);

// Trains one model (round seed = config.seed) on the training range and
// writes config.json, training_loss.csv, and model.json.
int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err);

// Analytic-vs-numeric gradient comparison across every layer kind; prints
// one line per kind and fails if any exceeds its threshold.
int cmd_gradcheck(std::ostream& out, std::ostream& err);

struct SynthArgs {
  SynthSpec spec;
  std::string output;  // empty -> stdout
};

// Emits a synthetic OHLCV series in the ingestion CSV format.
int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err);

struct ReportArgs {
  std::string input;           // report.json produced by cmd_evaluate
  std::string format = "text";
  std::string output;  // empty -> stdout
};

// Re-renders a saved report.json; a timing.json beside the input restores
// the Time column.
int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err);

}  // namespace weekcast
