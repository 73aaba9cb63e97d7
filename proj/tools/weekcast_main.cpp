#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "weekcast/runner.hpp"

using namespace weekcast;

namespace {

void add_run_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--data", cfg.data, "OHLCV CSV file (Date,Open,High,Low,Close,Volume)")
      ->required();
  cmd->add_option("--data-dir", cfg.data_dir,
                  "Directory tried for relative --data paths that do not exist as given")
      ->envname("WEEKCAST_DATA_DIR");
  cmd->add_option("--train-end", cfg.train_end, "Last training date (inclusive)")
      ->capture_default_str();
  cmd->add_option("--test-start", cfg.test_start, "First test date (inclusive)")
      ->capture_default_str();
  cmd->add_option("--model", cfg.model, "cnn1|cnn2|lstm1|lstm2|lstm3")->capture_default_str();
  cmd->add_option("--rounds", cfg.rounds, "Evaluation rounds (seeds seed..seed+rounds-1)")
      ->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "Base seed; drives init and shuffling")
      ->capture_default_str();
  cmd->add_option("--stride", cfg.stride, "Training window stride")->capture_default_str();
  cmd->add_option("--retrain", cfg.retrain, "none|weekly")->capture_default_str();
  cmd->add_option("--scaler", cfg.scaler, "none|minmax (fit on training data only)")
      ->capture_default_str();
  cmd->add_option("--jobs", cfg.jobs, "Rounds run in parallel")->capture_default_str();
  cmd->add_option("--outdir", cfg.outdir, "Run directory (default runs/<model>-<timestamp>)");
  cmd->add_option("--formats", cfg.formats, "Report formats: text csv json svg")
      ->capture_default_str()
      ->delimiter(',');
  cmd->add_option("--cnn-filters", cfg.overrides.cnn_filters)->capture_default_str();
  cmd->add_option("--cnn-kernel", cfg.overrides.cnn_kernel)->capture_default_str();
  cmd->add_option("--cnn-hidden", cfg.overrides.cnn_hidden)->capture_default_str();
  cmd->add_option("--encoder-filters", cfg.overrides.encoder_filters)->capture_default_str();
  cmd->add_option("--encoder-kernel", cfg.overrides.encoder_kernel)->capture_default_str();
  cmd->add_option("--lstm-units", cfg.overrides.lstm_units)->capture_default_str();
  cmd->add_option("--td-hidden", cfg.overrides.td_hidden)->capture_default_str();
  cmd->add_option("--epochs", cfg.epochs, "Training epochs (default: the model's preset)");
  cmd->add_option("--batch-size", cfg.batch_size, "Batch size (default: the model's preset)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weekcast: five-day-ahead stock-open forecasting with walk-forward evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a config file; flags win");

  RunConfig cfg;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Walk-forward evaluation over several seeded rounds; writes a run directory");
  add_run_options(evaluate, cfg);
  CLI::App* train =
      app.add_subcommand("train", "Train one model on the training range and save model.json");
  add_run_options(train, cfg);

  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "Compare analytic gradients of every layer kind against finite differences");

  SynthArgs synth;
  std::string synth_start = date_str(synth.spec.start);
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic OHLCV CSV (trend + weekly seasonality)");
  synth_cmd->add_option("--days", synth.spec.days, "Trading days to generate")
      ->capture_default_str();
  synth_cmd->add_option("--base", synth.spec.base, "Curve level at day 0")->capture_default_str();
  synth_cmd->add_option("--slope", synth.spec.slope, "Linear trend per day")
      ->capture_default_str();
  synth_cmd->add_option("--amplitude", synth.spec.amplitude, "Seasonality amplitude")
      ->capture_default_str();
  synth_cmd->add_option("--period", synth.spec.period, "Seasonality period in days")
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth.spec.noise, "Noise standard deviation")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.spec.seed, "Noise seed")->capture_default_str();
  synth_cmd->add_option("--start", synth_start, "First date (weekends are skipped)")
      ->capture_default_str();
  synth_cmd->add_option("--output,-o", synth.output, "Output file (default stdout)");

  ReportArgs report;
  CLI::App* report_cmd =
      app.add_subcommand("report", "Re-render a saved report.json in another format");
  report_cmd->add_option("input", report.input, "Path to report.json")->required();
  report_cmd->add_option("--format", report.format, "text|csv|json|svg")->capture_default_str();
  report_cmd->add_option("--output,-o", report.output, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (evaluate->parsed()) return cmd_evaluate(cfg, std::cout, std::cerr);
  if (train->parsed()) return cmd_train(cfg, std::cout, std::cerr);
  if (gradcheck->parsed()) return cmd_gradcheck(std::cout, std::cerr);
  if (synth_cmd->parsed()) {
    try {
      synth.spec.start = parse_date(synth_start);
    } catch (const DataError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUsage;
    }
    return cmd_synth(synth, std::cout, std::cerr);
  }
  if (report_cmd->parsed()) return cmd_report(report, std::cout, std::cerr);
  return kExitUsage;
}
