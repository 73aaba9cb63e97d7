#include "weekcast/runner.hpp"

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "weekcast/data.hpp"
#include "weekcast/layers.hpp"
#include "weekcast/optim.hpp"
#include "weekcast/serialize.hpp"

namespace weekcast {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

template <typename Fn>
int guard(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << content;
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::string utc_stamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

std::string make_run_dir(const std::string& outdir, const std::string& model) {
  std::string dir = outdir;
  if (dir.empty()) {
    const std::string stem = "runs/" + model + "-" + utc_stamp();
    dir = stem;
    for (int n = 2; fs::exists(dir); ++n) dir = stem + "-" + std::to_string(n);
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create run directory '" + dir + "': " + ec.message());
  return dir;
}

// Everything derived from a RunConfig, resolved and checked before any
// output exists.
struct Resolved {
  ModelKind kind = ModelKind::Cnn1;
  RetrainPolicy retrain = RetrainPolicy::None;
  ScalerMode scaler = ScalerMode::None;
  std::vector<ReportFormat> formats;
  Date train_end{};
  Date test_start{};
  TrainConfig train;
  std::string data_path;
};

Resolved validate(const RunConfig& c) {
  Resolved r;
  r.kind = kind_from_name(c.model);
  r.retrain = retrain_policy_from_name(c.retrain);
  r.scaler = scaler_mode_from_name(c.scaler);
  if (c.rounds < 1) throw ConfigError("rounds must be at least 1");
  if (c.stride < 1) throw ConfigError("stride must be at least 1");
  if (c.jobs < 1) throw ConfigError("jobs must be at least 1");
  for (const auto& f : c.formats) r.formats.push_back(report_format_from_name(f));
  if (r.formats.empty()) throw ConfigError("need at least one report format");
  try {
    r.train_end = parse_date(c.train_end);
    r.test_start = parse_date(c.test_start);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  if (!(r.train_end < r.test_start))
    throw ConfigError("test start " + c.test_start + " must come after train end " + c.train_end);

  try {
    Model probe = build_model(r.kind, c.overrides, c.seed);
    r.train = probe.default_train_config();
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("model configuration: ") + e.what());
  }
  if (c.epochs) {
    if (*c.epochs < 1) throw ConfigError("epochs must be at least 1");
    r.train.epochs = *c.epochs;
  }
  if (c.batch_size) {
    if (*c.batch_size < 1) throw ConfigError("batch size must be at least 1");
    r.train.batch_size = *c.batch_size;
  }
  r.train.seed = c.seed;
  r.data_path = resolve_data_path(c.data, c.data_dir);
  return r;
}

ordered_json overrides_json(const ModelOverrides& o) {
  return ordered_json{{"cnn_filters", o.cnn_filters},
                      {"cnn_kernel", o.cnn_kernel},
                      {"cnn_hidden", o.cnn_hidden},
                      {"encoder_filters", o.encoder_filters},
                      {"encoder_kernel", o.encoder_kernel},
                      {"lstm_units", o.lstm_units},
                      {"td_hidden", o.td_hidden}};
}

std::string config_json(const char* command, const RunConfig& c, const Resolved& r) {
  ordered_json j;
  j["command"] = command;
  j["data"] = r.data_path;
  j["train_end"] = c.train_end;
  j["test_start"] = c.test_start;
  j["model"] = c.model;
  j["rounds"] = c.rounds;
  j["seed"] = c.seed;
  j["stride"] = c.stride;
  j["retrain"] = c.retrain;
  j["scaler"] = c.scaler;
  j["jobs"] = c.jobs;
  j["formats"] = c.formats;
  j["overrides"] = overrides_json(c.overrides);
  j["epochs"] = r.train.epochs;
  j["batch_size"] = r.train.batch_size;
  return j.dump(2) + "\n";
}

const char* format_file_name(ReportFormat f) {
  switch (f) {
    case ReportFormat::Text: return "report.txt";
    case ReportFormat::Csv: return "report.csv";
    case ReportFormat::Json: return "report.json";
    case ReportFormat::Svg: return "per_day_rmse.svg";
  }
  throw ConfigError("unknown report format");
}

void print_aggregate(const EvalReport& report, std::ostream& out) {
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s%10s%10s%10s%10s%10s%10s%10s\n", "", "RMSE", "Mon",
                "Tue", "Wed", "Thu", "Fri", "Time(s)");
  out << line;
  const ColumnStats rs = report.rmse_stats();
  const ColumnStats ts = report.time_stats();
  std::array<ColumnStats, 5> ds;
  for (std::size_t d = 0; d < 5; ++d) ds[d] = report.day_stats(d);
  std::snprintf(line, sizeof(line), "%-10s%10.2f%10.2f%10.2f%10.2f%10.2f%10.2f%10.2f\n", "Mean",
                rs.mean, ds[0].mean, ds[1].mean, ds[2].mean, ds[3].mean, ds[4].mean, ts.mean);
  out << line;
  if (report.mean_test_open != 0.0) {
    std::snprintf(line, sizeof(line), "%-10s%10.4f\n", "RMSE/Mean", report.ratio());
    out << line;
  }
}

// Scaled training windows over a history of opens.
std::vector<TrainSample> training_samples(Model& model, ModelKind kind,
                                          const std::vector<double>& history, ScalerMode scaler,
                                          std::size_t stride) {
  if (scaler == ScalerMode::MinMax) model.set_scaler(fit_minmax(history), ScalerMode::MinMax);
  const WindowSet ws =
      make_windows(std::span<const double>(history), model.window_len(), stride);
  const AffineScaler& s = model.scaler();
  std::vector<TrainSample> samples;
  samples.reserve(ws.count());
  for (std::size_t i = 0; i < ws.count(); ++i) {
    std::vector<double> in = ws.inputs[i];
    for (auto& v : in) v = s.transform(v);
    std::vector<double> target(ws.targets[i].begin(), ws.targets[i].end());
    for (auto& v : target) v = s.transform(v);
    samples.push_back({window_input(kind, in), Tensor({5}, std::move(target))});
  }
  return samples;
}

}  // namespace

std::string resolve_data_path(const std::string& data, const std::string& data_dir) {
  if (data.empty()) throw ConfigError("missing data path");
  if (fs::exists(data)) return data;
  std::string dir = data_dir;
  if (dir.empty())
    if (const char* env = std::getenv("WEEKCAST_DATA_DIR")) dir = env;
  if (!dir.empty() && fs::path(data).is_relative()) {
    const fs::path joined = fs::path(dir) / data;
    if (fs::exists(joined)) return joined.string();
  }
  return data;
}

int cmd_evaluate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    const Resolved r = validate(config);
    const ParsedSeries parsed = load_csv(r.data_path);
    const SplitSeries parts = split(parsed.series, r.train_end, r.test_start);
    const WeekSplit weeks = make_weeks(parts.test);
    if (parsed.dropped_rows > 0)
      out << "note: dropped " << parsed.dropped_rows << " unusable csv rows\n";

    EvalOptions options;
    options.overrides = config.overrides;
    options.scaler = r.scaler;
    options.stride = config.stride;
    options.retrain = r.retrain;
    options.train = r.train;

    const std::string dir = make_run_dir(config.outdir, config.model);
    write_file(dir + "/config.json", config_json("evaluate", config, r));

    const EvalReport report = run_rounds(r.kind, parts.train, weeks.weeks, config.rounds,
                                         config.seed, options, config.jobs);
    for (const ReportFormat f : r.formats)
      write_file(dir + "/" + format_file_name(f), render_report(report, f));
    write_file(dir + "/timing.json", render_timing_json(report));

    out << "run dir: " << dir << "\n";
    out << "model " << report.model << " | rounds " << report.rows.size() << " | test weeks "
        << report.test_week_count << "\n";
    print_aggregate(report, out);

    if (report.partial) {
      std::size_t failed = 0;
      std::string first;
      for (const auto& row : report.rows)
        if (row.failed) {
          ++failed;
          if (first.empty()) first = row.error;
        }
      err << "error: " << failed << " of " << report.rows.size() << " rounds failed; first: "
          << first << "\n";
      return kExitNumeric;
    }
    return kExitOk;
  });
}

int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    const Resolved r = validate(config);
    const ParsedSeries parsed = load_csv(r.data_path);
    Series train_side;
    for (const auto& rec : parsed.series)
      if (!(r.train_end < rec.date)) train_side.push_back(rec);
    if (train_side.empty())
      throw DataError("no records on or before " + config.train_end);

    Model model = build_model(r.kind, config.overrides, config.seed);
    const std::vector<double> history = opens(train_side);
    const auto samples = training_samples(model, r.kind, history, r.scaler, config.stride);
    const std::vector<double> losses = train(model, samples, r.train);

    const std::string dir = make_run_dir(config.outdir, config.model);
    write_file(dir + "/config.json", config_json("train", config, r));
    std::string loss_csv = "epoch,loss\n";
    for (std::size_t e = 0; e < losses.size(); ++e)
      loss_csv += std::to_string(e + 1) + "," + format_double(losses[e]) + "\n";
    write_file(dir + "/training_loss.csv", loss_csv);
    save_model(model, dir + "/model.json");

    out << "run dir: " << dir << "\n";
    out << "trained " << config.model << " on " << samples.size() << " windows ("
        << train_side.size() << " records)\n";
    out << "final epoch loss: " << format_double(losses.back()) << "\n";
    out << "model: " << dir << "/model.json\n";
    return kExitOk;
  });
}

int cmd_gradcheck(std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    struct Check {
      std::unique_ptr<Layer> layer;
      Shape input;
      double threshold;
    };
    std::vector<Check> checks;
    checks.push_back({std::make_unique<DenseLayer>(4, 3), {4}, 1e-6});
    checks.push_back({std::make_unique<ReluLayer>(), {6}, 1e-6});
    checks.push_back({std::make_unique<Conv1DLayer>(2, 3, 3), {7, 2}, 1e-6});
    checks.push_back({std::make_unique<MaxPool1DLayer>(2), {6, 3}, 1e-6});
    checks.push_back({std::make_unique<FlattenLayer>(), {4, 3}, 1e-6});
    checks.push_back({std::make_unique<LstmLayer>(3, 4, true), {5, 3}, 1e-4});
    checks.push_back({std::make_unique<RepeatVectorLayer>(4), {3}, 1e-6});
    checks.push_back({std::make_unique<TimeDistributedDenseLayer>(3, 2), {5, 3}, 1e-6});
    checks.push_back({std::make_unique<ConvLstmLayer>(1, 2, 3), {2, 1, 5, 1}, 1e-4});

    bool ok = true;
    char line[128];
    for (auto& c : checks) {
      const double e = gradient_check(*c.layer, c.input, 1e-5, 7);
      const bool pass = e < c.threshold;
      ok = ok && pass;
      std::snprintf(line, sizeof(line), "%-24s max_rel_err %.3e  (threshold %.0e)  %s\n",
                    c.layer->kind().c_str(), e, c.threshold, pass ? "PASS" : "FAIL");
      out << line;
    }
    if (!ok) {
      err << "error: gradient check failed\n";
      return kExitNumeric;
    }
    return kExitOk;
  });
}

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    const std::string csv = synth_csv(args.spec);
    if (args.output.empty())
      out << csv;
    else
      write_file(args.output, csv);
    return kExitOk;
  });
}

int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    const ReportFormat format = report_format_from_name(args.format);
    EvalReport report = report_from_json(read_file(args.input));
    const fs::path timing = fs::path(args.input).parent_path() / "timing.json";
    if (fs::exists(timing)) merge_timing_json(report, read_file(timing.string()));
    const std::string rendered = render_report(report, format);
    if (args.output.empty())
      out << rendered;
    else
      write_file(args.output, rendered);
    return kExitOk;
  });
}

}  // namespace weekcast
