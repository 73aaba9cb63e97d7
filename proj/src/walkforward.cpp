#include "weekcast/walkforward.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "weekcast/optim.hpp"

namespace weekcast {

namespace {

using ordered_json = nlohmann::ordered_json;

// Re-throws with a location prefix without changing the exception type.
template <typename Fn>
auto with_context(const std::string& ctx, Fn&& fn) {
  try {
    return fn();
  } catch (const ShapeError& e) {
    throw ShapeError(ctx + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(ctx + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(ctx + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
}

std::vector<double> week_opens(const std::vector<WeekBlock>& weeks) {
  std::vector<double> out;
  out.reserve(weeks.size() * 5);
  for (const auto& week : weeks)
    for (const auto& r : week) out.push_back(r.open);
  return out;
}

}  // namespace

std::string retrain_policy_name(RetrainPolicy policy) {
  return policy == RetrainPolicy::Weekly ? "weekly" : "none";
}

RetrainPolicy retrain_policy_from_name(const std::string& name) {
  if (name == "none") return RetrainPolicy::None;
  if (name == "weekly") return RetrainPolicy::Weekly;
  throw ConfigError("unknown retrain policy '" + name + "' (expected none|weekly)");
}

double rmse(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size() || pred.empty())
    throw ShapeError("rmse: need equal, non-empty value lists");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - actual[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

double rmse(const ForecastMatrix& m) {
  std::vector<double> p, a;
  p.reserve(m.weeks() * 5);
  a.reserve(m.weeks() * 5);
  for (std::size_t w = 0; w < m.weeks(); ++w)
    for (std::size_t d = 0; d < 5; ++d) {
      p.push_back(m.predictions[w][d]);
      a.push_back(m.actuals[w][d]);
    }
  return rmse(p, a);
}

std::array<double, 5> per_day_rmse(const ForecastMatrix& m) {
  if (m.weeks() == 0) throw ShapeError("per_day_rmse: empty matrix");
  std::array<double, 5> out{};
  for (std::size_t d = 0; d < 5; ++d) {
    double acc = 0.0;
    for (std::size_t w = 0; w < m.weeks(); ++w) {
      const double diff = m.predictions[w][d] - m.actuals[w][d];
      acc += diff * diff;
    }
    out[d] = std::sqrt(acc / static_cast<double>(m.weeks()));
  }
  return out;
}

double ratio_to_mean(double overall_rmse, const Series& test) {
  if (test.empty()) throw DataError("ratio_to_mean: empty test series");
  double sum = 0.0;
  for (const auto& r : test) sum += r.open;
  return overall_rmse / (sum / static_cast<double>(test.size()));
}

double ratio_to_mean(double overall_rmse, const std::vector<WeekBlock>& test_weeks) {
  const auto o = week_opens(test_weeks);
  if (o.empty()) throw DataError("ratio_to_mean: no test weeks");
  double sum = 0.0;
  for (double v : o) sum += v;
  return overall_rmse / (sum / static_cast<double>(o.size()));
}

WalkForwardResult walk_forward_evaluate(ModelKind kind, const Series& train,
                                        const std::vector<WeekBlock>& test_weeks,
                                        std::uint64_t seed, const EvalOptions& options) {
  if (test_weeks.empty()) throw DataError("walk_forward: no test weeks");
  const auto t0 = std::chrono::steady_clock::now();

  Model model = build_model(kind, options.overrides, seed);
  TrainConfig config = options.train.value_or(model.default_train_config());
  config.seed = seed;

  std::vector<double> history = opens(train);

  auto fit_and_train = [&] {
    if (options.scaler == ScalerMode::MinMax)
      model.set_scaler(fit_minmax(history), ScalerMode::MinMax);
    const WindowSet ws =
        make_windows(std::span<const double>(history), model.window_len(), options.stride);
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
    weekcast::train(model, samples, config);
  };

  with_context("initial training", [&] { fit_and_train(); return 0; });

  ForecastMatrix matrix;
  for (std::size_t w = 0; w < test_weeks.size(); ++w) {
    const WeekBlock& week = test_weeks[w];
    const std::string ctx = "test week " + std::to_string(w + 1);
    const auto preds = with_context(ctx, [&] { return forecast(model, history); });
    std::array<double, 5> p{}, a{};
    for (std::size_t d = 0; d < 5; ++d) {
      p[d] = preds[d];
      a[d] = week[d].open;
    }
    matrix.predictions.push_back(p);
    matrix.actuals.push_back(a);
    matrix.week_start.push_back(week[0].date);
    for (const auto& r : week) history.push_back(r.open);
    if (options.retrain == RetrainPolicy::Weekly && w + 1 < test_weeks.size()) {
      model = build_model(kind, options.overrides, seed);
      with_context("retraining after " + ctx, [&] { fit_and_train(); return 0; });
    }
  }

  WalkForwardResult result;
  result.matrix = std::move(matrix);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

ForecastMatrix persistence_baseline(const std::vector<WeekBlock>& test_weeks,
                                    const Series& history) {
  if (history.empty()) throw DataError("persistence_baseline: empty history");
  if (test_weeks.empty()) throw DataError("persistence_baseline: no test weeks");
  ForecastMatrix m;
  double last = history.back().open;
  for (const auto& week : test_weeks) {
    std::array<double, 5> p{}, a{};
    p.fill(last);
    for (std::size_t d = 0; d < 5; ++d) a[d] = week[d].open;
    m.predictions.push_back(p);
    m.actuals.push_back(a);
    m.week_start.push_back(week[0].date);
    last = week[4].open;
  }
  return m;
}

ColumnStats column_stats(std::span<const double> values) {
  ColumnStats s;
  if (values.empty()) return s;
  s.min = values[0];
  s.max = values[0];
  double sum = 0.0;
  for (double v : values) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double acc = 0.0;
    for (double v : values) acc += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(acc / static_cast<double>(values.size() - 1));
  }
  return s;
}

namespace {

template <typename Get>
ColumnStats stats_over_rows(const std::vector<RoundRow>& rows, Get&& get) {
  std::vector<double> values;
  values.reserve(rows.size());
  for (const auto& row : rows)
    if (!row.failed) values.push_back(get(row));
  return column_stats(values);
}

}  // namespace

ColumnStats EvalReport::rmse_stats() const {
  return stats_over_rows(rows, [](const RoundRow& r) { return r.rmse; });
}

ColumnStats EvalReport::day_stats(std::size_t day) const {
  if (day >= 5) throw ShapeError("day_stats: day index out of range");
  return stats_over_rows(rows, [day](const RoundRow& r) { return r.per_day[day]; });
}

ColumnStats EvalReport::time_stats() const {
  return stats_over_rows(rows, [](const RoundRow& r) { return r.seconds; });
}

double EvalReport::ratio() const {
  if (mean_test_open == 0.0) return 0.0;
  return rmse_stats().mean / mean_test_open;
}

EvalReport run_rounds(ModelKind kind, const Series& train,
                      const std::vector<WeekBlock>& test_weeks, std::size_t n_rounds,
                      std::uint64_t base_seed, const EvalOptions& options, std::size_t jobs) {
  if (n_rounds < 1) throw ConfigError("run_rounds: need at least one round");
  EvalReport report;
  report.model = kind_name(kind);
  report.overrides = options.overrides;
  report.scaler = options.scaler;
  report.retrain = options.retrain;
  report.stride = options.stride;
  report.base_seed = base_seed;
  report.test_week_count = test_weeks.size();
  const auto o = week_opens(test_weeks);
  if (o.empty()) throw DataError("run_rounds: no test weeks");
  double sum = 0.0;
  for (double v : o) sum += v;
  report.mean_test_open = sum / static_cast<double>(o.size());

  report.rows.resize(n_rounds);
  auto run_one = [&](std::size_t i) {
    RoundRow& row = report.rows[i];
    row.round = i + 1;
    row.seed = base_seed + i;
    try {
      const auto result = walk_forward_evaluate(kind, train, test_weeks, row.seed, options);
      row.rmse = rmse(result.matrix);
      row.per_day = per_day_rmse(result.matrix);
      row.seconds = result.seconds;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < n_rounds; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t workers = std::min(jobs, n_rounds);
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n_rounds; i = next.fetch_add(1)) run_one(i);
      });
    for (auto& th : pool) th.join();
  }

  for (const auto& row : report.rows)
    if (row.failed) report.partial = true;
  return report;
}

ReportFormat report_format_from_name(const std::string& name) {
  if (name == "text") return ReportFormat::Text;
  if (name == "csv") return ReportFormat::Csv;
  if (name == "json") return ReportFormat::Json;
  if (name == "svg") return ReportFormat::Svg;
  throw ConfigError("unknown report format '" + name + "' (expected text|csv|json|svg)");
}

std::string report_format_name(ReportFormat format) {
  switch (format) {
    case ReportFormat::Text: return "text";
    case ReportFormat::Csv: return "csv";
    case ReportFormat::Json: return "json";
    case ReportFormat::Svg: return "svg";
  }
  throw ConfigError("unknown report format");
}

namespace {

std::string render_text(const EvalReport& r) {
  std::ostringstream os;
  os << "model " << r.model << " | scaler " << scaler_mode_name(r.scaler) << " | retrain "
     << retrain_policy_name(r.retrain) << " | stride " << r.stride << " | weeks "
     << r.test_week_count << " | base seed " << r.base_seed;
  if (r.partial) os << " | PARTIAL";
  os << "\n";

  char line[256];
  std::snprintf(line, sizeof(line), "%-10s%10s%10s%10s%10s%10s%10s%10s\n", "No.", "RMSE", "Mon",
                "Tue", "Wed", "Thu", "Fri", "Time(s)");
  os << line;
  for (const auto& row : r.rows) {
    if (row.failed) {
      std::snprintf(line, sizeof(line), "%-10zu  failed: %s\n", row.round, row.error.c_str());
      os << line;
      continue;
    }
    std::snprintf(line, sizeof(line), "%-10zu%10.2f%10.2f%10.2f%10.2f%10.2f%10.2f%10.2f\n",
                  row.round, row.rmse, row.per_day[0], row.per_day[1], row.per_day[2],
                  row.per_day[3], row.per_day[4], row.seconds);
    os << line;
  }

  const ColumnStats rs = r.rmse_stats();
  const ColumnStats ts = r.time_stats();
  std::array<ColumnStats, 5> ds;
  for (std::size_t d = 0; d < 5; ++d) ds[d] = r.day_stats(d);
  auto agg = [&](const char* label, auto pick) {
    std::snprintf(line, sizeof(line), "%-10s%10.2f%10.2f%10.2f%10.2f%10.2f%10.2f%10.2f\n", label,
                  pick(rs), pick(ds[0]), pick(ds[1]), pick(ds[2]), pick(ds[3]), pick(ds[4]),
                  pick(ts));
    os << line;
  };
  agg("Mean", [](const ColumnStats& s) { return s.mean; });
  agg("Min", [](const ColumnStats& s) { return s.min; });
  agg("Max", [](const ColumnStats& s) { return s.max; });
  agg("SD", [](const ColumnStats& s) { return s.sd; });

  if (r.mean_test_open != 0.0) {
    std::snprintf(line, sizeof(line), "%-10s%10.4f%10.2f%10.2f%10.2f%10.2f%10.2f%10s\n",
                  "RMSE/Mean", r.ratio(), ds[0].mean / r.mean_test_open,
                  ds[1].mean / r.mean_test_open, ds[2].mean / r.mean_test_open,
                  ds[3].mean / r.mean_test_open, ds[4].mean / r.mean_test_open, "");
    os << line;
  }
  return os.str();
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    out += c;
    if (c == '"') out += '"';
  }
  out += '"';
  return out;
}

std::string render_csv(const EvalReport& r) {
  std::string out = "no,seed,rmse,mon,tue,wed,thu,fri,seconds,error\n";
  for (const auto& row : r.rows) {
    out += std::to_string(row.round) + ',' + std::to_string(row.seed) + ',';
    if (row.failed) {
      out += ",,,,,,," + csv_quote(row.error) + "\n";
      continue;
    }
    out += format_double(row.rmse) + ',';
    for (std::size_t d = 0; d < 5; ++d) out += format_double(row.per_day[d]) + ',';
    out += format_double(row.seconds) + ",\n";
  }
  const ColumnStats rs = r.rmse_stats();
  const ColumnStats ts = r.time_stats();
  std::array<ColumnStats, 5> ds;
  for (std::size_t d = 0; d < 5; ++d) ds[d] = r.day_stats(d);
  auto agg = [&](const char* label, auto pick) {
    out += std::string(label) + ",," + format_double(pick(rs)) + ',';
    for (std::size_t d = 0; d < 5; ++d) out += format_double(pick(ds[d])) + ',';
    out += format_double(pick(ts)) + ",\n";
  };
  agg("mean", [](const ColumnStats& s) { return s.mean; });
  agg("min", [](const ColumnStats& s) { return s.min; });
  agg("max", [](const ColumnStats& s) { return s.max; });
  agg("sd", [](const ColumnStats& s) { return s.sd; });
  out += "ratio_to_mean,," + format_double(r.ratio()) + ",,,,,,,\n";
  return out;
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

ModelOverrides overrides_from_json(const nlohmann::json& j) {
  ModelOverrides o;
  o.cnn_filters = j.at("cnn_filters").get<std::size_t>();
  o.cnn_kernel = j.at("cnn_kernel").get<std::size_t>();
  o.cnn_hidden = j.at("cnn_hidden").get<std::size_t>();
  o.encoder_filters = j.at("encoder_filters").get<std::size_t>();
  o.encoder_kernel = j.at("encoder_kernel").get<std::size_t>();
  o.lstm_units = j.at("lstm_units").get<std::size_t>();
  o.td_hidden = j.at("td_hidden").get<std::size_t>();
  return o;
}

ordered_json stats_json(const ColumnStats& s) {
  return ordered_json{{"mean", s.mean}, {"min", s.min}, {"max", s.max}, {"sd", s.sd}};
}

std::string render_json(const EvalReport& r) {
  ordered_json j;
  j["model"] = r.model;
  j["overrides"] = overrides_json(r.overrides);
  j["scaler"] = scaler_mode_name(r.scaler);
  j["retrain"] = retrain_policy_name(r.retrain);
  j["stride"] = r.stride;
  j["base_seed"] = r.base_seed;
  j["rounds"] = r.rows.size();
  j["test_weeks"] = r.test_week_count;
  j["mean_test_open"] = r.mean_test_open;
  j["partial"] = r.partial;
  j["rows"] = ordered_json::array();
  for (const auto& row : r.rows) {
    ordered_json rj;
    rj["round"] = row.round;
    rj["seed"] = row.seed;
    rj["rmse"] = row.rmse;
    rj["per_day"] = row.per_day;
    rj["failed"] = row.failed;
    rj["error"] = row.error;
    j["rows"].push_back(rj);
  }
  ordered_json agg;
  agg["rmse"] = stats_json(r.rmse_stats());
  agg["per_day"] = ordered_json::array();
  for (std::size_t d = 0; d < 5; ++d) agg["per_day"].push_back(stats_json(r.day_stats(d)));
  j["aggregates"] = agg;
  j["ratio_to_mean"] = r.ratio();
  return j.dump(2) + "\n";
}

std::string render_svg(const EvalReport& r) {
  static const char* kDays[5] = {"Mon", "Tue", "Wed", "Thu", "Fri"};
  std::array<double, 5> means{};
  double top = 0.0;
  for (std::size_t d = 0; d < 5; ++d) {
    means[d] = r.day_stats(d).mean;
    top = std::max(top, means[d]);
  }
  if (top <= 0.0) top = 1.0;

  const double plot_h = 220.0, base_y = 290.0, bar_w = 56.0, step = 84.0, left = 80.0;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"520\" height=\"340\" "
        "viewBox=\"0 0 520 340\">\n";
  os << "  <title>RMSE by forecast day</title>\n";
  os << "  <rect width=\"520\" height=\"340\" fill=\"white\"/>\n";
  os << "  <text x=\"260\" y=\"28\" text-anchor=\"middle\" font-size=\"16\" "
        "font-family=\"sans-serif\">"
     << r.model << ": mean RMSE by day</text>\n";
  os << "  <line x1=\"60\" y1=\"" << base_y << "\" x2=\"500\" y2=\"" << base_y
     << "\" stroke=\"black\"/>\n";
  os << "  <line x1=\"60\" y1=\"" << base_y - plot_h - 10 << "\" x2=\"60\" y2=\"" << base_y
     << "\" stroke=\"black\"/>\n";
  char buf[160];
  for (int tick = 0; tick <= 2; ++tick) {
    const double v = top * tick / 2.0;
    const double y = base_y - plot_h * tick / 2.0;
    std::snprintf(buf, sizeof(buf),
                  "  <text x=\"54\" y=\"%.1f\" text-anchor=\"end\" font-size=\"11\" "
                  "font-family=\"sans-serif\">%.2f</text>\n",
                  y + 4.0, v);
    os << buf;
  }
  for (std::size_t d = 0; d < 5; ++d) {
    const double h = plot_h * means[d] / top;
    const double x = left + step * static_cast<double>(d);
    std::snprintf(buf, sizeof(buf),
                  "  <rect class=\"day\" x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
                  "fill=\"#4878a8\"/>\n",
                  x, base_y - h, bar_w, h);
    os << buf;
    std::snprintf(buf, sizeof(buf),
                  "  <text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" font-size=\"12\" "
                  "font-family=\"sans-serif\">%.2f</text>\n",
                  x + bar_w / 2.0, base_y - h - 6.0, means[d]);
    os << buf;
    std::snprintf(buf, sizeof(buf),
                  "  <text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" font-size=\"13\" "
                  "font-family=\"sans-serif\">%s</text>\n",
                  x + bar_w / 2.0, base_y + 20.0, kDays[d]);
    os << buf;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

std::string render_report(const EvalReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Text: return render_text(report);
    case ReportFormat::Csv: return render_csv(report);
    case ReportFormat::Json: return render_json(report);
    case ReportFormat::Svg: return render_svg(report);
  }
  throw ConfigError("unknown report format");
}

std::string render_timing_json(const EvalReport& report) {
  ordered_json j;
  j["rows"] = ordered_json::array();
  double total = 0.0;
  for (const auto& row : report.rows) {
    j["rows"].push_back(ordered_json{{"round", row.round}, {"seconds", row.seconds}});
    total += row.seconds;
  }
  j["total_seconds"] = total;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report json: ") + e.what());
  }
  try {
    EvalReport r;
    r.model = j.at("model").get<std::string>();
    r.overrides = overrides_from_json(j.at("overrides"));
    r.scaler = scaler_mode_from_name(j.at("scaler").get<std::string>());
    r.retrain = retrain_policy_from_name(j.at("retrain").get<std::string>());
    r.stride = j.at("stride").get<std::size_t>();
    r.base_seed = j.at("base_seed").get<std::uint64_t>();
    r.test_week_count = j.at("test_weeks").get<std::size_t>();
    r.mean_test_open = j.at("mean_test_open").get<double>();
    r.partial = j.at("partial").get<bool>();
    for (const auto& rj : j.at("rows")) {
      RoundRow row;
      row.round = rj.at("round").get<std::size_t>();
      row.seed = rj.at("seed").get<std::uint64_t>();
      row.rmse = rj.at("rmse").get<double>();
      const auto& pd = rj.at("per_day");
      for (std::size_t d = 0; d < 5; ++d) row.per_day[d] = pd.at(d).get<double>();
      row.failed = rj.at("failed").get<bool>();
      row.error = rj.at("error").get<std::string>();
      r.rows.push_back(row);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report json: ") + e.what());
  }
}

void merge_timing_json(EvalReport& report, const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    for (const auto& rj : j.at("rows")) {
      const auto round = rj.at("round").get<std::size_t>();
      for (auto& row : report.rows)
        if (row.round == round) row.seconds = rj.at("seconds").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("timing json: ") + e.what());
  }
}

}  // namespace weekcast
